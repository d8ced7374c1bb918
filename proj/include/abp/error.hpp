#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace abp {

enum class Errc {
  SubstitutionUndefined,
  NonPositiveValue,
  DivisionByNonPositive,
  IncompleteSample,
  MalformedRow,
  UnknownMarkerColumn,
  DuplicateTimestamp,
  NotPositiveDefinite,
  NotSymmetric,
  InvalidParameter,
  DimensionMismatch,
  DegreesOfFreedomTooSmall,
  TooFewSamples,
  TooFewObservations,
  EmptyAthlete,
  UnknownAthlete,
  MissingThreshold,
  SingleClassInput,
  MissingLabel,
  LengthMismatch,
  InvalidSpec,
  ConfigError,
  IoError,
  FormatError,
};

std::string_view errc_name(Errc code) noexcept;

/// Base exception for every failure raised by the library. The code is the
/// stable, machine-checkable part; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message);

  [[nodiscard]] Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Raised when a Cholesky factorization fails. `minor_order` is the order of
/// the first leading principal minor that is not positive (1-based).
class NotPositiveDefiniteError : public Error {
 public:
  NotPositiveDefiniteError(std::size_t minor_order, std::string context);

  [[nodiscard]] std::size_t minor_order() const noexcept { return minor_order_; }
  [[nodiscard]] const std::string& context() const noexcept { return context_; }

 private:
  std::size_t minor_order_;
  std::string context_;
};

[[noreturn]] void fail(Errc code, const std::string& message);

inline void require(bool condition, Errc code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace abp
