#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

namespace abp {

/// Seedable xoshiro256** generator with deterministic stream derivation.
///
/// Every (seed, stream_id) pair maps to an independent-looking state through
/// SplitMix64, so concurrent chains can each own a stream derived from one
/// master seed. All distributions are implemented here rather than taken from
/// <random> because the standard distributions are not specified bit-for-bit
/// and differ between library implementations.
class Rng {
 public:
  using result_type = std::uint64_t;

  Rng(std::uint64_t seed, std::uint64_t stream_id = 0);

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
  result_type operator()() noexcept { return next_u64(); }

  std::uint64_t next_u64() noexcept;
  /// Uniform on the open interval (0, 1).
  double uniform() noexcept;
  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) noexcept;
  double normal() noexcept;
  /// Gamma with shape `shape` and rate `rate` (mean shape / rate).
  double gamma(double shape, double rate);
  double chi_squared(double df);

  /// Independent child stream, e.g. one per athlete.
  [[nodiscard]] Rng fork(std::uint64_t child_id) const noexcept;

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::uint64_t stream_id() const noexcept { return stream_; }

  /// Full generator state as text, for checkpointing chains.
  [[nodiscard]] std::string serialize() const;
  static Rng deserialize(std::string_view text);

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  Rng() = default;
  double gamma_unit(double shape) noexcept;

  std::uint64_t seed_ = 0;
  std::uint64_t stream_ = 0;
  std::array<std::uint64_t, 4> s_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

/// 64-bit FNV-1a, used to turn identifiers into stream ids.
std::uint64_t stable_hash(std::string_view text) noexcept;

}  // namespace abp
