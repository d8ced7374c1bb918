#include "abp/error.hpp"

namespace abp {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::SubstitutionUndefined: return "SubstitutionUndefined";
    case Errc::NonPositiveValue: return "NonPositiveValue";
    case Errc::DivisionByNonPositive: return "DivisionByNonPositive";
    case Errc::IncompleteSample: return "IncompleteSample";
    case Errc::MalformedRow: return "MalformedRow";
    case Errc::UnknownMarkerColumn: return "UnknownMarkerColumn";
    case Errc::DuplicateTimestamp: return "DuplicateTimestamp";
    case Errc::NotPositiveDefinite: return "NotPositiveDefinite";
    case Errc::NotSymmetric: return "NotSymmetric";
    case Errc::InvalidParameter: return "InvalidParameter";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::DegreesOfFreedomTooSmall: return "DegreesOfFreedomTooSmall";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::TooFewObservations: return "TooFewObservations";
    case Errc::EmptyAthlete: return "EmptyAthlete";
    case Errc::UnknownAthlete: return "UnknownAthlete";
    case Errc::MissingThreshold: return "MissingThreshold";
    case Errc::SingleClassInput: return "SingleClassInput";
    case Errc::MissingLabel: return "MissingLabel";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::InvalidSpec: return "InvalidSpec";
    case Errc::ConfigError: return "ConfigError";
    case Errc::IoError: return "IoError";
    case Errc::FormatError: return "FormatError";
  }
  return "Unknown";
}

Error::Error(Errc code, const std::string& message)
    : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

NotPositiveDefiniteError::NotPositiveDefiniteError(std::size_t minor_order, std::string context)
    : Error(Errc::NotPositiveDefinite,
            (context.empty() ? std::string() : context + ": ") + "leading minor of order " +
                std::to_string(minor_order) + " is not positive"),
      minor_order_(minor_order),
      context_(std::move(context)) {}

void fail(Errc code, const std::string& message) { throw Error(code, message); }

}  // namespace abp
