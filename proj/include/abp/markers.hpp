#pragma once

// Steroid-profile markers, raw samples and their log-scale vectors.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace abp {

enum class Marker : std::uint8_t { A5, B5, A, E, ETIO, T, T_E, A_T, A_ETIO, A5_B5, A5_E };

inline constexpr std::size_t kMarkerCount = 11;
inline constexpr std::size_t kConcentrationCount = 6;
inline constexpr std::size_t kRatioCount = 5;

enum class MarkerKind { concentration, ratio };

inline constexpr std::array<Marker, kMarkerCount> kAllMarkers = {
    Marker::A5,  Marker::B5,  Marker::A,      Marker::E,     Marker::ETIO, Marker::T,
    Marker::T_E, Marker::A_T, Marker::A_ETIO, Marker::A5_B5, Marker::A5_E};

inline constexpr std::array<Marker, kConcentrationCount> kConcentrations = {
    Marker::A5, Marker::B5, Marker::A, Marker::E, Marker::ETIO, Marker::T};

inline constexpr std::array<Marker, kRatioCount> kRatios = {
    Marker::T_E, Marker::A_T, Marker::A_ETIO, Marker::A5_B5, Marker::A5_E};

struct RatioDefinition {
  Marker ratio;
  Marker numerator;
  Marker denominator;
};

inline constexpr std::array<RatioDefinition, kRatioCount> kRatioDefinitions = {{
    {Marker::T_E, Marker::T, Marker::E},
    {Marker::A_T, Marker::A, Marker::T},
    {Marker::A_ETIO, Marker::A, Marker::ETIO},
    {Marker::A5_B5, Marker::A5, Marker::B5},
    {Marker::A5_E, Marker::A5, Marker::E},
}};

constexpr std::size_t index_of(Marker m) noexcept { return static_cast<std::size_t>(m); }
constexpr MarkerKind kind_of(Marker m) noexcept {
  return index_of(m) < kConcentrationCount ? MarkerKind::concentration : MarkerKind::ratio;
}
const RatioDefinition& ratio_definition(Marker ratio);

/// Display code, e.g. "T/E".
std::string_view marker_code(Marker m) noexcept;
/// Column-safe name, e.g. "T_E".
std::string_view marker_column(Marker m) noexcept;
/// Accepts either the display code or the column name (case-insensitive).
std::optional<Marker> parse_marker(std::string_view text) noexcept;

enum class LimitFlag : std::uint8_t { measured, below_loq, below_lod };
enum class Sex : std::uint8_t { male, female };
enum class Label : std::uint8_t { normal, atypical, abnormal };

std::string_view to_string(LimitFlag f) noexcept;
std::string_view to_string(Sex s) noexcept;
std::string_view to_string(Label l) noexcept;
std::optional<Sex> parse_sex(std::string_view text) noexcept;
std::optional<Label> parse_label(std::string_view text) noexcept;

struct MarkerReading {
  double raw = 0.0;
  LimitFlag flag = LimitFlag::measured;

  friend bool operator==(const MarkerReading&, const MarkerReading&) = default;
};

struct RawSample {
  std::string athlete_id;
  std::int64_t timestamp = 0;
  Sex sex = Sex::male;
  std::array<std::optional<MarkerReading>, kMarkerCount> values{};
  std::optional<Label> label;

  [[nodiscard]] const std::optional<MarkerReading>& at(Marker m) const { return values[index_of(m)]; }
  std::optional<MarkerReading>& at(Marker m) { return values[index_of(m)]; }

  friend bool operator==(const RawSample&, const RawSample&) = default;
};

enum class MarkerSubset { eaas, ratios, all };

std::vector<Marker> markers_of(MarkerSubset subset);
std::string_view to_string(MarkerSubset s) noexcept;
std::optional<MarkerSubset> parse_subset(std::string_view text) noexcept;

/// Where ratio values come from when a sample is turned into log space.
enum class RatioSource {
  recorded,               // ratio columns only; missing is an error
  derived,                // always recomputed from substituted concentrations
  recorded_else_derived,  // recorded when present, derived otherwise
};

struct MarkerVector {
  std::vector<Marker> order;
  Eigen::VectorXd log_values;

  [[nodiscard]] std::size_t dim() const noexcept { return order.size(); }
};

/// Replaces <LOQ / <LOD concentrations by the fixed cut-offs used for T, E and
/// the -diols. Measured values pass through unchanged.
double apply_detection_limits(double raw_value, Marker marker, LimitFlag flag);

/// Substitutes every flagged concentration in the sample. Flagged ratios and
/// flagged A / ETIO raise SubstitutionUndefined.
RawSample substitute_limits(const RawSample& sample);

/// Ratios (T/E, A/T, A/ETIO, A5/B5, A5/E) from concentrations ordered as
/// kConcentrations (A5, B5, A, E, ETIO, T).
std::array<double, kRatioCount> compute_ratios(std::span<const double, kConcentrationCount> conc);

/// Natural log of the selected markers. Flagged concentrations must already be
/// substituted (see substitute_limits).
MarkerVector log_transform(const RawSample& sample, std::span<const Marker> subset,
                           RatioSource ratios = RatioSource::recorded_else_derived);

/// Raw-scale value of one marker, deriving ratios from concentrations when needed.
std::optional<double> raw_value(const RawSample& sample, Marker marker,
                                RatioSource ratios = RatioSource::recorded_else_derived);

}  // namespace abp
