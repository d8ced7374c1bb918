#include "abp/markers.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "abp/error.hpp"

namespace abp {
namespace {

constexpr std::array<std::string_view, kMarkerCount> kCodes = {
    "A5", "B5", "A", "E", "ETIO", "T", "T/E", "A/T", "A/ETIO", "A5/B5", "A5/E"};
constexpr std::array<std::string_view, kMarkerCount> kColumns = {
    "A5", "B5", "A", "E", "ETIO", "T", "T_E", "A_T", "A_ETIO", "A5_B5", "A5_E"};

bool iequals(std::string_view a, std::string_view b) noexcept {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::toupper(static_cast<unsigned char>(x)) ==
                  std::toupper(static_cast<unsigned char>(y));
         });
}

std::string name(Marker m) { return std::string(marker_code(m)); }

}  // namespace

const RatioDefinition& ratio_definition(Marker ratio) {
  for (const auto& def : kRatioDefinitions)
    if (def.ratio == ratio) return def;
  fail(Errc::InvalidParameter, name(ratio) + " is not a ratio marker");
}

std::string_view marker_code(Marker m) noexcept { return kCodes[index_of(m)]; }
std::string_view marker_column(Marker m) noexcept { return kColumns[index_of(m)]; }

std::optional<Marker> parse_marker(std::string_view text) noexcept {
  for (Marker m : kAllMarkers)
    if (iequals(text, kCodes[index_of(m)]) || iequals(text, kColumns[index_of(m)])) return m;
  return std::nullopt;
}

std::string_view to_string(LimitFlag f) noexcept {
  switch (f) {
    case LimitFlag::measured: return "measured";
    case LimitFlag::below_loq: return "<LOQ";
    case LimitFlag::below_lod: return "<LOD";
  }
  return "?";
}

std::string_view to_string(Sex s) noexcept { return s == Sex::male ? "M" : "F"; }

std::string_view to_string(Label l) noexcept {
  switch (l) {
    case Label::normal: return "normal";
    case Label::atypical: return "atypical";
    case Label::abnormal: return "abnormal";
  }
  return "?";
}

std::optional<Sex> parse_sex(std::string_view text) noexcept {
  if (iequals(text, "M") || iequals(text, "male")) return Sex::male;
  if (iequals(text, "F") || iequals(text, "female")) return Sex::female;
  return std::nullopt;
}

std::optional<Label> parse_label(std::string_view text) noexcept {
  for (Label l : {Label::normal, Label::atypical, Label::abnormal})
    if (iequals(text, to_string(l))) return l;
  return std::nullopt;
}

std::vector<Marker> markers_of(MarkerSubset subset) {
  switch (subset) {
    case MarkerSubset::eaas: return {kConcentrations.begin(), kConcentrations.end()};
    case MarkerSubset::ratios: return {kRatios.begin(), kRatios.end()};
    case MarkerSubset::all: return {kAllMarkers.begin(), kAllMarkers.end()};
  }
  return {};
}

std::string_view to_string(MarkerSubset s) noexcept {
  switch (s) {
    case MarkerSubset::eaas: return "eaas";
    case MarkerSubset::ratios: return "ratios";
    case MarkerSubset::all: return "all";
  }
  return "?";
}

std::optional<MarkerSubset> parse_subset(std::string_view text) noexcept {
  for (MarkerSubset s : {MarkerSubset::eaas, MarkerSubset::ratios, MarkerSubset::all})
    if (iequals(text, to_string(s))) return s;
  return std::nullopt;
}

double apply_detection_limits(double raw_value, Marker marker, LimitFlag flag) {
  if (flag == LimitFlag::measured) {
    if (!(raw_value > 0.0 && std::isfinite(raw_value)))
      fail(Errc::NonPositiveValue,
           name(marker) + " measured value " + std::to_string(raw_value) + " is not positive");
    return raw_value;
  }
  const bool loq = flag == LimitFlag::below_loq;
  switch (marker) {
    case Marker::T:
    case Marker::E: return loq ? 1.0 : 0.1;
    case Marker::A5:
    case Marker::B5: return loq ? 5.0 : 1.0;
    default:
      fail(Errc::SubstitutionUndefined,
           "no " + std::string(to_string(flag)) + " cut-off defined for " + name(marker));
  }
}

RawSample substitute_limits(const RawSample& sample) {
  RawSample out = sample;
  for (Marker m : kAllMarkers) {
    auto& reading = out.at(m);
    if (!reading) continue;
    reading->raw = apply_detection_limits(reading->raw, m, reading->flag);
    reading->flag = LimitFlag::measured;
  }
  return out;
}

std::array<double, kRatioCount> compute_ratios(std::span<const double, kConcentrationCount> conc) {
  std::array<double, kRatioCount> out{};
  for (std::size_t r = 0; r < kRatioCount; ++r) {
    const auto& def = kRatioDefinitions[r];
    const double den = conc[index_of(def.denominator)];
    if (!(den > 0.0))
      fail(Errc::DivisionByNonPositive,
           name(def.ratio) + " denominator " + name(def.denominator) + " is not positive");
    out[r] = conc[index_of(def.numerator)] / den;
  }
  return out;
}

std::optional<double> raw_value(const RawSample& sample, Marker marker, RatioSource ratios) {
  const auto& reading = sample.at(marker);
  if (kind_of(marker) == MarkerKind::concentration) {
    if (!reading) return std::nullopt;
    if (!(reading->flag == LimitFlag::measured))
      fail(Errc::InvalidParameter,
           name(marker) + " still carries a detection-limit flag; substitute first");
    return reading->raw;
  }
  if (reading && ratios != RatioSource::derived) return reading->raw;
  if (ratios == RatioSource::recorded) return std::nullopt;
  const auto& def = ratio_definition(marker);
  const auto num = raw_value(sample, def.numerator, ratios);
  const auto den = raw_value(sample, def.denominator, ratios);
  if (!num || !den) return std::nullopt;
  if (!(*den > 0.0))
    fail(Errc::DivisionByNonPositive,
         name(marker) + " denominator " + name(def.denominator) + " is not positive");
  return *num / *den;
}

MarkerVector log_transform(const RawSample& sample, std::span<const Marker> subset,
                           RatioSource ratios) {
  MarkerVector out;
  out.order.assign(subset.begin(), subset.end());
  out.log_values.resize(static_cast<Eigen::Index>(subset.size()));
  for (std::size_t k = 0; k < subset.size(); ++k) {
    const auto value = raw_value(sample, subset[k], ratios);
    if (!(value.has_value()))
      fail(Errc::IncompleteSample,
           "sample " + sample.athlete_id + "@" + std::to_string(sample.timestamp) + " lacks " +
             name(subset[k]));
    if (!(*value > 0.0 && std::isfinite(*value)))
      fail(Errc::NonPositiveValue,
           name(subset[k]) + " value " + std::to_string(*value) + " cannot be log-transformed");
    out.log_values[static_cast<Eigen::Index>(k)] = std::log(*value);
  }
  return out;
}

}  // namespace abp
