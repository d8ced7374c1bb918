#pragma once

// Versioned JSON run configuration shared by every CLI command.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "abp/evaluation.hpp"
#include "abp/multivariate.hpp"
#include "abp/occ_pipeline.hpp"
#include "abp/synthetic_cohort.hpp"
#include "abp/univariate.hpp"

namespace abp {

inline constexpr int kConfigVersion = 1;

struct ThresholdOverride {
  Marker marker = Marker::T_E;
  Sex sex = Sex::male;
  ThresholdEntry entry;
};

struct Mu0Override {
  Sex sex = Sex::male;
  Marker marker = Marker::T_E;
  double log_value = 0.0;
};

struct RunConfig {
  int version = kConfigVersion;
  std::uint64_t seed = 1;

  // simulate
  std::string cohort_preset = "default";  // "default" | "benchmark"
  CohortSpec cohort;

  // input profiles; empty means the cohort written by simulate into --out
  std::string profiles;
  CsvSchema schema;

  // univariate model
  double kappa0 = 1.0;
  double alpha0 = 10.0;
  double beta0 = 1.0;
  std::size_t n_draws = 5000;
  std::size_t burn_in = 1000;
  std::vector<Mu0Override> mu0;  // otherwise the baseline log means

  // multivariate model
  MvPriorSettings prior;
  GibbsConfig gibbs;
  std::size_t mv_replicates = 2000;
  RefitMode refit = RefitMode::conditional;
  /// Extra iterations appended to chains found in --out instead of refitting.
  std::size_t resume_iterations = 0;

  // classification
  std::vector<ClassifierPolicy> policies = default_policy_grid();
  std::vector<double> alpha_grid = default_alpha_grid();
  RatioSource ratio_source = RatioSource::recorded_else_derived;
  std::vector<ThresholdOverride> thresholds;

  // evaluation
  bool report_pre = true;
  bool report_post = true;
  bool svg = true;

  void validate() const;
  [[nodiscard]] UnivariateConfig univariate(const SexMarkerTable& baseline_mu0) const;
  [[nodiscard]] SexMarkerTable mu0_table(const SexMarkerTable& baseline_mu0) const;
  [[nodiscard]] PopulationThresholds threshold_table() const;
};

/// Parses and validates a config; unknown keys and bad values raise
/// ConfigError naming the offending key path (e.g. "gibbs.iterations").
RunConfig parse_config(std::string_view json_text);
RunConfig load_config(const std::string& path);

/// Fully resolved config as stable, sorted JSON text.
std::string dump_config(const RunConfig& config);

/// Hex FNV-1a digest of dump_config(config).
std::string config_hash(const RunConfig& config);

}  // namespace abp
