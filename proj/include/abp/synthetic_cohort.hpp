#pragma once

// Ground-truth generator for the hierarchical model: reference population,
// longitudinal athletes and labelled doping injections.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "abp/linalg.hpp"
#include "abp/markers.hpp"
#include "abp/profile_io.hpp"
#include "abp/rng.hpp"

namespace abp {

/// True log-scale parameters of the six concentrations for one sex.
/// Ratios are derived from the concentrations and carry their own small
/// measurement noise.
struct TruthParameters {
  Vector mean;   // 6, ordered as kConcentrations
  Matrix cov_b;  // between-athlete covariance (Omega_b^-1)
  Matrix cov_e;  // within-athlete covariance (Omega_e^-1)
};

/// Defaults moment-matched to the reference-population summaries: a lognormal
/// per concentration, split by sex, with variance shared between athletes,
/// a common urine-dilution factor and marker-specific within-athlete noise.
std::array<TruthParameters, 2> default_truth();

/// Mean and covariances of the eleven log markers implied by `truth`.
struct MarkerTruth {
  Vector mean;
  Matrix cov_b;
  Matrix cov_e;
};
MarkerTruth marker_truth(const TruthParameters& truth, std::span<const Marker> markers,
                         double ratio_noise_sd);

/// Log-scale shift of the six concentrations produced by one doping regime.
struct InjectionPattern {
  std::string name;
  std::array<double, kConcentrationCount> shift{};
};

std::vector<InjectionPattern> default_patterns();

struct GroupSpec {
  std::size_t athletes = 0;
  std::size_t total_samples = 0;
  std::size_t injected_samples = 0;
  Label label = Label::normal;
  /// Per-athlete doping intensity, uniform in [delta_min, delta_max]; the
  /// shift applied is intensity * pattern.shift.
  double delta_min = 1.0;
  double delta_max = 1.0;
  std::size_t min_samples = 2;
};

struct CohortSpec {
  GroupSpec normal{100, 1433, 0, Label::normal, 0.0, 0.0, 2};
  GroupSpec atypical{100, 2504, 275, Label::atypical, 0.8, 1.4, 2};
  GroupSpec abnormal{29, 462, 52, Label::abnormal, 1.4, 2.2, 2};
  /// Normal longitudinal athletes used only to fit population models.
  GroupSpec training{60, 840, 0, Label::normal, 0.0, 0.0, 2};
  std::size_t baseline_male = 91;
  std::size_t baseline_female = 73;
  double female_fraction = 0.5;
  std::array<TruthParameters, 2> truth = default_truth();
  std::vector<InjectionPattern> patterns = default_patterns();
  double ratio_noise_sd = 0.02;
  /// Flag simulated T / E / A5 / B5 values below the quantitation limits.
  bool censor_limits = false;
  std::int64_t min_gap_days = 7;
  std::int64_t max_gap_days = 120;

  /// Smaller cohort used by the repeated-seed benchmark.
  static CohortSpec benchmark();
  void validate() const;
};

struct InjectionRecord {
  std::string athlete_id;
  std::size_t sample_index = 0;
  std::int64_t timestamp = 0;
  std::string pattern;
  double intensity = 0.0;
};

struct SimulatedCohort {
  ProfileCollection profiles;
  std::vector<InjectionRecord> injections;
};

SimulatedCohort simulate_cohort(const CohortSpec& spec, Rng& rng);

/// Plain hierarchical draw: athlete j gets mu + b_j, b_j ~ N(0, cov_b), then
/// counts[j] samples with N(0, cov_e) noise. Returns one n_j x K block each.
std::vector<Matrix> simulate_hierarchical(const Vector& mu, const Matrix& cov_b, const Matrix& cov_e,
                                          std::span<const std::size_t> counts, Rng& rng);

/// Splits `total` into `parts` counts of at least `min_each`, randomly.
std::vector<std::size_t> allocate_counts(std::size_t total, std::size_t parts, std::size_t min_each,
                                         Rng& rng);

struct BaselineMoments {
  std::vector<Marker> markers;
  std::array<Vector, 2> mean;  // by sex
  std::array<Matrix, 2> cov;   // n - 1 denominator
  std::array<std::size_t, 2> count{};
};

/// Log-scale means and covariances of the baseline cohort per sex.
BaselineMoments estimate_baseline_moments(const ProfileCollection& profiles,
                                          std::span<const Marker> markers,
                                          RatioSource ratios = RatioSource::recorded_else_derived);

void write_truth_csv(std::ostream& out, const SimulatedCohort& cohort);

}  // namespace abp
