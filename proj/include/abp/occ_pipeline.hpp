#pragma once

// One-class classification of longitudinal profiles: population thresholds for
// the first sample, adaptive HPD limits afterwards, flagged samples excluded
// from later training sets.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "abp/hpd.hpp"
#include "abp/markers.hpp"
#include "abp/multivariate.hpp"
#include "abp/profile_io.hpp"
#include "abp/rng.hpp"
#include "abp/univariate.hpp"

namespace abp {

enum class ThresholdSource { wada_td, population_max, q3_fallback, user };

std::string_view to_string(ThresholdSource s) noexcept;

struct ThresholdEntry {
  double upper = 0.0;
  std::optional<double> lower;
  ThresholdSource source = ThresholdSource::user;
};

/// Raw-scale starting limits per (marker, sex).
class PopulationThresholds {
 public:
  /// WADA technical-document limits where they exist, the maximum of the
  /// reference population for B5, and Q3-based values for A5/B5, A5/E, A/T.
  static PopulationThresholds defaults();

  void set(Marker marker, Sex sex, ThresholdEntry entry);
  [[nodiscard]] const ThresholdEntry* find(Marker marker, Sex sex) const;
  [[nodiscard]] const ThresholdEntry& at(Marker marker, Sex sex) const;

 private:
  std::array<std::array<std::optional<ThresholdEntry>, 2>, kMarkerCount> table_{};
};

enum class ModelKind { univariate, multivariate };
enum class DecisionRule { marginal, joint };
enum class Flag { normal, suspicious };
enum class RuleFired { population_threshold, marginal_hpd, joint_region };
enum class BinaryLabel { normal, non_normal };

std::string_view to_string(Flag f) noexcept;
std::string_view to_string(RuleFired r) noexcept;
std::string_view to_string(BinaryLabel b) noexcept;

struct ClassifierPolicy {
  ModelKind model = ModelKind::univariate;
  std::vector<Marker> markers;
  DecisionRule rule = DecisionRule::marginal;
  double alpha_level = 0.05;
  bool exclude_flagged = true;

  /// "uv:T_E", "mv:ratios", "mv:all:joint", "uv:T+E".
  [[nodiscard]] std::string name() const;
  static ClassifierPolicy parse(std::string_view text);
  void validate() const;
};

/// Univariate single-marker policies for all eleven markers, then the three
/// multivariate subsets: the grid reported by the evaluation step.
std::vector<ClassifierPolicy> default_policy_grid();

/// Ascending alpha grid used to turn interval membership into a score.
std::vector<double> default_alpha_grid();

struct HpdDecision {
  std::string athlete_id;
  std::int64_t timestamp = 0;
  std::size_t sample_index = 0;
  std::string policy;
  std::vector<Marker> markers;
  std::vector<Interval> intervals;  // log scale; open sides are +/-inf
  std::vector<bool> inside;
  std::optional<bool> joint_member;
  std::optional<double> joint_log_density;
  std::optional<double> log_gamma;
  Flag flag = Flag::normal;
  RuleFired rule = RuleFired::population_threshold;
  /// 1 - (largest grid alpha at which the sample is still accepted); 1 when
  /// rejected on the whole grid. Threshold decisions score 0 or 1.
  double score = 0.0;
  std::size_t training_size = 0;
  std::optional<Label> label;

  [[nodiscard]] bool suspicious() const noexcept { return flag == Flag::suspicious; }
};

/// n = 0 rule: suspicious iff any raw value is above its upper limit or below
/// a defined lower limit.
HpdDecision threshold_check(std::span<const Marker> markers, std::span<const double> raw_values,
                            Sex sex, const PopulationThresholds& thresholds);
HpdDecision threshold_check(const RawSample& sample, std::span<const Marker> markers,
                            const PopulationThresholds& thresholds,
                            RatioSource ratios = RatioSource::recorded_else_derived);

/// Fitted population chain for one sex and marker list, plus the engine that
/// turns it into a predictive for a monitored athlete.
struct MvPopulationModel {
  Sex sex = Sex::male;
  std::vector<Marker> markers;
  std::shared_ptr<const MvChain> chain;
  std::shared_ptr<const ConditionalPredictive> engine;
  /// Kept only for the full-refit mode.
  std::shared_ptr<const MvData> data;
  std::optional<MvPriorConfig> prior;
};

enum class RefitMode {
  conditional,  // draw the athlete mean from its full conditional per population state
  full,         // rerun the Gibbs sampler with the athlete added, warm-started
};

struct SequenceModels {
  UnivariateConfig univariate;
  PopulationThresholds thresholds = PopulationThresholds::defaults();
  RatioSource ratio_source = RatioSource::recorded_else_derived;
  std::vector<double> alpha_grid = default_alpha_grid();
  std::size_t mv_replicates = 2000;
  RefitMode refit = RefitMode::conditional;
  GibbsConfig gibbs;
  std::vector<MvPopulationModel> multivariate;

  [[nodiscard]] const MvPopulationModel& population(Sex sex, std::span<const Marker> markers) const;
};

/// Reference samples (baseline cohort, plus normal-labelled samples of the
/// training cohort) as per-athlete log-scale blocks for one sex.
MvData population_data(const ProfileCollection& profiles, Sex sex, std::span<const Marker> markers,
                       RatioSource ratios, bool include_training = true);

/// Log-scale means of the reference samples per sex and marker (prior mu0).
SexMarkerTable baseline_log_means(const ProfileCollection& profiles, RatioSource ratios,
                                  bool include_training = true);

/// Isotropic Wishart prior scales (scale * I); df defaults to K.
struct MvPriorSettings {
  double scale_e = 1000.0;
  double scale_mu = 1.0 / 1000.0;
  double scale_b = 1000.0;
  std::optional<double> df;

  [[nodiscard]] MvPriorConfig build(const Vector& mu0) const;
};

MvPriorConfig population_prior(Sex sex, std::span<const Marker> markers, const SexMarkerTable& mu0,
                               const MvPriorSettings& settings = {});

MvPopulationModel fit_population_model(const ProfileCollection& profiles, Sex sex,
                                       std::span<const Marker> markers, const SexMarkerTable& mu0,
                                       const GibbsConfig& gibbs, RatioSource ratios, Rng& rng,
                                       bool keep_data = false, const MvPriorSettings& settings = {});

/// Wraps an already fitted (e.g. deserialized) chain.
MvPopulationModel population_model(std::shared_ptr<const MvChain> chain, Sex sex);

std::vector<HpdDecision> classify_sequence(const Athlete& athlete, const ClassifierPolicy& policy,
                                           const SequenceModels& models, Rng& rng);

/// Classifies every monitored athlete; athlete a uses stream
/// Rng(seed, stable_hash(policy name + '/' + athlete id)). Output order is
/// athlete order, then sample order, independent of `threads`.
std::vector<HpdDecision> classify_cohort(const ProfileCollection& profiles,
                                         const ClassifierPolicy& policy,
                                         const SequenceModels& models, std::uint64_t seed,
                                         unsigned threads = 1);

BinaryLabel binarize_label(std::optional<Label> label);

struct OversampleResult {
  /// Provenance: row i of the balanced set is input row indices[i]. The first
  /// n entries are the input rows in order; replicates follow.
  std::vector<std::size_t> indices;
  std::size_t replicated = 0;
};

/// Replicates minority-class rows (with replacement) until the classes tie.
OversampleResult random_oversample(std::span<const BinaryLabel> labels, Rng& rng);

/// One row per decision with wide per-marker limit columns.
void write_decisions_csv(std::ostream& out, std::span<const HpdDecision> decisions);
std::vector<HpdDecision> read_decisions_csv(std::istream& in);

}  // namespace abp
