#pragma once

// Hierarchical Gaussian / Wishart model on log-marker vectors:
//   y_ij = mu_j + e_ij,  e_ij ~ N(0, Omega_e^-1)
//   mu_j ~ N(mu, Omega_b^-1),  mu ~ N(mu0, Omega_mu^-1)
// with Wishart priors on the three precisions, fit by Gibbs sampling.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "abp/hpd.hpp"
#include "abp/linalg.hpp"
#include "abp/markers.hpp"
#include "abp/rng.hpp"

namespace abp {

struct MvPriorConfig {
  Vector mu0;
  SpdMatrix scale_e;
  SpdMatrix scale_mu;
  SpdMatrix scale_b;
  double df_e;
  double df_mu;
  double df_b;

  /// S_mu = I/1000 (vague prior on the grand mean); S_e = S_b = 1000 I so
  /// the precision-side prior term added to the scatter is only I/1000.
  /// df = K for all three.
  static MvPriorConfig defaults(const Vector& mu0);
  /// Every scale equal to `scale` * I and every df equal to `df`.
  static MvPriorConfig uniform(const Vector& mu0, double scale, double df);

  [[nodiscard]] Eigen::Index dim() const noexcept { return mu0.size(); }
  void validate() const;
};

struct GibbsConfig {
  std::size_t iterations = 3000;
  double burn_in_fraction = 1.0 / 3.0;
  std::size_t thinning = 1;
  std::uint64_t seed = 0;
  /// Keep per-athlete means in every retained state (needed to evaluate the
  /// predictive of athletes that are part of the fit).
  bool keep_athlete_means = true;

  [[nodiscard]] std::size_t burn_in() const;
  [[nodiscard]] std::size_t retained() const;
  void validate() const;
};

/// Observations grouped by athlete, each block n_j x K on the log scale.
class MvData {
 public:
  explicit MvData(std::vector<Matrix> blocks, std::vector<std::string> ids = {});

  [[nodiscard]] Eigen::Index dim() const noexcept { return k_; }
  [[nodiscard]] std::size_t athletes() const noexcept { return blocks_.size(); }
  [[nodiscard]] std::size_t total() const noexcept { return total_; }
  [[nodiscard]] const Matrix& block(std::size_t j) const { return blocks_.at(j); }
  [[nodiscard]] std::size_t count(std::size_t j) const { return static_cast<std::size_t>(blocks_.at(j).rows()); }
  [[nodiscard]] const Vector& sum(std::size_t j) const { return sums_.at(j); }
  [[nodiscard]] Vector mean(std::size_t j) const { return sums_.at(j) / static_cast<double>(count(j)); }
  /// Centred within-athlete scatter sum_i (y_ij - ybar_j)(y_ij - ybar_j)^T.
  [[nodiscard]] const Matrix& scatter(std::size_t j) const { return scatters_.at(j); }
  [[nodiscard]] const std::vector<std::string>& ids() const noexcept { return ids_; }
  [[nodiscard]] std::optional<std::size_t> find(const std::string& id) const;

 private:
  std::vector<Matrix> blocks_;
  std::vector<Vector> sums_;
  std::vector<Matrix> scatters_;
  std::vector<std::string> ids_;
  Eigen::Index k_ = 0;
  std::size_t total_ = 0;
};

struct MvModelState {
  Vector mu;
  Matrix mu_j;  // J x K, empty when athlete means were not retained
  SpdMatrix omega_e;
  SpdMatrix omega_mu;
  SpdMatrix omega_b;

  [[nodiscard]] Eigen::Index dim() const noexcept { return mu.size(); }
  [[nodiscard]] bool has_athlete_means() const noexcept { return mu_j.rows() > 0; }
};

struct ScalarDiagnostic {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double ess = 0.0;
  double split_rhat = 1.0;
};

struct MvChain {
  std::vector<MvModelState> states;
  GibbsConfig config;
  std::vector<ScalarDiagnostic> diagnostics;
  /// Full state after the final iteration plus the generator state, so the
  /// chain can be extended exactly where it stopped.
  std::optional<MvModelState> last_state;
  std::string rng_state;
  std::size_t iterations_done = 0;
  std::vector<Marker> markers;
  std::vector<std::string> athlete_ids;

  [[nodiscard]] std::size_t size() const noexcept { return states.size(); }
  [[nodiscard]] Eigen::Index dim() const;
  [[nodiscard]] Vector posterior_mean_mu() const;
  [[nodiscard]] Matrix posterior_mean_mu_j() const;
};

MvModelState gibbs_init(const MvData& data, const MvPriorConfig& prior, Rng& rng);
MvModelState gibbs_step(const MvModelState& state, const MvData& data, const MvPriorConfig& prior,
                        Rng& rng);

/// Runs config.iterations steps from gibbs_init (or from `start` when given).
MvChain run_gibbs(const MvData& data, const MvPriorConfig& prior, const GibbsConfig& config,
                  Rng& rng, const MvModelState* start = nullptr);

/// Continues a chain for `extra_iterations` more steps from its last state and
/// stored generator state; all new states (after thinning) are retained.
MvChain extend_chain(const MvChain& chain, const MvData& data, const MvPriorConfig& prior,
                     std::size_t extra_iterations);

std::vector<ScalarDiagnostic> chain_diagnostics(const std::vector<MvModelState>& states);

void write_chain(std::ostream& out, const MvChain& chain);
MvChain read_chain(std::istream& in);

/// Per-state athlete means and the matching Omega_e, the minimal ingredients
/// of the Monte Carlo predictive density.
struct PredictiveSet {
  std::vector<Vector> means;
  std::vector<SpdMatrix> omega_e;

  [[nodiscard]] std::size_t size() const noexcept { return means.size(); }
  [[nodiscard]] Eigen::Index dim() const;
};

/// Predictive set of athlete j taken straight from the chain's states.
PredictiveSet athlete_predictive(const MvChain& chain, std::size_t athlete_index);

/// Mixture density of a predictive set with the per-state factors and
/// normalising constants laid out once, for repeated evaluation.
class PredictiveDensity {
 public:
  explicit PredictiveDensity(const PredictiveSet& set);
  /// log of (1/T) sum_t N(y | mean_t, Omega_e,t^-1).
  [[nodiscard]] double log_density(const Vector& y) const;
  [[nodiscard]] Eigen::Index dim() const noexcept { return k_; }

 private:
  std::vector<double> means_;    // T x K, row-major
  std::vector<double> factors_;  // per state the lower Cholesky factor of Omega_e, column-major
  std::vector<double> log_norm_;
  Eigen::Index k_ = 0;
};

/// log of (1/T) sum_t N(y | mu_j^(t), Omega_e^(t)^-1).
double predictive_log_density_mv(const PredictiveSet& set, const Vector& y);
double predictive_density_mv(const MvChain& chain, std::size_t athlete_index, const Vector& y);

/// n_rep x K matrix; replicate i uses state i mod T.
Matrix predictive_replicates(const PredictiveSet& set, std::size_t n_rep, Rng& rng);
Matrix predictive_replicates(const MvChain& chain, std::size_t athlete_index, std::size_t n_rep,
                             Rng& rng);

inline constexpr std::size_t kMinReplicates = 1000;

std::vector<Interval> marginal_hpds(const Matrix& replicates, double alpha_level);

struct JointRegion {
  double log_gamma = 0.0;
  std::function<double(const Vector&)> log_density;

  [[nodiscard]] bool contains(const Vector& y) const { return log_density(y) >= log_gamma; }
};

JointRegion joint_hpd_region(const PredictiveSet& set, const Matrix& replicates, double alpha_level);
JointRegion joint_hpd_region(const MvChain& chain, std::size_t athlete_index,
                             const Matrix& replicates, double alpha_level);

/// Predictive engine for an athlete who is not part of the population fit.
///
/// For each retained population state, mu_new is drawn from its exact full
/// conditional N(A'^-1 b', A'^-1) given the athlete's history (A' = Omega_b +
/// n Omega_e, b' = Omega_b mu + Omega_e sum y). Omega_e and Omega_b are
/// simultaneously diagonalised once per state, so each draw costs O(K^2)
/// regardless of n.
class ConditionalPredictive {
 public:
  explicit ConditionalPredictive(const MvChain& population);

  [[nodiscard]] Eigen::Index dim() const noexcept { return k_; }
  [[nodiscard]] std::size_t size() const noexcept { return cache_.size(); }

  /// history: n x K (n may be zero, giving the population predictive).
  [[nodiscard]] PredictiveSet draw(const Matrix& history, Rng& rng) const;

 private:
  struct StateCache {
    Matrix g;       // L^-T Q
    Matrix h;       // Q^T L^T
    Vector lambda;  // eigenvalues of L^-1 Omega_b L^-T
    Vector c;       // h * mu
  };
  std::vector<StateCache> cache_;
  std::vector<SpdMatrix> omega_e_;
  Eigen::Index k_ = 0;
};

/// Population data plus the athlete history as an extra group, refit from a
/// warm start (posterior means of the previous chain); returns the new
/// athlete's predictive set.
PredictiveSet refit_with_athlete(const MvData& population, const Matrix& history,
                                 const MvPriorConfig& prior, const GibbsConfig& config,
                                 const MvChain* warm_start, Rng& rng);

}  // namespace abp
