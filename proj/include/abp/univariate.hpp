#pragma once

// Conjugate Normal-Gamma model for one athlete x one marker on the log scale.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "abp/hpd.hpp"
#include "abp/markers.hpp"
#include "abp/rng.hpp"

namespace abp {

/// (mu, kappa, alpha, beta): mu | tau ~ N(mu, 1/(kappa tau)), tau ~ Gamma(alpha, rate beta).
struct NormalGammaParams {
  double mu = 0.0;
  double kappa = 1.0;
  double alpha = 10.0;
  double beta = 1.0;

  void validate() const;
  friend bool operator==(const NormalGammaParams&, const NormalGammaParams&) = default;
};

/// Log-scale value per (sex, marker); lookups of absent entries throw.
class SexMarkerTable {
 public:
  void set(Sex sex, Marker marker, double value);
  [[nodiscard]] std::optional<double> find(Sex sex, Marker marker) const;
  [[nodiscard]] double at(Sex sex, Marker marker) const;

 private:
  std::array<std::array<std::optional<double>, kMarkerCount>, 2> values_{};
};

struct UnivariateConfig {
  double kappa0 = 1.0;
  double alpha0 = 10.0;
  double beta0 = 1.0;
  /// Prior means mu0 by sex and marker, normally the baseline log means.
  SexMarkerTable mu0;
  std::size_t n_draws = 5000;
  std::size_t burn_in = 1000;
  double alpha_level = 0.05;

  [[nodiscard]] NormalGammaParams prior(Sex sex, Marker marker) const;
};

struct PosteriorDraw {
  double mu = 0.0;
  double tau = 1.0;
};

NormalGammaParams posterior_update(const NormalGammaParams& prior, std::span<const double> data);

/// iid draws tau ~ Gamma(alpha, beta), mu ~ N(mu, 1/(kappa tau)). The first
/// `burn_in` draws are generated and discarded so the stream position matches
/// a chain of length burn_in + n_draws.
std::vector<PosteriorDraw> sample_posterior(const NormalGammaParams& params, std::size_t n_draws,
                                            Rng& rng, std::size_t burn_in = 0);

/// Monte Carlo predictive density (1/T) sum_t N(y | mu_t, 1/tau_t).
double predictive_density(std::span<const PosteriorDraw> draws, double y);
double predictive_log_density(std::span<const PosteriorDraw> draws, double y);

/// One replicate y ~ N(mu_t, 1/tau_t) per draw, returned sorted ascending.
std::vector<double> predictive_replicates(std::span<const PosteriorDraw> draws, Rng& rng);

inline constexpr std::size_t kMinPredictiveDraws = 1000;

/// HPD interval of the posterior predictive, estimated from replicates.
Interval predictive_hpd(std::span<const PosteriorDraw> draws, double alpha_level, Rng& rng);

/// Sample mean +/- z * sample SD (n - 1 denominator).
Interval zscore_limits(std::span<const double> data, double z);

}  // namespace abp
