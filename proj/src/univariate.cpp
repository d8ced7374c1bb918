#include "abp/univariate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "abp/error.hpp"

namespace abp {

void NormalGammaParams::validate() const {
  require(std::isfinite(mu), Errc::InvalidParameter, "Normal-Gamma mean must be finite");
  require(kappa > 0.0 && alpha > 0.0 && beta > 0.0, Errc::InvalidParameter,
          "Normal-Gamma kappa, alpha and beta must be positive");
}

void SexMarkerTable::set(Sex sex, Marker marker, double value) {
  values_[static_cast<std::size_t>(sex)][index_of(marker)] = value;
}

std::optional<double> SexMarkerTable::find(Sex sex, Marker marker) const {
  return values_[static_cast<std::size_t>(sex)][index_of(marker)];
}

double SexMarkerTable::at(Sex sex, Marker marker) const {
  const auto v = find(sex, marker);
  if (!(v.has_value()))
    fail(Errc::InvalidParameter,
         "no prior mean configured for " + std::string(marker_code(marker)) + " (" +
           std::string(to_string(sex)) + ")");
  return *v;
}

NormalGammaParams UnivariateConfig::prior(Sex sex, Marker marker) const {
  NormalGammaParams p{mu0.at(sex, marker), kappa0, alpha0, beta0};
  p.validate();
  return p;
}

NormalGammaParams posterior_update(const NormalGammaParams& prior, std::span<const double> data) {
  prior.validate();
  if (data.empty()) return prior;
  const double n = static_cast<double>(data.size());
  double mean = 0.0;
  for (double y : data) {
    require(std::isfinite(y), Errc::InvalidParameter, "observations must be finite");
    mean += y;
  }
  mean /= n;
  double scatter = 0.0;
  for (double y : data) scatter += (y - mean) * (y - mean);

  NormalGammaParams post;
  post.kappa = prior.kappa + n;
  post.mu = (prior.kappa * prior.mu + n * mean) / post.kappa;
  post.alpha = prior.alpha + 0.5 * n;
  const double shift = mean - prior.mu;
  post.beta = prior.beta + 0.5 * scatter + prior.kappa * n / (2.0 * post.kappa) * shift * shift;
  return post;
}

std::vector<PosteriorDraw> sample_posterior(const NormalGammaParams& params, std::size_t n_draws,
                                            Rng& rng, std::size_t burn_in) {
  params.validate();
  std::vector<PosteriorDraw> draws;
  draws.reserve(n_draws);
  for (std::size_t t = 0; t < burn_in + n_draws; ++t) {
    const double tau = rng.gamma(params.alpha, params.beta);
    const double mu = params.mu + rng.normal() / std::sqrt(params.kappa * tau);
    if (t >= burn_in) draws.push_back({mu, tau});
  }
  return draws;
}

double predictive_log_density(std::span<const PosteriorDraw> draws, double y) {
  require(!draws.empty(), Errc::TooFewSamples, "predictive density needs at least one draw");
  std::vector<double> terms(draws.size());
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < draws.size(); ++t) {
    const double r = y - draws[t].mu;
    terms[t] = 0.5 * std::log(draws[t].tau / (2.0 * std::numbers::pi)) - 0.5 * draws[t].tau * r * r;
    top = std::max(top, terms[t]);
  }
  double acc = 0.0;
  for (double v : terms) acc += std::exp(v - top);
  return top + std::log(acc / static_cast<double>(draws.size()));
}

double predictive_density(std::span<const PosteriorDraw> draws, double y) {
  return std::exp(predictive_log_density(draws, y));
}

std::vector<double> predictive_replicates(std::span<const PosteriorDraw> draws, Rng& rng) {
  std::vector<double> reps(draws.size());
  for (std::size_t t = 0; t < draws.size(); ++t)
    reps[t] = draws[t].mu + rng.normal() / std::sqrt(draws[t].tau);
  std::sort(reps.begin(), reps.end());
  return reps;
}

Interval predictive_hpd(std::span<const PosteriorDraw> draws, double alpha_level, Rng& rng) {
  if (!(draws.size() >= kMinPredictiveDraws))
    fail(Errc::TooFewSamples,
         "predictive HPD needs at least " + std::to_string(kMinPredictiveDraws) + " draws");
  const auto reps = predictive_replicates(draws, rng);
  return hpd_interval(reps, alpha_level);
}

Interval zscore_limits(std::span<const double> data, double z) {
  require(data.size() >= 2, Errc::TooFewObservations, "Z-score limits need at least two values");
  double mean = 0.0;
  for (double y : data) mean += y;
  mean /= static_cast<double>(data.size());
  double ss = 0.0;
  for (double y : data) ss += (y - mean) * (y - mean);
  const double sd = std::sqrt(ss / static_cast<double>(data.size() - 1));
  return {mean - z * sd, mean + z * sd};
}

}  // namespace abp
