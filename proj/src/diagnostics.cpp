#include "abp/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "abp/error.hpp"

namespace abp {

double mean_of(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v;
  return x.empty() ? 0.0 : s / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

double effective_sample_size(std::span<const double> draws) {
  const std::size_t n = draws.size();
  require(n >= 4, Errc::TooFewSamples, "ESS needs at least four draws");
  const double m = mean_of(draws);
  double c0 = 0.0;
  for (double v : draws) c0 += (v - m) * (v - m);
  c0 /= static_cast<double>(n);
  if (!(c0 > 0.0)) return static_cast<double>(n);

  auto autocorr = [&](std::size_t lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (draws[i] - m) * (draws[i + lag] - m);
    return c / (static_cast<double>(n) * c0);
  };

  // Sum consecutive pairs Gamma_k = rho_{2k} + rho_{2k+1} while positive,
  // forcing them to be non-increasing.
  double tau = -1.0;
  double prev_pair = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    double pair = autocorr(2 * k) + autocorr(2 * k + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev_pair);
    tau += 2.0 * pair;
    prev_pair = pair;
  }
  tau = std::max(tau, 1.0 / std::log10(static_cast<double>(n)));
  return static_cast<double>(n) / tau;
}

double split_rhat(std::span<const std::vector<double>> chains) {
  require(!chains.empty(), Errc::TooFewSamples, "R-hat needs at least one chain");
  std::size_t len = chains.front().size();
  for (const auto& c : chains) len = std::min(len, c.size());
  const std::size_t half = len / 2;
  require(half >= 2, Errc::TooFewSamples, "R-hat needs at least four draws per chain");

  std::vector<std::span<const double>> pieces;
  for (const auto& c : chains) {
    pieces.emplace_back(c.data(), half);
    pieces.emplace_back(c.data() + (len - half), half);
  }
  const double m = static_cast<double>(pieces.size());
  const double n = static_cast<double>(half);
  std::vector<double> means;
  double w = 0.0;
  for (auto p : pieces) {
    means.push_back(mean_of(p));
    w += variance_of(p);
  }
  w /= m;
  const double b = n * variance_of(means);
  if (!(w > 0.0)) return b > 0.0 ? std::numeric_limits<double>::infinity() : 1.0;
  const double var_plus = (n - 1.0) / n * w + b / n;
  return std::sqrt(var_plus / w);
}

double split_rhat(std::span<const double> chain) {
  const std::vector<double> one(chain.begin(), chain.end());
  return split_rhat(std::span<const std::vector<double>>(&one, 1));
}

}  // namespace abp
