#include "abp/hpd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "abp/error.hpp"

namespace abp {
namespace {

// Products like 0.95 * 1000 land a hair above the integer; ceil must not
// round those up to the next count.
constexpr double kCountSlack = 1e-9;

std::size_t ceil_count(double x) {
  return static_cast<std::size_t>(std::max(0.0, std::ceil(x - kCountSlack)));
}

}  // namespace

std::size_t hpd_gap(std::size_t n, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0))
    fail(Errc::InvalidParameter,
         "alpha must lie in (0, 1), got " + std::to_string(alpha));
  if (!(n >= kMinHpdSamples))
    fail(Errc::TooFewSamples,
         "HPD estimation needs at least " + std::to_string(kMinHpdSamples) + " draws, got " +
           std::to_string(n));
  const std::size_t gap = ceil_count((1.0 - alpha) * static_cast<double>(n));
  return std::clamp<std::size_t>(gap, 1, n - 1);
}

Interval hpd_interval(std::span<const double> sorted, double alpha) {
  const std::size_t n = sorted.size();
  const std::size_t gap = hpd_gap(n, alpha);
  std::size_t best = 0;
  double best_width = sorted[gap] - sorted[0];
  for (std::size_t i = 1; i + gap < n; ++i) {
    const double w = sorted[i + gap] - sorted[i];
    if (w < best_width) {
      best_width = w;
      best = i;
    }
  }
  return {sorted[best], sorted[best + gap]};
}

Interval hpd_interval_unsorted(std::vector<double> samples, double alpha) {
  std::sort(samples.begin(), samples.end());
  return hpd_interval(samples, alpha);
}

double density_threshold(std::span<const double> density_values, double alpha) {
  if (!(alpha >= 0.0 && alpha < 1.0))
    fail(Errc::InvalidParameter,
         "alpha must lie in [0, 1), got " + std::to_string(alpha));
  const std::size_t n = density_values.size();
  if (!(n >= kMinHpdSamples))
    fail(Errc::TooFewSamples,
         "density threshold needs at least " + std::to_string(kMinHpdSamples) + " values, got " +
           std::to_string(n));
  std::vector<double> sorted(density_values.begin(), density_values.end());
  const std::size_t rank = ceil_count(alpha * static_cast<double>(n));
  const std::size_t idx = rank == 0 ? 0 : std::min(rank - 1, n - 1);
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(idx), sorted.end());
  return sorted[idx];
}

}  // namespace abp
