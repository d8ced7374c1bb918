#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace abp {

inline constexpr std::size_t kMinHpdSamples = 100;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  [[nodiscard]] double width() const noexcept { return hi - lo; }
  /// Closed membership: endpoints count as inside.
  [[nodiscard]] bool contains(double y) const noexcept { return lo <= y && y <= hi; }
};

/// Number of order-statistic steps spanned by the sample HPD window:
/// ceil((1 - alpha) * n), clamped to [1, n - 1]. The window [x_i, x_{i+gap}]
/// therefore holds gap + 1 draws.
std::size_t hpd_gap(std::size_t n, double alpha);

/// Shortest window [x_i, x_{i+gap}] over ascending-sorted draws. Ties resolve
/// to the lowest i.
Interval hpd_interval(std::span<const double> sorted, double alpha);

/// Convenience: copies and sorts first.
Interval hpd_interval_unsorted(std::vector<double> samples, double alpha);

/// Density cut-off gamma for the region {y : p(y) >= gamma}: the
/// ceil(alpha * n)-th smallest density value (the minimum when alpha = 0).
double density_threshold(std::span<const double> density_values, double alpha);

}  // namespace abp
