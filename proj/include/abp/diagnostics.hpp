#pragma once

#include <span>
#include <vector>

namespace abp {

/// Effective sample size of one chain using Geyer's initial monotone
/// sequence estimator on the sample autocorrelations.
double effective_sample_size(std::span<const double> draws);

/// Split-R-hat: each chain is cut in half and the halves are treated as
/// separate chains (Gelman et al., BDA3 form). Returns 1 for constant input.
double split_rhat(std::span<const std::vector<double>> chains);
double split_rhat(std::span<const double> chain);

double mean_of(std::span<const double> x);
double variance_of(std::span<const double> x);  // n - 1 denominator

}  // namespace abp
