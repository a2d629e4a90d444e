#pragma once

#include <cstdint>
#include <span>

namespace confsel {

/// Upper tail P(chi2_df > x) for real df > 0.
double chisq_upper_tail(double x, double df);

/// P(sum_i w_i chi2_1 > stat), approximated by the scaled chi-square
/// a * chi2_b that matches the first two moments:
/// a = sum w^2 / sum w, b = (sum w)^2 / sum w^2.
double mixture_pvalue_moment(std::span<const double> weights, double stat);

/// The same tail probability estimated from `draws` samples of the mixture.
double mixture_pvalue_monte_carlo(std::span<const double> weights, double stat, int draws, std::uint64_t seed);

}  // namespace confsel
