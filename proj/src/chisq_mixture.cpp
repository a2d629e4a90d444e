#include "confsel/chisq_mixture.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <random>

namespace confsel {

double chisq_upper_tail(double x, double df) {
  if (x <= 0.0) return 1.0;
  if (!std::isfinite(x)) return 0.0;
  return boost::math::gamma_q(df / 2.0, x / 2.0);
}

double mixture_pvalue_moment(std::span<const double> weights, double stat) {
  double s1 = 0.0, s2 = 0.0;
  for (double w : weights) {
    if (w <= 0.0) continue;
    s1 += w;
    s2 += w * w;
  }
  if (s1 <= 0.0) return 1.0;
  const double scale = s2 / s1;
  const double df = s1 * s1 / s2;
  return std::clamp(chisq_upper_tail(stat / scale, df), 0.0, 1.0);
}

double mixture_pvalue_monte_carlo(std::span<const double> weights, double stat, int draws, std::uint64_t seed) {
  if (draws <= 0) return 1.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  long exceed = 0;
  for (int d = 0; d < draws; ++d) {
    double q = 0.0;
    for (double w : weights) {
      double z = normal(rng);
      if (w > 0.0) q += w * z * z;
    }
    if (q >= stat) ++exceed;
  }
  return static_cast<double>(exceed) / draws;
}

}  // namespace confsel
