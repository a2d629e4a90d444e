#include "confsel/chisq_mixture.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace confsel;

TEST_CASE("chi-square upper tail reference values") {
  CHECK(chisq_upper_tail(3.841458820694124, 1.0) == doctest::Approx(0.05).epsilon(1e-10));
  CHECK(chisq_upper_tail(4.605170185988091, 2.0) == doctest::Approx(0.1).epsilon(1e-10));
  for (double x : {0.1, 1.0, 7.5}) CHECK(chisq_upper_tail(x, 2.0) == doctest::Approx(std::exp(-x / 2.0)));
  CHECK(chisq_upper_tail(0.0, 3.0) == 1.0);
}

TEST_CASE("moment matching is exact for equal weights") {
  const std::vector<double> w(4, 2.5);
  for (double stat : {1.0, 10.0, 25.0})
    CHECK(mixture_pvalue_moment(w, stat) == doctest::Approx(chisq_upper_tail(stat / 2.5, 4.0)).epsilon(1e-12));
}

TEST_CASE("zero weights are ignored") {
  const std::vector<double> w{1.0, 0.0, 1.0};
  CHECK(mixture_pvalue_moment(w, 3.0) == doctest::Approx(chisq_upper_tail(3.0, 2.0)));
}

TEST_CASE("moment matching agrees with the sampled mixture") {
  const std::vector<double> w{3.0, 1.0, 0.5, 0.25};
  for (double stat : {2.0, 6.0, 12.0}) {
    const double approx = mixture_pvalue_moment(w, stat);
    const double mc = mixture_pvalue_monte_carlo(w, stat, 200000, 7);
    // Two-moment matching is off by up to about 0.03 for weights this uneven.
    CHECK(std::abs(approx - mc) < 0.035);
  }
}

TEST_CASE("monte carlo p-value is reproducible for a seed") {
  const std::vector<double> w{1.0, 2.0};
  CHECK(mixture_pvalue_monte_carlo(w, 3.0, 10000, 1) == mixture_pvalue_monte_carlo(w, 3.0, 10000, 1));
}
