#include "confsel/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace confsel {

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             const NelderMeadOptions& opts) {
  const std::size_t d = x0.size();
  NelderMeadResult res;
  auto eval = [&](const std::vector<double>& x) {
    ++res.evaluations;
    double v = f(x);
    return std::isnan(v) ? std::numeric_limits<double>::infinity() : v;
  };
  if (d == 0) {
    res.value = eval(x0);
    res.x = std::move(x0);
    res.converged = true;
    return res;
  }

  std::vector<std::vector<double>> simplex(d + 1, x0);
  std::vector<double> fv(d + 1);
  for (std::size_t k = 0; k < d; ++k) simplex[k + 1][k] += opts.initial_step;
  for (std::size_t k = 0; k <= d; ++k) fv[k] = eval(simplex[k]);

  std::vector<std::size_t> order(d + 1);
  std::vector<double> centroid(d), xr(d), xe(d), xc(d);
  auto point = [&](double t, const std::vector<double>& worst, std::vector<double>& out) {
    for (std::size_t k = 0; k < d; ++k) out[k] = centroid[k] + t * (centroid[k] - worst[k]);
  };

  while (res.iterations < opts.max_iter) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return fv[a] < fv[b]; });
    const std::size_t best = order.front(), worst = order.back(), second = order[d - 1];
    if (std::isfinite(fv[worst]) && fv[worst] - fv[best] <= opts.rel_tol * std::abs(fv[best]) + opts.abs_tol) {
      res.converged = true;
      break;
    }
    ++res.iterations;

    std::fill(centroid.begin(), centroid.end(), 0.0);
    for (std::size_t v = 0; v <= d; ++v) {
      if (v == worst) continue;
      for (std::size_t k = 0; k < d; ++k) centroid[k] += simplex[v][k];
    }
    for (auto& c : centroid) c /= static_cast<double>(d);

    point(1.0, simplex[worst], xr);
    double fr = eval(xr);
    if (fr < fv[best]) {
      point(2.0, simplex[worst], xe);
      double fe = eval(xe);
      if (fe < fr) {
        simplex[worst] = xe;
        fv[worst] = fe;
      } else {
        simplex[worst] = xr;
        fv[worst] = fr;
      }
      continue;
    }
    if (fr < fv[second]) {
      simplex[worst] = xr;
      fv[worst] = fr;
      continue;
    }
    const bool outside = fr < fv[worst];
    point(outside ? 0.5 : -0.5, simplex[worst], xc);
    double fc = eval(xc);
    if (fc < (outside ? fr : fv[worst])) {
      simplex[worst] = xc;
      fv[worst] = fc;
      continue;
    }
    for (std::size_t v = 0; v <= d; ++v) {
      if (v == best) continue;
      for (std::size_t k = 0; k < d; ++k) simplex[v][k] = simplex[best][k] + 0.5 * (simplex[v][k] - simplex[best][k]);
      fv[v] = eval(simplex[v]);
    }
  }

  std::size_t best = static_cast<std::size_t>(std::min_element(fv.begin(), fv.end()) - fv.begin());
  res.x = simplex[best];
  res.value = fv[best];
  return res;
}

}  // namespace confsel
