#pragma once

#include <functional>
#include <span>
#include <vector>

namespace confsel {

struct NelderMeadOptions {
  double initial_step = 1.0;
  /// Stop once (f_worst - f_best) <= rel_tol * |f_best| across the simplex.
  double rel_tol = 1e-4;
  double abs_tol = 1e-14;
  int max_iter = 500;
};

struct NelderMeadResult {
  std::vector<double> x;
  double value = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
};

/// Unconstrained derivative-free simplex minimization. Never returns a
/// point worse than the start.
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)>& f, std::vector<double> x0,
                             const NelderMeadOptions& opts = {});

}  // namespace confsel
