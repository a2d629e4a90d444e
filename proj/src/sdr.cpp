#include "confsel/sdr.hpp"

#include "confsel/chisq_mixture.hpp"
#include "confsel/error.hpp"
#include "confsel/io.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace confsel::sdr {

StandardizedDesign standardize(const Eigen::MatrixXd& x, const StandardizeOptions& opts) {
  const auto n = x.rows();
  const auto p = x.cols();
  if (p == 0) throw BackendError("standardize: no covariates");
  if (n <= p)
    throw BackendError("standardize: need more rows than covariates (n = " + std::to_string(n) +
                       ", p = " + std::to_string(p) + ")");

  StandardizedDesign d;
  d.center = x.colwise().mean().transpose();
  Eigen::MatrixXd centered = x.rowwise() - d.center.transpose();
  Eigen::MatrixXd cov = (centered.transpose() * centered) / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw BackendError("standardize: eigen-decomposition failed");
  const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
  const double lmax = lambda(p - 1);
  const double lmin = lambda(0);
  d.condition_number = lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(lmax > 0.0) || !(d.condition_number <= opts.max_condition)) {
    Eigen::VectorXd v = eig.eigenvectors().col(0).cwiseAbs();
    const double vmax = v.maxCoeff();
    std::ostringstream msg;
    msg << "standardize: covariance is singular or near-singular (condition number ";
    if (std::isfinite(d.condition_number)) msg << d.condition_number; else msg << "inf";
    msg << ", cap " << opts.max_condition << "); near-collinear columns:";
    for (Eigen::Index k = 0; k < p; ++k)
      if (v(k) >= 0.3 * vmax) msg << ' ' << (k + 1);
    throw BackendError(msg.str());
  }
  d.whitener = eig.eigenvectors() * lambda.cwiseSqrt().cwiseInverse().asDiagonal() * eig.eigenvectors().transpose();
  d.z = centered * d.whitener;
  return d;
}

int default_slice_count(int n) { return std::max(3, std::min(10, n / 20)); }

namespace {

// Li's sequential chi-square tests: n * sum_{j >= m} lambda_j against
// chi2 with (p - m)(h - m - 1) degrees of freedom.
int select_dimension(const Eigen::VectorXd& ev, int n, int h, double level) {
  const int p = static_cast<int>(ev.size());
  const int cap = std::min(h - 1, p);
  for (int m = 0; m < cap; ++m) {
    double stat = n * ev.tail(p - m).sum();
    double df = static_cast<double>(p - m) * (h - m - 1);
    if (chisq_upper_tail(stat, df) > level) return std::max(1, m);
  }
  return std::max(1, cap);
}

}  // namespace

SirFit sir_fit(const StandardizedDesign& design, const Eigen::VectorXd& response, ResponseKind kind,
               const SirOptions& opts) {
  const auto& z = design.z;
  const int n = static_cast<int>(z.rows());
  const int p = static_cast<int>(z.cols());
  if (response.size() != n) throw BackendError("sir_fit: response length differs from design rows");

  SirFit fit;
  fit.slice_of.assign(static_cast<std::size_t>(n), 0);

  const bool constant = (response.array() == response(0)).all();
  if (constant) {
    fit.degenerate = true;
    fit.slice_count = 1;
    fit.slice_props = Eigen::VectorXd::Ones(1);
    fit.slice_means = Eigen::MatrixXd::Zero(1, p);
    fit.candidate = Eigen::MatrixXd::Zero(p, p);
    fit.eigenvalues = Eigen::VectorXd::Zero(p);
    fit.eigenvectors = Eigen::MatrixXd::Identity(p, p);
    fit.dim = 0;
    return fit;
  }

  int h = 0;
  if (kind == ResponseKind::Binary) {
    h = 2;
    for (int i = 0; i < n; ++i) {
      double v = response(i);
      if (v != 0.0 && v != 1.0) throw BackendError("sir_fit: binary response must be 0/1");
      fit.slice_of[static_cast<std::size_t>(i)] = static_cast<int>(v);
    }
  } else {
    h = opts.slices.value_or(default_slice_count(n));
    if (h < 3) throw BackendError("sir_fit: continuous responses need at least 3 slices");
    if (2 * h > n)
      throw BackendError("sir_fit: " + std::to_string(h) + " slices exceed n/2 for n = " + std::to_string(n));
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return response(a) < response(b); });
    const int base = n / h;
    const int extra = n % h;
    int pos = 0;
    for (int s = 0; s < h; ++s) {
      int size = base + (s < extra ? 1 : 0);
      for (int k = 0; k < size; ++k) fit.slice_of[static_cast<std::size_t>(order[static_cast<std::size_t>(pos++)])] = s;
    }
  }

  fit.slice_count = h;
  fit.slice_props = Eigen::VectorXd::Zero(h);
  fit.slice_means = Eigen::MatrixXd::Zero(h, p);
  for (int i = 0; i < n; ++i) {
    int s = fit.slice_of[static_cast<std::size_t>(i)];
    fit.slice_props(s) += 1.0;
    fit.slice_means.row(s) += z.row(i);
  }
  for (int s = 0; s < h; ++s) {
    if (fit.slice_props(s) < 2.0)
      throw BackendError("sir_fit: slice " + std::to_string(s + 1) + " has fewer than 2 observations");
    fit.slice_means.row(s) /= fit.slice_props(s);
  }
  fit.slice_props /= static_cast<double>(n);

  fit.candidate = fit.slice_means.transpose() * fit.slice_props.asDiagonal() * fit.slice_means;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(fit.candidate);
  fit.eigenvalues = eig.eigenvalues().reverse().cwiseMax(0.0);
  fit.eigenvectors = eig.eigenvectors().rowwise().reverse();

  if (opts.dim_override) {
    int d = *opts.dim_override;
    if (d < 1 || d > std::min(h - 1, p)) throw BackendError("sir_fit: dimension override out of range");
    fit.dim = d;
  } else {
    fit.dim = select_dimension(fit.eigenvalues, n, h, opts.dim_level);
  }
  return fit;
}

Eigen::MatrixXd original_directions(const StandardizedDesign& design, const SirFit& fit) {
  const int d = std::max(fit.dim, 1);
  Eigen::MatrixXd b = design.whitener * fit.eigenvectors.leftCols(d);
  for (int k = 0; k < d; ++k) b.col(k).normalize();
  return b;
}

MchTestResult mch_test(const StandardizedDesign& design, const SirFit& fit, int target, const MchOptions& opts) {
  const auto& z = design.z;
  const int n = static_cast<int>(z.rows());
  const int p = static_cast<int>(z.cols());
  if (target < 0 || target >= p) throw BackendError("mch_test: target index out of range");
  if (static_cast<int>(fit.slice_of.size()) != n || fit.slice_means.cols() != p)
    throw BackendError("mch_test: fit was computed on a different design");

  MchTestResult res;
  res.target = target;
  res.method = opts.method;
  if (fit.degenerate || fit.eigenvalues.maxCoeff() <= 1e-14) {
    res.degenerate = true;
    res.statistic = 0.0;
    res.p_value = 1.0;
    return res;
  }

  // Hypothesis direction in standardized coordinates: W e_j normalized.
  // u = Z h is the standardized residual of X_j on the other covariates.
  Eigen::VectorXd hdir = design.whitener.col(target);
  hdir.normalize();
  const Eigen::VectorXd u = z * hdir;
  const int h = fit.slice_count;
  const Eigen::VectorXd ubar = fit.slice_means * hdir;  // slice means of u
  const Eigen::VectorXd& f = fit.slice_props;

  double stat = 0.0;
  for (int s = 0; s < h; ++s) stat += f(s) * ubar(s) * ubar(s);
  res.statistic = n * stat;

  // Influence terms of sqrt(f_s) * ubar_s, including the first-order effect
  // of estimating the regression of X_j on the rest:
  //   a_is = sqrt(f_s) [ (1{i in s}/f_s - 1) u_i - (xi_s . z_i - ubar_s u_i) u_i ].
  const Eigen::MatrixXd proj = z * fit.slice_means.transpose();  // n x h, xi_s . z_i
  Eigen::MatrixXd a(n, h);
  for (int i = 0; i < n; ++i) {
    const int si = fit.slice_of[static_cast<std::size_t>(i)];
    for (int s = 0; s < h; ++s) {
      double ind = (s == si ? 1.0 / f(s) : 0.0) - 1.0;
      double other = proj(i, s) - ubar(s) * u(i);
      a(i, s) = std::sqrt(f(s)) * (ind * u(i) - other * u(i));
    }
  }
  Eigen::MatrixXd ac = a.rowwise() - a.colwise().mean();
  Eigen::MatrixXd cov = (ac.transpose() * ac) / static_cast<double>(n);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
  Eigen::VectorXd w = eig.eigenvalues().reverse().cwiseMax(0.0);
  res.weights.assign(w.data(), w.data() + w.size());

  if (w.sum() <= 0.0) {
    res.degenerate = true;
    res.p_value = 1.0;
    return res;
  }
  res.p_value = opts.method == NullApprox::MomentMatched
                    ? mixture_pvalue_moment(res.weights, res.statistic)
                    : mixture_pvalue_monte_carlo(res.weights, res.statistic, opts.mc_draws, opts.mc_seed);
  return res;
}

EliminationResult backward_eliminate(const Eigen::VectorXd& response, ResponseKind kind, const Eigen::MatrixXd& x,
                                     std::span<const VariableKind> kinds, const EliminationOptions& opts) {
  if (static_cast<Eigen::Index>(kinds.size()) != x.cols())
    throw BackendError("backward_eliminate: kind metadata does not match covariate count");
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    if (!kinds[k].is_continuous())
      throw BackendError("SDR backend needs continuous covariates; column " + std::to_string(k + 1) + " is " +
                         kinds[k].to_string() + " (use the kernel backend for discrete or mixed data)");
  }
  if (!(opts.alpha > 0.0 && opts.alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");

  std::vector<int> active(static_cast<std::size_t>(x.cols()));
  std::iota(active.begin(), active.end(), 0);
  EliminationResult result;
  int round = 0;
  while (!active.empty()) {
    ++round;
    Eigen::MatrixXd sub(x.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t k = 0; k < active.size(); ++k) sub.col(static_cast<Eigen::Index>(k)) = x.col(active[k]);
    auto design = standardize(sub, opts.standardize);
    auto fit = sir_fit(design, response, kind, opts.sir);

    int worst = -1;
    double worst_p = -1.0;
    for (std::size_t k = 0; k < active.size(); ++k) {
      double pv = mch_test(design, fit, static_cast<int>(k), opts.mch).p_value;
      // >= prefers the later (higher-index) covariate on ties.
      if (pv >= worst_p) {
        worst_p = pv;
        worst = static_cast<int>(k);
      }
    }
    if (worst_p <= opts.alpha) break;
    result.trace.push_back({round, active[static_cast<std::size_t>(worst)], worst_p});
    active.erase(active.begin() + worst);
  }
  result.retained = IndexSet(active);
  return result;
}

std::string trace_csv(const EliminationResult& result) {
  std::string out = "round,removed_index,p_value\n";
  for (const auto& s : result.trace)
    out += std::to_string(s.round) + "," + std::to_string(s.removed + 1) + "," + io::format_double(s.p_value) + "\n";
  return out;
}

}  // namespace confsel::sdr
