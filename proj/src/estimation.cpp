#include "confsel/estimation.hpp"

#include "confsel/error.hpp"
#include "confsel/io.hpp"

#include <cmath>
#include <limits>

namespace confsel {

namespace {

double log1pexp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double mean_loglik(const Eigen::MatrixXd& d, const Eigen::VectorXd& y, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = d * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += y(i) * eta(i) - log1pexp(eta(i));
  return ll / static_cast<double>(eta.size());
}

}  // namespace

Eigen::VectorXd PropensityModel::scores(const Eigen::MatrixXd& s) const {
  if (s.cols() != coefficients.size()) throw ValidationError("propensity model: covariate count mismatch");
  Eigen::VectorXd eta = (s * coefficients).array() + intercept;
  return eta.unaryExpr([](double z) { return sigmoid(z); });
}

PropensityModel fit_logistic(const Eigen::VectorXi& t, const Eigen::MatrixXd& s, const LogisticOptions& opts) {
  const Eigen::Index n = t.size();
  if (s.rows() != n) throw ValidationError("fit_logistic: row count mismatch");
  const Eigen::Index d = s.cols() + 1;
  Eigen::MatrixXd design(n, d);
  design.col(0).setOnes();
  design.rightCols(d - 1) = s;
  const Eigen::VectorXd y = t.cast<double>();
  const double n1 = y.sum();
  if (n1 <= 0.0 || n1 >= static_cast<double>(n)) throw ValidationError("fit_logistic: both arms must be non-empty");

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(d);
  beta(0) = std::log(n1 / (static_cast<double>(n) - n1));
  double ll = mean_loglik(design, y, beta);
  PropensityModel model;
  for (int it = 0; it < opts.max_iter; ++it) {
    const Eigen::VectorXd eta = design * beta;
    Eigen::VectorXd p(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = sigmoid(eta(i));
      w(i) = p(i) * (1.0 - p(i));
    }
    const Eigen::VectorXd grad = design.transpose() * (y - p) / static_cast<double>(n);
    model.gradient_norm = grad.cwiseAbs().maxCoeff();
    model.iterations = it;
    if (model.gradient_norm < opts.gradient_tol) break;

    const Eigen::MatrixXd info = design.transpose() * w.asDiagonal() * design / static_cast<double>(n);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.vectorD().minCoeff() <= 1e-14 * std::max(1.0, ldlt.vectorD().maxCoeff()))
      throw BackendError("fit_logistic: singular weighted design (collinear covariates or separation)");
    const Eigen::VectorXd step = ldlt.solve(grad);

    double scale = 1.0;
    Eigen::VectorXd next = beta + step;
    double next_ll = mean_loglik(design, y, next);
    while (!(next_ll >= ll) && scale > 1e-10) {
      scale *= 0.5;
      next = beta + scale * step;
      next_ll = mean_loglik(design, y, next);
    }
    if (!(next_ll >= ll)) break;
    const bool improving = next_ll > ll;
    beta = next;
    ll = next_ll;
    model.iterations = it + 1;
    if (beta.norm() > opts.separation_norm && improving)
      throw BackendError(
          "fit_logistic: coefficients diverge (perfect or quasi-complete separation); "
          "use vector-norm matching instead");
  }
  // A finite maximizer cannot order the arms perfectly; if the final linear
  // predictor does, the iterations stopped on a flat tail.
  const Eigen::VectorXd eta = design * beta;
  double min_treated = std::numeric_limits<double>::infinity();
  double max_control = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (t(i)) min_treated = std::min(min_treated, eta(i));
    else max_control = std::max(max_control, eta(i));
  }
  if (min_treated > max_control)
    throw BackendError(
        "fit_logistic: perfect separation of the arms by the covariates; use vector-norm matching instead");
  model.intercept = beta(0);
  model.coefficients = beta.tail(d - 1);
  return model;
}

MatchAssignment match_nearest(const Eigen::MatrixXd& values, const Eigen::VectorXi& t, MatchDirection direction) {
  const Eigen::Index n = t.size();
  if (values.rows() != n) throw ValidationError("match_nearest: row count mismatch");
  std::vector<int> treated, control;
  for (Eigen::Index i = 0; i < n; ++i) (t(i) == 1 ? treated : control).push_back(static_cast<int>(i));

  MatchAssignment out;
  out.match.assign(static_cast<std::size_t>(n), -1);
  out.distance.assign(static_cast<std::size_t>(n), 0.0);
  out.multiplicity.assign(static_cast<std::size_t>(n), 0);

  auto assign = [&](const std::vector<int>& queries, const std::vector<int>& pool) {
    if (queries.empty()) return;
    if (pool.empty()) throw ValidationError("match_nearest: opposite treatment arm is empty");
    for (int i : queries) {
      double best = std::numeric_limits<double>::infinity();
      int arg = -1;
      for (int j : pool) {
        const double d2 = (values.row(i) - values.row(j)).squaredNorm();
        if (d2 < best) {
          best = d2;
          arg = j;
        }
      }
      if (arg < 0) arg = pool.front();  // every distance was NaN
      out.match[static_cast<std::size_t>(i)] = arg;
      out.distance[static_cast<std::size_t>(i)] = std::sqrt(best);
      ++out.multiplicity[static_cast<std::size_t>(arg)];
    }
  };
  if (direction != MatchDirection::TreatedToControls) assign(treated, control);
  if (direction != MatchDirection::ControlsToTreated) assign(control, treated);
  return out;
}

std::string to_string(Estimand e) {
  switch (e) {
    case Estimand::ATE: return "ate";
    case Estimand::ATT: return "att";
    case Estimand::ATC: return "atc";
  }
  return "ate";
}

std::string to_string(MatchMode m) { return m == MatchMode::VectorNorm ? "norm" : "pscore"; }

Estimand parse_estimand(std::string_view text) {
  if (text == "ate") return Estimand::ATE;
  if (text == "att") return Estimand::ATT;
  if (text == "atc") return Estimand::ATC;
  throw ValidationError("unknown estimand '" + std::string(text) + "'");
}

MatchMode parse_mode(std::string_view text) {
  if (text == "norm") return MatchMode::VectorNorm;
  if (text == "pscore") return MatchMode::PropensityScore;
  throw ValidationError("unknown matching mode '" + std::string(text) + "'");
}

EffectEstimate estimate_effect(const Dataset& ds, const IndexSet& set, Estimand estimand, MatchMode mode,
                               const EstimateOptions& opts) {
  for (int k : set)
    if (k < 0 || k >= ds.p()) throw ValidationError("covariate index " + std::to_string(k + 1) + " out of range");
  Eigen::MatrixXd s = ds.columns_of(set);
  Eigen::MatrixXd values;
  if (mode == MatchMode::VectorNorm) {
    if (set.empty()) throw ValidationError("vector-norm matching needs at least one matching variable");
    values = s;
    if (opts.scale_normalize && ds.n() > 1) {
      for (Eigen::Index k = 0; k < values.cols(); ++k) {
        const double m = values.col(k).mean();
        const double sd = std::sqrt((values.col(k).array() - m).square().sum() / (ds.n() - 1));
        if (sd > 0.0) values.col(k) /= sd;
      }
    }
  } else {
    values = fit_logistic(ds.treatment(), s, opts.logistic).scores(s);
  }

  const auto& t = ds.treatment();
  const auto& y = ds.outcome();
  const MatchDirection dir = estimand == Estimand::ATE   ? MatchDirection::BothArms
                             : estimand == Estimand::ATT ? MatchDirection::ControlsToTreated
                                                         : MatchDirection::TreatedToControls;
  const auto m = match_nearest(values, t, dir);

  double total = 0.0;
  int count = 0;
  for (int i = 0; i < ds.n(); ++i) {
    const int j = m.match[static_cast<std::size_t>(i)];
    if (j < 0) continue;
    total += t(i) == 1 ? y(i) - y(j) : y(j) - y(i);
    ++count;
  }

  EffectEstimate e;
  e.estimand = estimand;
  e.mode = mode;
  e.covariate_set = set;
  e.value = total / count;
  e.n = ds.n();
  e.n_treated = ds.n_treated();
  return e;
}

EffectEstimate estimate_ate(const Dataset& ds, const IndexSet& set, MatchMode mode, const EstimateOptions& opts) {
  return estimate_effect(ds, set, Estimand::ATE, mode, opts);
}
EffectEstimate estimate_att(const Dataset& ds, const IndexSet& set, MatchMode mode, const EstimateOptions& opts) {
  return estimate_effect(ds, set, Estimand::ATT, mode, opts);
}
EffectEstimate estimate_atc(const Dataset& ds, const IndexSet& set, MatchMode mode, const EstimateOptions& opts) {
  return estimate_effect(ds, set, Estimand::ATC, mode, opts);
}

std::string effect_csv_header() { return "estimand,mode,covariate_set,value,n,n_treated\n"; }

std::string effect_csv_row(const EffectEstimate& e, std::span<const Column> columns) {
  std::string names;
  for (int k : e.covariate_set) {
    if (!names.empty()) names += ';';
    names += columns[static_cast<std::size_t>(k)].name;
  }
  return to_string(e.estimand) + "," + to_string(e.mode) + "," + names + "," + io::format_double(e.value) + "," +
         std::to_string(e.n) + "," + std::to_string(e.n_treated) + "\n";
}

}  // namespace confsel
