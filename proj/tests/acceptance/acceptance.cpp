// Acceptance checks. Prints one [PASS]/[FAIL] line per criterion and exits
// non-zero if any criterion fails. Optional arguments restrict the run to
// the listed criterion numbers.

#include "confsel/estimation.hpp"
#include "confsel/kernel.hpp"
#include "confsel/sdr.hpp"
#include "confsel/simulation.hpp"

#include "../support/oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>

using namespace confsel;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) pass = false;
    detail << (detail.tellp() > 0 ? "; " : "") << what << (ok ? "" : " [x]");
  }
};

std::string fmt(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

bool within(double v, double centre, double tol) { return std::abs(v - centre) <= tol; }

int jobs() {
  if (const char* env = std::getenv("CONFSEL_JOBS")) return std::max(1, std::atoi(env));
  return std::max(1u, std::thread::hardware_concurrency());
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

sim::SimulationReport run_scenario(sim::CovariateSetup setup, int replications, double* wall) {
  sim::ScenarioConfig c;
  c.setup = setup;
  c.outcome = sim::OutcomeModel::Linear;
  c.n = 500;
  c.replications = replications;
  const auto start = std::chrono::steady_clock::now();
  auto r = sim::run_study(c, jobs());
  *wall = seconds_since(start);
  return r;
}

// Continuous/linear study shared by criteria 2, 4 and 5.
const sim::SimulationReport& continuous_study(double* wall) {
  static double seconds = 0.0;
  static const auto report = run_scenario(sim::CovariateSetup::Continuous, 500, &seconds);
  *wall = seconds;
  return report;
}

enum Key { XT, Q0, Q1, X0, X1, Z0, Z1 };
enum Set { FullX, SetXT, SetQ, SetXY, SetZ };

Outcome criterion1() {
  Outcome o;
  for (auto setup : {sim::CovariateSetup::Continuous, sim::CovariateSetup::Discrete, sim::CovariateSetup::Mixed}) {
    Rng rng(derive_seed(kDefaultSeed, "prevalence/" + sim::to_string(setup)));
    auto x = sim::gen_covariates(setup, 100000, rng);
    const double share = sim::gen_treatment(x, setup, rng).cast<double>().mean();
    o.require(within(share, 0.5, 0.01), sim::to_string(setup) + " treated share " + fmt(share, 4));
  }
  return o;
}

Outcome criterion2() {
  Outcome o;
  double wall = 0.0;
  const auto& r = continuous_study(&wall);
  double min_suff = 100.0;
  for (double s : r.sufficient) min_suff = std::min(min_suff, s);
  o.require(min_suff >= 99.0, "min sufficiency " + fmt(min_suff, 1) + "% (>= 99)");
  o.require(r.includes[XT] >= 99.0, "X_T inclusion " + fmt(r.includes[XT], 1) + "% (>= 99)");
  o.require(within(r.includes[Q0], 93.6, 6.0), "Q_0 inclusion " + fmt(r.includes[Q0], 1) + "% (93.6 +- 6)");
  o.require(within(r.includes[Z0], 77.2, 7.0), "Z_0 inclusion " + fmt(r.includes[Z0], 1) + "% (77.2 +- 7)");
  o.require(within(r.equals[XT], 55.6, 8.0), "X_T equality " + fmt(r.equals[XT], 1) + "% (55.6 +- 8)");
  o.detail << "; " << r.completed << " replications, " << fmt(wall, 1) << " s";
  return o;
}

Outcome criterion3() {
  Outcome o;
  double wall = 0.0;
  const auto r = run_scenario(sim::CovariateSetup::Discrete, 200, &wall);
  double min_suff = 100.0;
  for (double s : r.sufficient) min_suff = std::min(min_suff, s);
  o.require(min_suff >= 97.0, "min sufficiency " + fmt(min_suff, 1) + "% (>= 97)");
  o.require(within(r.includes[Q0], 86.3, 8.0), "Q_0 inclusion " + fmt(r.includes[Q0], 1) + "% (86.3 +- 8)");
  o.require(r.includes[X0] >= 98.0, "X_0 inclusion " + fmt(r.includes[X0], 1) + "% (>= 98)");
  o.require(r.includes[X1] >= 98.0, "X_1 inclusion " + fmt(r.includes[X1], 1) + "% (>= 98)");
  o.detail << "; " << r.completed << " replications, " << fmt(wall, 1) << " s";
  return o;
}

Outcome criterion4() {
  Outcome o;
  double wall = 0.0;
  const auto& r = continuous_study(&wall);
  const auto& e = r.estimation;
  o.require(within(e[FullX].norm.bias, 1.342, 0.20), "norm X bias " + fmt(e[FullX].norm.bias) + " (1.342 +- 0.20)");
  o.require(within(e[FullX].norm.mse, 1.865, 0.35), "norm X MSE " + fmt(e[FullX].norm.mse) + " (1.865 +- 0.35)");
  o.require(within(e[SetZ].norm.mse, 0.631, 0.20), "norm Z MSE " + fmt(e[SetZ].norm.mse) + " (0.631 +- 0.20)");
  o.require(std::abs(e[SetXY].pscore.bias) <= 0.20, "pscore X_Y |bias| " + fmt(std::abs(e[SetXY].pscore.bias)) +
                                                        " (<= 0.20)");
  o.require(within(e[SetXY].pscore.mse, 0.190, 0.10), "pscore X_Y MSE " + fmt(e[SetXY].pscore.mse) +
                                                          " (0.190 +- 0.10)");
  const double expected[4] = {5, 5, 7, 4};
  const Set sets[4] = {SetXT, SetQ, SetXY, SetZ};
  std::string got;
  bool exact = true;
  for (int k = 0; k < 4; ++k) {
    const double m = e[sets[k]].median_cardinality;
    got += (k ? "," : "") + fmt(m, 1);
    exact = exact && m == expected[k];
  }
  o.require(exact, "median cardinalities (" + got + ") (5,5,7,4)");
  return o;
}

Outcome criterion5() {
  Outcome o;
  double wall = 0.0;
  const auto& e = continuous_study(&wall).estimation;
  o.require(e[FullX].norm.mse > e[SetZ].norm.mse,
            "norm MSE X " + fmt(e[FullX].norm.mse) + " > Z " + fmt(e[SetZ].norm.mse));
  o.require(e[SetXT].pscore.mse > e[SetXY].pscore.mse,
            "pscore MSE X_T " + fmt(e[SetXT].pscore.mse) + " > X_Y " + fmt(e[SetXY].pscore.mse));
  return o;
}

// Five independent standard normals; the response depends on the first two
// only, and the test targets the fifth.
Outcome criterion6() {
  Outcome o;
  const int reps = 500, n = 500;
  int rejected = 0;
  for (int r = 0; r < reps; ++r) {
    Rng rng(derive_seed(kDefaultSeed, "calibration/" + std::to_string(r)));
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd x(n, 5);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i) {
      for (int k = 0; k < 5; ++k) x(i, k) = normal(rng);
      y(i) = x(i, 0) + 0.5 * x(i, 1) + normal(rng);
    }
    auto design = sdr::standardize(x);
    auto fit = sdr::sir_fit(design, y, ResponseKind::Continuous);
    rejected += sdr::mch_test(design, fit, 4).p_value <= 0.10;
  }
  const double rate = rejected / static_cast<double>(reps);
  o.require(rate >= 0.06 && rate <= 0.14, "rejection rate " + fmt(rate) + " in [0.06, 0.14]");
  return o;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b))); }

Outcome criterion7() {
  Outcome o;
  std::mt19937_64 rng(derive_seed(kDefaultSeed, "oracles"));
  double worst_regress = 0.0, worst_cv = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 5 + static_cast<int>(rng() % 26);
    auto m = oracle::random_mixed(rng, n, trial % 2 == 0);
    const auto meta = kernel::make_meta(m.x, m.kinds);
    for (int i = 0; i < n; ++i) {
      std::vector<double> row(static_cast<std::size_t>(m.x.cols()));
      for (Eigen::Index k = 0; k < m.x.cols(); ++k) row[static_cast<std::size_t>(k)] = m.x(i, k);
      const double got = kernel::kernel_regress(m.u, m.x, {m.bw}, meta, row);
      worst_regress = std::max(worst_regress, rel_err(got, oracle::regress(m, row.data())));
    }
    worst_cv = std::max(worst_cv, rel_err(kernel::loo_cv(m.u, m.x, {m.bw}, meta), oracle::loo_cv(m)));
  }
  o.require(worst_regress <= 1e-12, "kernel_regress max rel err " + fmt(worst_regress, 16));
  o.require(worst_cv <= 1e-12, "loo_cv max rel err " + fmt(worst_cv, 16));

  int mismatched = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 10 + static_cast<int>(rng() % 60);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd v(n, 1 + trial % 4);
    for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = normal(rng);
    if (trial % 3 == 0) v = v.array().round();
    Eigen::VectorXi t(n);
    for (int i = 0; i < n; ++i) t(i) = i % 2;
    std::shuffle(t.data(), t.data() + n, rng);
    if (match_nearest(v, t, MatchDirection::BothArms).match != oracle::match_all(v, t)) ++mismatched;
  }
  o.require(mismatched == 0, "match_nearest mismatches " + std::to_string(mismatched) + "/50");

  double worst_logit = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int n = 200;
    Eigen::MatrixXd s(n, 2);
    Eigen::VectorXi t(n);
    for (int i = 0; i < n; ++i) {
      s(i, 0) = normal(rng);
      s(i, 1) = normal(rng);
      t(i) = unif(rng) < 1.0 / (1.0 + std::exp(-(0.3 + s(i, 0) - 0.5 * s(i, 1))));
    }
    auto fit = fit_logistic(t, s);
    auto grid = oracle::logistic_grid(t, s);
    worst_logit = std::max({worst_logit, std::abs(fit.intercept - grid[0]), std::abs(fit.coefficients(0) - grid[1]),
                            std::abs(fit.coefficients(1) - grid[2])});
  }
  o.require(worst_logit <= 1e-4, "fit_logistic vs grid max abs err " + fmt(worst_logit, 8));
  return o;
}

Outcome criterion8() {
  Outcome o;
  Eigen::MatrixXd x(4, 1);
  x << 0, 1, 0, 1;
  Eigen::VectorXi t(4);
  t << 1, 1, 0, 0;
  Eigen::VectorXd y(4);
  y << 5, 7, 1, 2;
  Dataset ds({{"x", VariableKind::continuous()}}, x, t, y);
  const double ate = estimate_ate(ds, IndexSet{0}, MatchMode::VectorNorm).value;
  const double att = estimate_att(ds, IndexSet{0}, MatchMode::VectorNorm).value;
  o.require(ate == 4.5 && att == 4.5, "4-unit ATE " + fmt(ate, 6) + ", ATT " + fmt(att, 6));

  Eigen::VectorXi t3 = Eigen::VectorXi::Zero(10);
  t3.head(3).setOnes();
  const double icpt = fit_logistic(t3, Eigen::MatrixXd(10, 0)).intercept;
  const double err = std::abs(icpt - std::log(0.3 / 0.7));
  o.require(err <= 1e-10, "intercept-only logit error " + fmt(err, 14));

  Rng rng(derive_seed(kDefaultSeed, "binary-correlation"));
  auto xb = sim::gen_covariates(sim::CovariateSetup::Discrete, 1000000, rng);
  const Eigen::VectorXd a = xb.col(6).array() - xb.col(6).mean();
  const Eigen::VectorXd b = xb.col(7).array() - xb.col(7).mean();
  const double corr = a.dot(b) / std::sqrt(a.squaredNorm() * b.squaredNorm());
  o.require(within(corr, 0.7, 0.005), "binary pair correlation " + fmt(corr, 4));
  return o;
}

Outcome criterion9() {
  Outcome o;
  for (auto setup : {sim::CovariateSetup::Continuous, sim::CovariateSetup::Mixed}) {
    sim::ScenarioConfig c;
    c.setup = setup;
    c.n = 200;
    c.replications = 8;
    auto one = sim::run_study(c, 1);
    auto many = sim::run_study(c, 3);
    const bool same = sim::table2_csv(one) == sim::table2_csv(many) &&
                      sim::table3_csv(one) == sim::table3_csv(many) &&
                      sim::replications_csv(one) == sim::replications_csv(many);
    o.require(same, sim::to_string(setup) + " jobs 1 vs 3 byte-identical");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::map<int, std::function<Outcome()>> criteria{
      {1, criterion1}, {2, criterion2}, {3, criterion3}, {4, criterion4}, {5, criterion5},
      {6, criterion6}, {7, criterion7}, {8, criterion8}, {9, criterion9},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (const auto& [id, run] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "error: " << e.what();
    }
    failed += !o.pass;
    std::cout << (o.pass ? "[PASS]" : "[FAIL]") << " criterion " << id << ": " << o.detail.str() << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
