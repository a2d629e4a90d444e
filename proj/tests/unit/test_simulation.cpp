#include "confsel/error.hpp"
#include "confsel/simulation.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>

using namespace confsel;
using namespace confsel::sim;

namespace {

double corr(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double ma = a.mean(), mb = b.mean();
  const double cov = ((a.array() - ma) * (b.array() - mb)).sum();
  return cov / std::sqrt((a.array() - ma).square().sum() * (b.array() - mb).square().sum());
}

}  // namespace

TEST_CASE("latent correlation for the binary pair") {
  CHECK(latent_binary_correlation() == doctest::Approx(0.8910065241883679).epsilon(1e-12));
  CHECK(2.0 / std::numbers::pi * std::asin(latent_binary_correlation()) == doctest::Approx(0.7).epsilon(1e-12));
}

TEST_CASE("continuous covariates: correlation structure") {
  Rng rng(1);
  auto x = gen_covariates(CovariateSetup::Continuous, 100000, rng);
  CHECK(std::abs(corr(x.col(6), x.col(7)) - 0.7) < 0.01);
  for (int a = 0; a < 10; ++a)
    for (int b = a + 1; b < 10; ++b)
      if (!(a == 6 && b == 7)) CHECK(std::abs(corr(x.col(a), x.col(b))) < 0.02);
}

TEST_CASE("discrete covariates: Bernoulli(0.5) marginals") {
  Rng rng(2);
  auto x = gen_covariates(CovariateSetup::Discrete, 100000, rng);
  for (int k = 0; k < 10; ++k) CHECK(std::abs(x.col(k).mean() - 0.5) < 0.01);
  CHECK(std::abs(corr(x.col(6), x.col(7)) - 0.7) < 0.01);
}

TEST_CASE("mixed covariates: kinds and marginals") {
  auto cols = covariate_columns(CovariateSetup::Mixed);
  for (int k = 0; k < 10; ++k) {
    const bool cont = k == 1 || k == 3 || k == 4;
    CHECK(cols[static_cast<std::size_t>(k)].kind.is_continuous() == cont);
  }
  Rng rng(3);
  auto x = gen_covariates(CovariateSetup::Mixed, 50000, rng);
  CHECK(std::abs(x.col(1).mean()) < 0.02);
  CHECK(std::abs(x.col(0).mean() - 0.5) < 0.01);
}

TEST_CASE("treatment model") {
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(1, 10);
  CHECK(treatment_probability(zero, CovariateSetup::Discrete)(0) == doctest::Approx(1.0 / (1.0 + std::exp(5.0))));
  CHECK(treatment_probability(zero, CovariateSetup::Discrete)(0) == doctest::Approx(0.00669).epsilon(1e-3));
  CHECK(treatment_probability(zero, CovariateSetup::Continuous)(0) == 0.5);

  // Exact enumeration over the Binomial(5, 1/2) index in the discrete setup.
  double expect = 0.0;
  for (int s = 0; s <= 5; ++s) {
    const double weight = std::tgamma(6) / (std::tgamma(s + 1) * std::tgamma(6 - s)) / 32.0;
    expect += weight / (1.0 + std::exp(5.0 - 2.0 * s));
  }
  CHECK(expect == doctest::Approx(0.5).epsilon(1e-12));

  for (auto setup : {CovariateSetup::Continuous, CovariateSetup::Discrete, CovariateSetup::Mixed}) {
    Rng rng(4);
    auto x = gen_covariates(setup, 100000, rng);
    auto t = gen_treatment(x, setup, rng);
    CHECK(std::abs(t.cast<double>().mean() - 0.5) < 0.01);
  }
}

TEST_CASE("outcome model hand values") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(1, 10);
  x(0, 5) = 1.0;
  auto [d0, d1] = outcome_means(x, CovariateSetup::Discrete, OutcomeModel::Nonlinear);
  CHECK(d0(0) == doctest::Approx(2.0 - 6.0 / std::log(1.96)).epsilon(1e-12));
  CHECK(d0(0) == doctest::Approx(-6.916).epsilon(1e-4));
  CHECK(d1(0) - d0(0) == doctest::Approx(2.0));

  x(0, 0) = -2.0;
  auto [c0, c1] = outcome_means(x, CovariateSetup::Continuous, OutcomeModel::Nonlinear);
  CHECK(c0(0) == doctest::Approx(16.0));

  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(1, 10);
  CHECK(outcome_means(ones, CovariateSetup::Continuous, OutcomeModel::Linear).first(0) == doctest::Approx(2 + 5 * 2));
  CHECK(outcome_means(ones, CovariateSetup::Discrete, OutcomeModel::Linear).first(0) == doctest::Approx(2 + 5 * 4));
  // Mixed: X2 and X5 continuous (b = 2), X1, X6, X8 discrete (b = 4).
  CHECK(outcome_means(ones, CovariateSetup::Mixed, OutcomeModel::Linear).first(0) == doctest::Approx(2 + 2 * 2 + 3 * 4));
}

TEST_CASE("true effect is 2 in every scenario") {
  for (auto setup : {CovariateSetup::Continuous, CovariateSetup::Discrete, CovariateSetup::Mixed})
    for (auto model : {OutcomeModel::Linear, OutcomeModel::Nonlinear}) {
      Rng rng(5);
      auto x = gen_covariates(setup, 100, rng);
      auto [m0, m1] = outcome_means(x, setup, model);
      CHECK(((m1 - m0).array() - 2.0).abs().maxCoeff() < 1e-12);
      auto ds = simulate_dataset(setup, model, 100, rng);
      const auto& po = *ds.potential();
      for (int i = 0; i < 100; ++i)
        CHECK(ds.outcome()(i) == (ds.treatment()(i) ? po.y1(i) : po.y0(i)));
    }
}

TEST_CASE("evaluate_selection") {
  auto f = evaluate_selection(IndexSet::one_based({1, 2, 7, 5}), truth().q);
  CHECK((f.sufficient && f.includes_target && !f.equals_target));
  f = evaluate_selection(IndexSet::one_based({1, 2, 8}), truth().q);
  CHECK((f.sufficient && !f.includes_target && !f.equals_target));
  f = evaluate_selection(IndexSet::one_based({1, 2}), truth().q);
  CHECK((!f.sufficient && !f.includes_target && !f.equals_target));
  f = evaluate_selection(IndexSet::one_based({1, 2, 3, 4, 7}), truth().xT);
  CHECK(f.equals_target);
}

TEST_CASE("scenario config round-trips and validates") {
  auto c = ScenarioConfig::parse("setup = mixed\noutcome = nonlinear\nn = 300\nreplications = 7\nseed = 99\n"
                                 "threshold_binary = 0.25\nsubsample = 200\n");
  CHECK(c.setup == CovariateSetup::Mixed);
  CHECK(c.threshold_binary == 0.25);
  CHECK(*c.subsample == 200);
  auto again = ScenarioConfig::parse(c.to_text());
  CHECK(again.to_text() == c.to_text());
  CHECK_THROWS_AS(ScenarioConfig::parse("n = 50\n"), ValidationError);
  CHECK_THROWS_AS(ScenarioConfig::parse("replications = 0\n"), ValidationError);
  CHECK_THROWS_AS(ScenarioConfig::parse("colour = blue\n"), ValidationError);
  CHECK_THROWS_AS(ScenarioConfig::parse("setup = discrete\nbackend = sdr\n"), ValidationError);
}

TEST_CASE("single replication: SD is absent and bias is the estimate minus 2") {
  ScenarioConfig c;
  c.replications = 1;
  c.n = 200;
  auto r = run_study(c, 1);
  REQUIRE(r.completed == 1);
  const auto& row = r.estimation[0];
  CHECK_FALSE(row.norm.sd.has_value());
  CHECK(row.norm.bias == doctest::Approx(r.replications[0].norm[0] - 2.0));
  CHECK(table3_csv(r).find("X,") != std::string::npos);
}

TEST_CASE("report invariants and worker-count determinism") {
  ScenarioConfig c;
  c.replications = 24;
  c.n = 200;
  c.seed = 4242;
  auto one = run_study(c, 1);
  auto three = run_study(c, 3);
  CHECK(table2_csv(one) == table2_csv(three));
  CHECK(table3_csv(one) == table3_csv(three));
  CHECK(replications_csv(one) == replications_csv(three));
  for (std::size_t k = 0; k < 7; ++k) {
    CHECK(one.equals[k] <= one.includes[k]);
    CHECK(one.includes[k] <= 100.0);
  }
  // Inclusion implies sufficiency for the Q and Z targets.
  for (std::size_t k : {1u, 2u, 5u, 6u}) CHECK(one.sufficient[k] >= one.includes[k]);
  for (const auto& row : one.estimation) {
    CHECK(row.norm.mse == doctest::Approx(row.norm.bias2_plus_var).epsilon(1e-10));
    CHECK(row.pscore.mse == doctest::Approx(row.pscore.bias2_plus_var).epsilon(1e-10));
  }
  c.seed = 4243;
  CHECK(table3_csv(run_study(c, 1)) != table3_csv(one));
}

TEST_CASE("failure cap") {
  ScenarioConfig c;
  c.replications = 40;
  std::vector<ReplicationResult> reps(40);
  for (int i = 0; i < 40; ++i) reps[static_cast<std::size_t>(i)].index = i;
  reps[3].failed = true;
  reps[3].error = "optimizer failed";
  reps[9].failed = true;
  auto ok = aggregate(c, reps);
  CHECK(ok.failures == 2);
  CHECK(ok.completed == 38);
  CHECK_NOTHROW(enforce_failure_cap(ok));
  CHECK(ok.failure_log[0].find("replication 4") != std::string::npos);
  reps[20].failed = true;
  CHECK_THROWS_AS(enforce_failure_cap(aggregate(c, reps)), SimulationError);
}
