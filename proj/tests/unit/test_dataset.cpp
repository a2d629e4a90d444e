#include "confsel/dataset.hpp"
#include "confsel/error.hpp"
#include "confsel/io.hpp"

#include <doctest.h>

#include <random>
#include <set>

using namespace confsel;

namespace {

RawTable table(std::vector<std::string> header, std::vector<std::vector<std::string>> rows) {
  return RawTable{std::move(header), std::move(rows)};
}

Schema schema_x(VariableKind kind) {
  Schema s;
  s.covariates = {{"x", kind}};
  s.treatment = "t";
  s.outcome = "y";
  return s;
}

}  // namespace

TEST_CASE("minimal well-formed table validates") {
  auto raw = table({"x", "t", "y"}, {{"0.5", "1", "2"}, {"1.5", "1", "3"}, {"2", "0", "1"}, {"3", "0", "0.25"}});
  auto ds = validate_dataset(raw, schema_x(VariableKind::continuous()));
  CHECK(ds.n() == 4);
  CHECK(ds.p() == 1);
  CHECK(ds.n_treated() == 2);
  CHECK(ds.outcome()(3) == doctest::Approx(0.25));
}

TEST_CASE("treatment outside {0,1} is rejected") {
  auto raw = table({"x", "t", "y"}, {{"0", "1", "2"}, {"1", "2", "3"}, {"2", "0", "1"}});
  CHECK_THROWS_WITH_AS(validate_dataset(raw, schema_x(VariableKind::continuous())),
                       doctest::Contains("non-binary treatment"), ValidationError);
}

TEST_CASE("discrete value out of range names the column") {
  auto raw = table({"x", "t", "y"}, {{"0", "1", "2"}, {"3", "1", "3"}, {"1", "0", "1"}});
  CHECK_THROWS_WITH_AS(validate_dataset(raw, schema_x(VariableKind::unordered(2))), doctest::Contains("'x'"),
                       ValidationError);
}

TEST_CASE("missing values and empty arms are rejected") {
  auto missing = table({"x", "t", "y"}, {{"", "1", "2"}, {"1", "0", "3"}});
  CHECK_THROWS_AS(validate_dataset(missing, schema_x(VariableKind::continuous())), ValidationError);
  auto na = table({"x", "t", "y"}, {{"NA", "1", "2"}, {"1", "0", "3"}});
  CHECK_THROWS_AS(validate_dataset(na, schema_x(VariableKind::continuous())), ValidationError);
  auto all_treated = table({"x", "t", "y"}, {{"0", "1", "2"}, {"1", "1", "3"}});
  CHECK_THROWS_WITH_AS(validate_dataset(all_treated, schema_x(VariableKind::continuous())),
                       doctest::Contains("empty treatment arm"), ValidationError);
}

TEST_CASE("ragged rows and unknown columns are rejected") {
  auto ragged = table({"x", "t", "y"}, {{"0", "1"}, {"1", "0", "3"}});
  CHECK_THROWS_AS(validate_dataset(ragged, schema_x(VariableKind::continuous())), ValidationError);
  auto extra = table({"x", "t", "y", "w"}, {{"0", "1", "1", "1"}, {"1", "0", "3", "1"}});
  CHECK_THROWS_AS(validate_dataset(extra, schema_x(VariableKind::continuous())), ValidationError);
}

TEST_CASE("potential outcomes must agree with the observed outcome") {
  Eigen::MatrixXd x(2, 1);
  x << 0, 1;
  Eigen::VectorXi t(2);
  t << 1, 0;
  Eigen::VectorXd y(2), y0(2), y1(2);
  y << 5, 1;
  y0 << 0, 1;
  y1 << 5, 9;
  CHECK_NOTHROW(Dataset({{"x", VariableKind::continuous()}}, x, t, y, PotentialOutcomes{y0, y1}));
  y1(0) = 4;
  CHECK_THROWS_AS(Dataset({{"x", VariableKind::continuous()}}, x, t, y, PotentialOutcomes{y0, y1}), ValidationError);
}

TEST_CASE("split_by_treatment partitions rows in order") {
  Eigen::MatrixXd x(4, 1);
  x << 10, 20, 30, 40;
  Eigen::VectorXi t(4);
  t << 1, 0, 1, 0;
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  Dataset ds({{"x", VariableKind::continuous()}}, x, t, y);
  auto [treated, control] = split_by_treatment(ds);
  CHECK(treated.n() == 2);
  CHECK(control.n() == 2);
  CHECK(treated.x()(0, 0) == 10);
  CHECK(treated.x()(1, 0) == 30);
  CHECK(control.outcome()(1) == 4);
  CHECK(treated.columns() == ds.columns());
}

TEST_CASE("split_by_treatment is a partition on random data") {
  std::mt19937_64 rng(3);
  std::bernoulli_distribution coin(0.5);
  const int n = 1000;
  Eigen::MatrixXd x(n, 1);
  Eigen::VectorXi t(n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = i;
    t(i) = coin(rng);
    y(i) = 0.0;
  }
  Dataset ds({{"row", VariableKind::continuous()}}, x, t, y);
  auto [treated, control] = split_by_treatment(ds);
  CHECK(treated.n() + control.n() == n);
  std::set<int> seen;
  for (int i = 0; i < treated.n(); ++i) seen.insert(static_cast<int>(treated.x()(i, 0)));
  for (int i = 0; i < control.n(); ++i) seen.insert(static_cast<int>(control.x()(i, 0)));
  CHECK(seen.size() == static_cast<std::size_t>(n));
}

TEST_CASE("IndexSet sorts, renders 1-based and lifts through a parent") {
  IndexSet s{6, 0, 1};
  CHECK(s.members() == std::vector<int>{0, 1, 6});
  CHECK(s.to_string() == "{1, 2, 7}");
  CHECK(IndexSet::one_based({1, 2, 7}) == s);
  CHECK(IndexSet({1, 1}).size() == 1);
  CHECK_THROWS_AS(IndexSet({-1, 2}), ValidationError);
  IndexSet parent{2, 4, 9};
  CHECK(IndexSet({0, 2}).lift(parent) == IndexSet({2, 9}));
  std::vector<Column> cols;
  for (int k = 0; k < 8; ++k) cols.push_back({"c" + std::to_string(k), VariableKind::continuous()});
  CHECK(IndexSet({0, 7}).to_names(cols) == "{c0, c7}");
}

TEST_CASE("union_bundle examples") {
  SelectionBundle b;
  b.q0 = IndexSet::one_based({1, 2});
  b.q1 = IndexSet::one_based({2, 7});
  CHECK(union_q(b) == IndexSet::one_based({1, 2, 7}));
  b.z0 = IndexSet::one_based({1, 2, 8});
  b.z1 = IndexSet::one_based({1, 2, 8});
  CHECK(union_z(b) == IndexSet::one_based({1, 2, 8}));
  b.q0 = IndexSet{};
  b.q1 = IndexSet::one_based({3});
  CHECK(union_q(b) == IndexSet::one_based({3}));
  CHECK_THROWS_WITH_AS(union_xy(b), doctest::Contains("Algorithm B"), ValidationError);
}

TEST_CASE("union_bundle equals the brute-force union and contains its parts") {
  std::mt19937_64 rng(11);
  std::bernoulli_distribution coin(0.4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> a, b;
    std::set<int> both;
    for (int k = 0; k < 10; ++k) {
      if (coin(rng)) a.push_back(k), both.insert(k);
      if (coin(rng)) b.push_back(k), both.insert(k);
    }
    SelectionBundle bundle;
    bundle.x0 = IndexSet(a);
    bundle.x1 = IndexSet(b);
    auto u = union_xy(bundle);
    CHECK(u.members() == std::vector<int>(both.begin(), both.end()));
    CHECK(bundle.x0->is_subset_of(u));
    CHECK(bundle.x1->is_subset_of(u));
  }
}

TEST_CASE("validate, serialize and re-validate round-trips exactly") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int n = 40;
  Eigen::MatrixXd x(n, 3);
  Eigen::VectorXi t(n);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = normal(rng) * 1e-3 + 1.0 / 3.0;
    x(i, 1) = i % 3;
    x(i, 2) = i % 2;
    t(i) = i % 2 == 0;
    y(i) = std::exp(normal(rng));
  }
  Dataset ds({{"a", VariableKind::continuous()}, {"b", VariableKind::ordered(3)}, {"c", VariableKind::unordered(2)}},
             x, t, y);
  auto again = validate_dataset(io::parse_csv(io::dataset_csv(ds)), io::parse_schema(io::dataset_schema(ds)));
  CHECK(again.columns() == ds.columns());
  CHECK(again.x() == ds.x());
  CHECK(again.treatment() == ds.treatment());
  CHECK(again.outcome() == ds.outcome());
}
