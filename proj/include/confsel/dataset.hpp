#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace confsel {

enum class KindTag { Continuous, OrderedDiscrete, UnorderedDiscrete };

/// Measurement scale of one covariate column. Discrete kinds carry their
/// category count and take values in {0, ..., categories - 1}.
struct VariableKind {
  KindTag tag = KindTag::Continuous;
  int categories = 0;

  static VariableKind continuous() { return {}; }
  static VariableKind ordered(int c);
  static VariableKind unordered(int c);

  bool is_continuous() const { return tag == KindTag::Continuous; }
  bool is_discrete() const { return tag != KindTag::Continuous; }

  /// "continuous", "ordered:c" or "unordered:c"; the schema sidecar spelling.
  std::string to_string() const;
  static VariableKind parse(std::string_view text);

  friend bool operator==(const VariableKind&, const VariableKind&) = default;
};

struct Column {
  std::string name;
  VariableKind kind;
  friend bool operator==(const Column&, const Column&) = default;
};

enum class ResponseKind { Binary, Continuous };

/// Sorted set of covariate positions. Stored 0-based; every user-facing
/// rendering is 1-based or by column name.
class IndexSet {
 public:
  IndexSet() = default;
  explicit IndexSet(std::vector<int> members);
  IndexSet(std::initializer_list<int> members) : IndexSet(std::vector<int>(members)) {}

  /// {0, ..., p - 1}
  static IndexSet all(int p);
  /// Builds from 1-based positions.
  static IndexSet one_based(std::initializer_list<int> members);

  const std::vector<int>& members() const { return members_; }
  std::size_t size() const { return members_.size(); }
  bool empty() const { return members_.empty(); }
  bool contains(int index) const;
  bool is_subset_of(const IndexSet& other) const;
  IndexSet unite(const IndexSet& other) const;
  /// Maps local positions through `parent`: result[k] = parent[members[k]].
  IndexSet lift(const IndexSet& parent) const;

  auto begin() const { return members_.begin(); }
  auto end() const { return members_.end(); }

  /// "{1, 2, 7}"
  std::string to_string() const;
  /// "{ageM, soc}"
  std::string to_names(std::span<const Column> columns) const;

  friend bool operator==(const IndexSet&, const IndexSet&) = default;

 private:
  std::vector<int> members_;
};

struct PotentialOutcomes {
  Eigen::VectorXd y0;
  Eigen::VectorXd y1;
};

/// Immutable observational dataset: covariates with per-column kinds, a
/// binary treatment and a real outcome, plus both potential outcomes when
/// the data were simulated.
class Dataset {
 public:
  enum class ArmCheck { Required, Skip };

  Dataset(std::vector<Column> columns, Eigen::MatrixXd x, Eigen::VectorXi t, Eigen::VectorXd y,
          std::optional<PotentialOutcomes> potential = std::nullopt,
          ArmCheck arms = ArmCheck::Required);

  int n() const { return static_cast<int>(x_.rows()); }
  int p() const { return static_cast<int>(x_.cols()); }
  int n_treated() const;

  const std::vector<Column>& columns() const { return columns_; }
  std::vector<VariableKind> kinds() const;
  const Eigen::MatrixXd& x() const { return x_; }
  const Eigen::VectorXi& treatment() const { return t_; }
  const Eigen::VectorXd& outcome() const { return y_; }
  const std::optional<PotentialOutcomes>& potential() const { return potential_; }

  Eigen::MatrixXd columns_of(const IndexSet& set) const;
  std::vector<VariableKind> kinds_of(const IndexSet& set) const;
  /// Column position by name; throws ValidationError when absent.
  int column_index(std::string_view name) const;
  /// Binary when every outcome is 0 or 1.
  ResponseKind outcome_kind() const;

  /// Rows in the given order; arm checks are skipped for the result.
  Dataset rows(std::span<const int> indices) const;

 private:
  std::vector<Column> columns_;
  Eigen::MatrixXd x_;
  Eigen::VectorXi t_;
  Eigen::VectorXd y_;
  std::optional<PotentialOutcomes> potential_;
};

/// Header plus string cells, as read from a CSV file.
struct RawTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Column roles from a schema sidecar.
struct Schema {
  std::vector<Column> covariates;
  std::string treatment;
  std::string outcome;
  std::optional<std::string> potential0;
  std::optional<std::string> potential1;
  std::vector<std::string> ignored;
};

Dataset validate_dataset(const RawTable& raw, const Schema& schema);

struct ColumnSummary {
  std::string name;
  VariableKind kind;
  double mean = 0.0;
  double sd = 0.0;
  double min = 0.0;
  double max = 0.0;
};

std::vector<ColumnSummary> summarize(const Dataset& ds);

/// (treated rows, control rows), each in original row order.
std::pair<Dataset, Dataset> split_by_treatment(const Dataset& ds);

/// Where a bundle came from: algorithm, backend, settings, and the sub-seed
/// of every filter invocation.
struct Provenance {
  std::string algorithm;
  std::string backend;
  std::map<std::string, std::string> settings;
  std::map<std::string, std::uint64_t> seeds;
  std::vector<std::string> warnings;
};

struct SelectionBundle {
  std::optional<IndexSet> xT, q0, q1, x0, x1, z0, z1;
  Provenance provenance;
};

struct BundleUnions {
  IndexSet q;
  IndexSet xy;
  IndexSet z;
};

IndexSet union_q(const SelectionBundle& b);
IndexSet union_xy(const SelectionBundle& b);
IndexSet union_z(const SelectionBundle& b);
BundleUnions union_bundle(const SelectionBundle& b);

}  // namespace confsel
