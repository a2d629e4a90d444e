#include "confsel/dataset.hpp"

#include "confsel/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_map>

namespace confsel {

VariableKind VariableKind::ordered(int c) {
  if (c < 2) throw ValidationError("ordered variable needs at least 2 categories, got " + std::to_string(c));
  return {KindTag::OrderedDiscrete, c};
}

VariableKind VariableKind::unordered(int c) {
  if (c < 2) throw ValidationError("unordered variable needs at least 2 categories, got " + std::to_string(c));
  return {KindTag::UnorderedDiscrete, c};
}

std::string VariableKind::to_string() const {
  switch (tag) {
    case KindTag::Continuous: return "continuous";
    case KindTag::OrderedDiscrete: return "ordered:" + std::to_string(categories);
    case KindTag::UnorderedDiscrete: return "unordered:" + std::to_string(categories);
  }
  return "continuous";
}

VariableKind VariableKind::parse(std::string_view text) {
  if (text == "continuous") return continuous();
  auto colon = text.find(':');
  if (colon == std::string_view::npos) throw ValidationError("unknown variable kind '" + std::string(text) + "'");
  auto head = text.substr(0, colon);
  auto tail = text.substr(colon + 1);
  int c = 0;
  auto [ptr, ec] = std::from_chars(tail.data(), tail.data() + tail.size(), c);
  if (ec != std::errc() || ptr != tail.data() + tail.size())
    throw ValidationError("bad category count in kind '" + std::string(text) + "'");
  if (head == "ordered") return ordered(c);
  if (head == "unordered") return unordered(c);
  throw ValidationError("unknown variable kind '" + std::string(text) + "'");
}

// ---------------------------------------------------------------------------

IndexSet::IndexSet(std::vector<int> members) : members_(std::move(members)) {
  std::sort(members_.begin(), members_.end());
  members_.erase(std::unique(members_.begin(), members_.end()), members_.end());
  if (!members_.empty() && members_.front() < 0) throw ValidationError("negative covariate index");
}

IndexSet IndexSet::all(int p) {
  std::vector<int> m(static_cast<std::size_t>(p));
  std::iota(m.begin(), m.end(), 0);
  return IndexSet(std::move(m));
}

IndexSet IndexSet::one_based(std::initializer_list<int> members) {
  std::vector<int> m;
  for (int k : members) {
    if (k < 1) throw ValidationError("1-based index must be positive");
    m.push_back(k - 1);
  }
  return IndexSet(std::move(m));
}

bool IndexSet::contains(int index) const {
  return std::binary_search(members_.begin(), members_.end(), index);
}

bool IndexSet::is_subset_of(const IndexSet& other) const {
  return std::includes(other.members_.begin(), other.members_.end(), members_.begin(), members_.end());
}

IndexSet IndexSet::unite(const IndexSet& other) const {
  std::vector<int> out;
  std::set_union(members_.begin(), members_.end(), other.members_.begin(), other.members_.end(),
                 std::back_inserter(out));
  IndexSet r;
  r.members_ = std::move(out);
  return r;
}

IndexSet IndexSet::lift(const IndexSet& parent) const {
  std::vector<int> out;
  out.reserve(members_.size());
  for (int k : members_) {
    if (k >= static_cast<int>(parent.size())) throw ValidationError("local index outside parent set");
    out.push_back(parent.members()[static_cast<std::size_t>(k)]);
  }
  return IndexSet(std::move(out));
}

std::string IndexSet::to_string() const {
  std::string s = "{";
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (k) s += ", ";
    s += std::to_string(members_[k] + 1);
  }
  return s + "}";
}

std::string IndexSet::to_names(std::span<const Column> columns) const {
  std::string s = "{";
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (k) s += ", ";
    auto idx = static_cast<std::size_t>(members_[k]);
    s += idx < columns.size() ? columns[idx].name : ("#" + std::to_string(members_[k] + 1));
  }
  return s + "}";
}

// ---------------------------------------------------------------------------

Dataset::Dataset(std::vector<Column> columns, Eigen::MatrixXd x, Eigen::VectorXi t, Eigen::VectorXd y,
                 std::optional<PotentialOutcomes> potential, ArmCheck arms)
    : columns_(std::move(columns)), x_(std::move(x)), t_(std::move(t)), y_(std::move(y)),
      potential_(std::move(potential)) {
  const auto n = x_.rows();
  if (static_cast<Eigen::Index>(columns_.size()) != x_.cols())
    throw ValidationError("column metadata count does not match covariate matrix width");
  if (t_.size() != n || y_.size() != n) throw ValidationError("treatment/outcome length differs from row count");

  std::set<std::string> names;
  for (const auto& c : columns_) {
    if (!names.insert(c.name).second) throw ValidationError("duplicate column name '" + c.name + "'");
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    if (t_(i) != 0 && t_(i) != 1)
      throw ValidationError("non-binary treatment at row " + std::to_string(i + 1));
    if (!std::isfinite(y_(i))) throw ValidationError("missing or non-finite outcome at row " + std::to_string(i + 1));
  }
  for (Eigen::Index k = 0; k < x_.cols(); ++k) {
    const auto& col = columns_[static_cast<std::size_t>(k)];
    for (Eigen::Index i = 0; i < n; ++i) {
      double v = x_(i, k);
      if (!std::isfinite(v))
        throw ValidationError("missing value in column '" + col.name + "' at row " + std::to_string(i + 1));
      if (col.kind.is_discrete()) {
        if (v != std::floor(v) || v < 0 || v >= col.kind.categories)
          throw ValidationError("value " + std::to_string(v) + " in column '" + col.name + "' at row " +
                                std::to_string(i + 1) + " is outside categories 0.." +
                                std::to_string(col.kind.categories - 1));
      }
    }
  }
  if (arms == ArmCheck::Required) {
    int treated = t_.sum();
    if (treated == 0 || treated == n) throw ValidationError("empty treatment arm: both arms must be non-empty");
  }
  if (potential_) {
    if (potential_->y0.size() != n || potential_->y1.size() != n)
      throw ValidationError("potential outcome length differs from row count");
    for (Eigen::Index i = 0; i < n; ++i) {
      double expect = t_(i) == 1 ? potential_->y1(i) : potential_->y0(i);
      if (expect != y_(i))
        throw ValidationError("observed outcome at row " + std::to_string(i + 1) +
                              " does not equal the potential outcome of its arm");
    }
  }
}

int Dataset::n_treated() const { return t_.sum(); }

std::vector<VariableKind> Dataset::kinds() const {
  std::vector<VariableKind> k;
  k.reserve(columns_.size());
  for (const auto& c : columns_) k.push_back(c.kind);
  return k;
}

Eigen::MatrixXd Dataset::columns_of(const IndexSet& set) const {
  Eigen::MatrixXd out(x_.rows(), static_cast<Eigen::Index>(set.size()));
  Eigen::Index j = 0;
  for (int k : set) {
    if (k >= p()) throw ValidationError("covariate index " + std::to_string(k + 1) + " out of range");
    out.col(j++) = x_.col(k);
  }
  return out;
}

std::vector<VariableKind> Dataset::kinds_of(const IndexSet& set) const {
  std::vector<VariableKind> out;
  for (int k : set) out.push_back(columns_.at(static_cast<std::size_t>(k)).kind);
  return out;
}

int Dataset::column_index(std::string_view name) const {
  for (std::size_t k = 0; k < columns_.size(); ++k)
    if (columns_[k].name == name) return static_cast<int>(k);
  throw ValidationError("unknown covariate '" + std::string(name) + "'");
}

ResponseKind Dataset::outcome_kind() const {
  for (Eigen::Index i = 0; i < y_.size(); ++i)
    if (y_(i) != 0.0 && y_(i) != 1.0) return ResponseKind::Continuous;
  return ResponseKind::Binary;
}

Dataset Dataset::rows(std::span<const int> indices) const {
  const auto m = static_cast<Eigen::Index>(indices.size());
  Eigen::MatrixXd x(m, x_.cols());
  Eigen::VectorXi t(m);
  Eigen::VectorXd y(m);
  std::optional<PotentialOutcomes> po;
  if (potential_) po = PotentialOutcomes{Eigen::VectorXd(m), Eigen::VectorXd(m)};
  for (Eigen::Index r = 0; r < m; ++r) {
    auto i = indices[static_cast<std::size_t>(r)];
    x.row(r) = x_.row(i);
    t(r) = t_(i);
    y(r) = y_(i);
    if (po) {
      po->y0(r) = potential_->y0(i);
      po->y1(r) = potential_->y1(i);
    }
  }
  return Dataset(columns_, std::move(x), std::move(t), std::move(y), std::move(po), ArmCheck::Skip);
}

// ---------------------------------------------------------------------------

namespace {

bool is_missing_token(std::string_view s) {
  return s.empty() || s == "NA" || s == "NaN" || s == "nan" || s == "." || s == "NULL";
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_cell(std::string_view raw, const std::string& column, std::size_t row) {
  auto s = trim(raw);
  auto where = [&] { return " in column '" + column + "' at row " + std::to_string(row + 1); };
  if (is_missing_token(s)) throw ValidationError("missing value" + where());
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::general);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw ValidationError("cannot parse '" + std::string(raw) + "' as a number" + where());
  if (!std::isfinite(v)) throw ValidationError("non-finite value" + where());
  return v;
}

}  // namespace

Dataset validate_dataset(const RawTable& raw, const Schema& schema) {
  std::unordered_map<std::string, std::size_t> pos;
  for (std::size_t c = 0; c < raw.header.size(); ++c) {
    if (!pos.emplace(raw.header[c], c).second)
      throw ValidationError("duplicate CSV header '" + raw.header[c] + "'");
  }
  auto locate = [&](const std::string& name, const char* role) {
    auto it = pos.find(name);
    if (it == pos.end()) throw ValidationError(std::string(role) + " column '" + name + "' not found in data");
    return it->second;
  };
  if (schema.treatment.empty()) throw ValidationError("schema declares no treatment column");
  if (schema.outcome.empty()) throw ValidationError("schema declares no outcome column");

  std::set<std::string> described;
  auto describe = [&](const std::string& name) {
    if (!described.insert(name).second) throw ValidationError("column '" + name + "' has two schema roles");
  };
  for (const auto& c : schema.covariates) describe(c.name);
  describe(schema.treatment);
  describe(schema.outcome);
  if (schema.potential0) describe(*schema.potential0);
  if (schema.potential1) describe(*schema.potential1);
  for (const auto& s : schema.ignored) describe(s);
  for (const auto& h : raw.header)
    if (!described.count(h)) throw ValidationError("column '" + h + "' is not described by the schema");
  if (schema.potential0.has_value() != schema.potential1.has_value())
    throw ValidationError("schema must declare both potential outcome columns or neither");

  const auto width = raw.header.size();
  for (std::size_t r = 0; r < raw.rows.size(); ++r) {
    if (raw.rows[r].size() != width)
      throw ValidationError("row " + std::to_string(r + 1) + " has " + std::to_string(raw.rows[r].size()) +
                            " fields, header has " + std::to_string(width));
  }

  const auto n = static_cast<Eigen::Index>(raw.rows.size());
  const auto p = static_cast<Eigen::Index>(schema.covariates.size());
  Eigen::MatrixXd x(n, p);
  Eigen::VectorXi t(n);
  Eigen::VectorXd y(n);

  const auto tcol = locate(schema.treatment, "treatment");
  const auto ycol = locate(schema.outcome, "outcome");
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = raw.rows[static_cast<std::size_t>(i)];
    double tv = parse_cell(row[tcol], schema.treatment, static_cast<std::size_t>(i));
    if (tv != 0.0 && tv != 1.0)
      throw ValidationError("non-binary treatment: value '" + row[tcol] + "' in column '" + schema.treatment +
                            "' at row " + std::to_string(i + 1));
    t(i) = static_cast<int>(tv);
    y(i) = parse_cell(row[ycol], schema.outcome, static_cast<std::size_t>(i));
  }
  for (Eigen::Index k = 0; k < p; ++k) {
    const auto& col = schema.covariates[static_cast<std::size_t>(k)];
    const auto c = locate(col.name, "covariate");
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = raw.rows[static_cast<std::size_t>(i)];
      double v = parse_cell(row[c], col.name, static_cast<std::size_t>(i));
      if (col.kind.is_discrete() && (v != std::floor(v) || v < 0 || v >= col.kind.categories)) {
        throw ValidationError("column '" + col.name + "' (" + col.kind.to_string() + ") has value '" + row[c] +
                              "' at row " + std::to_string(i + 1) + " outside categories 0.." +
                              std::to_string(col.kind.categories - 1));
      }
      x(i, k) = v;
    }
  }

  std::optional<PotentialOutcomes> po;
  if (schema.potential0) {
    const auto c0 = locate(*schema.potential0, "potential0");
    const auto c1 = locate(*schema.potential1, "potential1");
    po = PotentialOutcomes{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& row = raw.rows[static_cast<std::size_t>(i)];
      po->y0(i) = parse_cell(row[c0], *schema.potential0, static_cast<std::size_t>(i));
      po->y1(i) = parse_cell(row[c1], *schema.potential1, static_cast<std::size_t>(i));
    }
  }

  int treated = t.sum();
  if (n == 0) throw ValidationError("data has no rows");
  if (treated == 0) throw ValidationError("empty treatment arm: no rows with " + schema.treatment + " = 1");
  if (treated == n) throw ValidationError("empty treatment arm: no rows with " + schema.treatment + " = 0");

  return Dataset(schema.covariates, std::move(x), std::move(t), std::move(y), std::move(po));
}

std::vector<ColumnSummary> summarize(const Dataset& ds) {
  std::vector<ColumnSummary> out;
  const auto& x = ds.x();
  for (int k = 0; k < ds.p(); ++k) {
    ColumnSummary s;
    s.name = ds.columns()[static_cast<std::size_t>(k)].name;
    s.kind = ds.columns()[static_cast<std::size_t>(k)].kind;
    auto col = x.col(k);
    s.mean = col.mean();
    s.min = col.minCoeff();
    s.max = col.maxCoeff();
    s.sd = ds.n() > 1 ? std::sqrt((col.array() - s.mean).square().sum() / (ds.n() - 1)) : 0.0;
    out.push_back(std::move(s));
  }
  return out;
}

std::pair<Dataset, Dataset> split_by_treatment(const Dataset& ds) {
  std::vector<int> treated, control;
  for (int i = 0; i < ds.n(); ++i) (ds.treatment()(i) == 1 ? treated : control).push_back(i);
  return {ds.rows(treated), ds.rows(control)};
}

// ---------------------------------------------------------------------------

namespace {

const IndexSet& need(const std::optional<IndexSet>& s, const char* name, const char* algorithm) {
  if (!s) throw ValidationError(std::string("selection bundle has no ") + name + "; run Algorithm " + algorithm + " first");
  return *s;
}

}  // namespace

IndexSet union_q(const SelectionBundle& b) { return need(b.q0, "Q_0", "A").unite(need(b.q1, "Q_1", "A")); }
IndexSet union_xy(const SelectionBundle& b) { return need(b.x0, "X_0", "B").unite(need(b.x1, "X_1", "B")); }
IndexSet union_z(const SelectionBundle& b) { return need(b.z0, "Z_0", "B").unite(need(b.z1, "Z_1", "B")); }

BundleUnions union_bundle(const SelectionBundle& b) { return {union_q(b), union_xy(b), union_z(b)}; }

}  // namespace confsel
