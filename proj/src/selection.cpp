#include "confsel/selection.hpp"

#include "confsel/error.hpp"
#include "confsel/io.hpp"
#include "confsel/rng.hpp"

#include <array>

namespace confsel {

FilterResult SdrFilter::filter(const Eigen::VectorXd& response, ResponseKind kind, const Eigen::MatrixXd& x,
                               std::span<const VariableKind> kinds, std::uint64_t seed) const {
  auto opts = opts_;
  opts.mch.mc_seed = seed;
  auto result = sdr::backward_eliminate(response, kind, x, kinds, opts);
  FilterResult out{result.retained, {}};
  for (const auto& step : result.trace)
    out.notes.push_back("removed column " + std::to_string(step.removed + 1) + " (p = " +
                        io::format_double(step.p_value) + ")");
  return out;
}

std::map<std::string, std::string> SdrFilter::settings() const {
  std::map<std::string, std::string> s;
  s["alpha"] = io::format_double(opts_.alpha);
  s["null_approx"] = opts_.mch.method == sdr::NullApprox::MomentMatched ? "moment" : "monte-carlo";
  if (opts_.sir.slices) s["slices"] = std::to_string(*opts_.sir.slices);
  s["dim_level"] = io::format_double(opts_.sir.dim_level);
  return s;
}

FilterResult KernelFilter::filter(const Eigen::VectorXd& response, ResponseKind, const Eigen::MatrixXd& x,
                                  std::span<const VariableKind> kinds, std::uint64_t seed) const {
  auto meta = kernel::make_meta(x, kinds);
  policy_.validate(meta);
  auto fit = kernel::select_bandwidths(response, x, meta, config_, seed);
  FilterResult out{kernel::screen(fit.bandwidths, policy_, meta), {}};
  for (std::size_t k = 0; k < meta.size(); ++k)
    out.notes.push_back("column " + std::to_string(k + 1) + " bandwidth " + io::format_double(fit.bandwidths.values[k]));
  return out;
}

std::map<std::string, std::string> KernelFilter::settings() const {
  std::map<std::string, std::string> s;
  s["threshold_continuous"] = io::format_double(policy_.continuous);
  s["threshold_ordered"] = io::format_double(policy_.ordered);
  s["threshold_unordered"] = io::format_double(policy_.unordered);
  s["restarts"] = std::to_string(config_.restarts);
  s["rel_tol"] = io::format_double(config_.rel_tol);
  s["max_iter"] = std::to_string(config_.max_iter);
  if (config_.subsample) s["subsample"] = std::to_string(*config_.subsample);
  return s;
}

Algorithm parse_algorithm(std::string_view text) {
  if (text == "a" || text == "A") return Algorithm::A;
  if (text == "b" || text == "B") return Algorithm::B;
  if (text == "both") return Algorithm::Both;
  throw ValidationError("unknown algorithm '" + std::string(text) + "' (expected a, b or both)");
}

std::uint64_t step_seed(std::uint64_t master, std::string_view label) { return derive_seed(master, label); }

namespace {

Eigen::VectorXd as_double(const Eigen::VectorXi& t) { return t.cast<double>(); }

struct StepRunner {
  const RelevanceFilter& filter;
  std::uint64_t master;
  Provenance& prov;

  /// Filters `response` on the `within` columns of `x_all`; result is in
  /// Dataset coordinates.
  IndexSet run(const std::string& label, const Eigen::VectorXd& response, ResponseKind kind,
               const Eigen::MatrixXd& x_all, const std::vector<VariableKind>& kinds_all, const IndexSet& within,
               const std::string& empty_warning) {
    if (within.empty()) {
      prov.warnings.push_back(empty_warning);
      return {};
    }
    Eigen::MatrixXd sub(x_all.rows(), static_cast<Eigen::Index>(within.size()));
    std::vector<VariableKind> kinds;
    Eigen::Index c = 0;
    for (int k : within) {
      sub.col(c++) = x_all.col(k);
      kinds.push_back(kinds_all[static_cast<std::size_t>(k)]);
    }
    const auto seed = step_seed(master, label);
    prov.seeds[label] = seed;
    auto result = filter.filter(response, kind, sub, kinds, seed);
    for (int k : result.retained)
      if (k < 0 || k >= static_cast<int>(within.size()))
        throw BackendError("filter returned an index outside the submitted covariates");
    return result.retained.lift(within);
  }
};

void stamp(Provenance& prov, const RelevanceFilter& filter, std::string algorithm, std::uint64_t seed) {
  prov.algorithm = std::move(algorithm);
  prov.backend = filter.name();
  prov.settings = filter.settings();
  prov.settings["master_seed"] = std::to_string(seed);
}

}  // namespace

SelectionBundle run_algorithm_a(const Dataset& ds, const RelevanceFilter& filter, const SelectionSettings& settings) {
  SelectionBundle b;
  stamp(b.provenance, filter, "A", settings.seed);
  StepRunner run{filter, settings.seed, b.provenance};
  const auto kinds = ds.kinds();
  b.xT = run.run("A1", as_double(ds.treatment()), ResponseKind::Binary, ds.x(), kinds, IndexSet::all(ds.p()),
                 "no covariates submitted to step A1");
  const auto [treated, control] = split_by_treatment(ds);
  const std::string empty = "X_T is empty; Q_0 and Q_1 are empty";
  const bool xT_empty = b.xT->empty();
  b.q0 = xT_empty ? IndexSet{}
                  : run.run("A2/t0", control.outcome(), control.outcome_kind(), control.x(), kinds, *b.xT, empty);
  b.q1 = xT_empty ? IndexSet{}
                  : run.run("A2/t1", treated.outcome(), treated.outcome_kind(), treated.x(), kinds, *b.xT, empty);
  if (xT_empty) b.provenance.warnings.push_back(empty);
  return b;
}

SelectionBundle run_algorithm_b(const Dataset& ds, const RelevanceFilter& filter, const SelectionSettings& settings) {
  SelectionBundle b;
  stamp(b.provenance, filter, "B", settings.seed);
  StepRunner run{filter, settings.seed, b.provenance};
  const auto kinds = ds.kinds();
  const auto [treated, control] = split_by_treatment(ds);
  const auto all = IndexSet::all(ds.p());
  b.x0 = run.run("B1/t0", control.outcome(), control.outcome_kind(), control.x(), kinds, all,
                 "no covariates submitted to step B1");
  b.x1 = run.run("B1/t1", treated.outcome(), treated.outcome_kind(), treated.x(), kinds, all,
                 "no covariates submitted to step B1");
  const Eigen::VectorXd t = as_double(ds.treatment());
  b.z0 = run.run("B2/t0", t, ResponseKind::Binary, ds.x(), kinds, *b.x0, "X_0 is empty; Z_0 is empty");
  b.z1 = run.run("B2/t1", t, ResponseKind::Binary, ds.x(), kinds, *b.x1, "X_1 is empty; Z_1 is empty");
  return b;
}

SelectionBundle run_selection(const Dataset& ds, const RelevanceFilter& filter, Algorithm algorithm,
                              const SelectionSettings& settings) {
  if (algorithm == Algorithm::A) return run_algorithm_a(ds, filter, settings);
  if (algorithm == Algorithm::B) return run_algorithm_b(ds, filter, settings);
  auto a = run_algorithm_a(ds, filter, settings);
  auto b = run_algorithm_b(ds, filter, settings);
  a.x0 = b.x0;
  a.x1 = b.x1;
  a.z0 = b.z0;
  a.z1 = b.z1;
  a.provenance.algorithm = "both";
  a.provenance.seeds.merge(b.provenance.seeds);
  for (auto& w : b.provenance.warnings) a.provenance.warnings.push_back(std::move(w));
  return a;
}

// ---------------------------------------------------------------------------

namespace {

struct SetSlot {
  const char* key;
  const char* label;
  std::optional<IndexSet> SelectionBundle::*member;
};

constexpr std::array<SetSlot, 7> kSlots{{
    {"xT", "X_T", &SelectionBundle::xT},
    {"q0", "Q_0", &SelectionBundle::q0},
    {"q1", "Q_1", &SelectionBundle::q1},
    {"x0", "X_0", &SelectionBundle::x0},
    {"x1", "X_1", &SelectionBundle::x1},
    {"z0", "Z_0", &SelectionBundle::z0},
    {"z1", "Z_1", &SelectionBundle::z1},
}};

int find_column(std::span<const Column> columns, const std::string& name) {
  for (std::size_t k = 0; k < columns.size(); ++k)
    if (columns[k].name == name) return static_cast<int>(k);
  throw ValidationError("bundle refers to unknown covariate '" + name + "'");
}

}  // namespace

nlohmann::json bundle_to_json(const SelectionBundle& bundle, std::span<const Column> columns) {
  nlohmann::json doc;
  const auto& p = bundle.provenance;
  doc["algorithm"] = p.algorithm;
  doc["backend"] = p.backend;
  doc["settings"] = p.settings;
  doc["seeds"] = nlohmann::json::object();
  for (const auto& [label, seed] : p.seeds) doc["seeds"][label] = seed;
  doc["warnings"] = p.warnings;
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns) cols.push_back(c.name);
  doc["columns"] = cols;
  doc["sets"] = nlohmann::json::object();
  for (const auto& slot : kSlots) {
    const auto& set = bundle.*slot.member;
    if (!set) continue;
    nlohmann::json names = nlohmann::json::array();
    for (int k : *set) names.push_back(columns[static_cast<std::size_t>(k)].name);
    doc["sets"][slot.key] = names;
  }
  return doc;
}

SelectionBundle bundle_from_json(const nlohmann::json& doc, std::span<const Column> columns) {
  SelectionBundle b;
  try {
    auto& p = b.provenance;
    p.algorithm = doc.value("algorithm", "");
    p.backend = doc.value("backend", "");
    if (doc.contains("settings")) p.settings = doc.at("settings").get<std::map<std::string, std::string>>();
    if (doc.contains("seeds")) p.seeds = doc.at("seeds").get<std::map<std::string, std::uint64_t>>();
    if (doc.contains("warnings")) p.warnings = doc.at("warnings").get<std::vector<std::string>>();
    const auto& sets = doc.at("sets");
    for (const auto& slot : kSlots) {
      if (!sets.contains(slot.key)) continue;
      std::vector<int> members;
      for (const auto& name : sets.at(slot.key)) members.push_back(find_column(columns, name.get<std::string>()));
      b.*slot.member = IndexSet(std::move(members));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed bundle: ") + e.what());
  }
  return b;
}

std::string bundle_listing(const SelectionBundle& bundle, std::span<const Column> columns) {
  std::string out;
  for (const auto& slot : kSlots) {
    const auto& set = bundle.*slot.member;
    if (set) out += std::string(slot.label) + " = " + set->to_names(columns) + "\n";
  }
  return out;
}

IndexSet bundle_set(const SelectionBundle& bundle, std::string_view key) {
  for (const auto& slot : kSlots) {
    if (key != slot.key) continue;
    const auto& set = bundle.*slot.member;
    if (!set) throw ValidationError("bundle has no set '" + std::string(key) + "'");
    return *set;
  }
  if (key == "q") return union_q(bundle);
  if (key == "xy") return union_xy(bundle);
  if (key == "z") return union_z(bundle);
  throw ValidationError("unknown bundle set '" + std::string(key) +
                        "' (expected xT, q0, q1, x0, x1, z0, z1, q, xy or z)");
}

}  // namespace confsel
