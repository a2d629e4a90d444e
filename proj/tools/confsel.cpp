#include "confsel/dataset.hpp"
#include "confsel/error.hpp"
#include "confsel/estimation.hpp"
#include "confsel/io.hpp"
#include "confsel/rng.hpp"
#include "confsel/selection.hpp"
#include "confsel/simulation.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace confsel;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

/// Outputs are collected in memory and written only after the command
/// succeeded, so a failing run leaves nothing behind.
struct Outputs {
  fs::path dir;
  std::vector<std::pair<std::string, std::string>> files;
  nlohmann::json manifest;

  void add(std::string name, std::string contents) { files.emplace_back(std::move(name), std::move(contents)); }

  void commit() {
    fs::create_directories(dir);
    nlohmann::json listed = nlohmann::json::object();
    for (const auto& [name, contents] : files) listed[name] = sha256_hex(contents);
    manifest["outputs"] = listed;
    for (const auto& [name, contents] : files) io::write_atomic(dir / name, contents);
    io::write_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
  }
};

nlohmann::json input_entry(const fs::path& path, const std::string& contents) {
  return {{"path", path.string()}, {"sha256", sha256_hex(contents)}};
}

struct Common {
  std::string out = "confsel-out";
  std::uint64_t seed = kDefaultSeed;
};

struct DataArgs {
  std::string data;
  std::string schema;
};

struct Loaded {
  Dataset ds;
  nlohmann::json inputs;
};

Loaded load(const DataArgs& a) {
  const std::string data_text = io::read_text(a.data);
  const std::string schema_text = io::read_text(a.schema);
  auto ds = validate_dataset(io::parse_csv(data_text), io::parse_schema(schema_text));
  nlohmann::json inputs = nlohmann::json::array();
  inputs.push_back(input_entry(a.data, data_text));
  inputs.push_back(input_entry(a.schema, schema_text));
  return {std::move(ds), std::move(inputs)};
}

nlohmann::json base_manifest(const std::string& command, std::uint64_t seed, const std::vector<std::string>& argv) {
  return {{"tool", "confsel"}, {"version", kVersion}, {"command", command}, {"seed", seed}, {"argv", argv}};
}

struct SelectArgs {
  DataArgs data;
  Common common;
  std::string algorithm = "both";
  std::string backend;
  double alpha = 0.10;
  double threshold_continuous = 100.0;
  double threshold_ordered = 0.5;
  double threshold_binary = 0.5;
  std::optional<int> subsample;
};

std::unique_ptr<RelevanceFilter> build_filter(const SelectArgs& a, const Dataset& ds) {
  std::string backend = a.backend;
  if (backend.empty()) {
    bool all_continuous = true;
    for (const auto& c : ds.columns()) all_continuous = all_continuous && c.kind.is_continuous();
    backend = all_continuous && ds.outcome_kind() == ResponseKind::Continuous ? "sdr" : "kernel";
  }
  if (backend == "sdr") {
    sdr::EliminationOptions opts;
    opts.alpha = a.alpha;
    return std::make_unique<SdrFilter>(opts);
  }
  if (backend != "kernel") throw ValidationError("unknown backend '" + backend + "' (expected sdr or kernel)");
  kernel::ThresholdPolicy policy;
  policy.continuous = a.threshold_continuous;
  policy.ordered = a.threshold_ordered;
  policy.unordered = a.threshold_binary;
  kernel::OptimizerConfig config;
  config.subsample = a.subsample;
  return std::make_unique<KernelFilter>(policy, config);
}

int cmd_select(const SelectArgs& a, const std::vector<std::string>& argv) {
  auto loaded = load(a.data);
  const auto& ds = loaded.ds;
  const auto filter = build_filter(a, ds);
  const auto bundle = run_selection(ds, *filter, parse_algorithm(a.algorithm), SelectionSettings{a.common.seed});
  for (const auto& w : bundle.provenance.warnings) std::cerr << "warning: " << w << "\n";

  Outputs out{a.common.out, {}, base_manifest("select", a.common.seed, argv)};
  out.manifest["inputs"] = loaded.inputs;
  out.manifest["settings"] = bundle.provenance.settings;
  out.manifest["settings"]["algorithm"] = a.algorithm;
  out.manifest["settings"]["backend"] = filter->name();
  out.add("bundle.json", bundle_to_json(bundle, ds.columns()).dump(2) + "\n");
  const std::string listing = bundle_listing(bundle, ds.columns());
  out.add("bundle.txt", listing);
  out.commit();
  std::cout << listing;
  return 0;
}

struct EstimateArgs {
  DataArgs data;
  Common common;
  std::optional<std::string> set;
  std::string bundle;
  std::string bundle_set;
  std::string mode = "both";
  std::string estimand = "ate";
  bool scale = false;
};

std::vector<std::string> expand(const std::string& choice, std::vector<std::string> both) {
  if (choice == "both") return both;
  return {choice};
}

int cmd_estimate(const EstimateArgs& a, const std::vector<std::string>& argv) {
  auto loaded = load(a.data);
  const auto& ds = loaded.ds;
  IndexSet set;
  nlohmann::json set_spec;
  if (!a.bundle.empty()) {
    if (a.set) throw ValidationError("give either --set or --bundle, not both");
    if (a.bundle_set.empty()) throw ValidationError("--bundle needs --bundle-set (xT, q0, q1, x0, x1, z0, z1, q, xy, z)");
    const std::string text = io::read_text(a.bundle);
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("cannot parse bundle " + a.bundle + ": " + e.what());
    }
    set = bundle_set(bundle_from_json(doc, ds.columns()), a.bundle_set);
    loaded.inputs.push_back(input_entry(a.bundle, text));
    set_spec = {{"bundle_set", a.bundle_set}};
  } else {
    if (!a.set) throw ValidationError("estimate needs --set or --bundle");
    std::vector<int> members;
    std::string_view rest = *a.set;
    while (!rest.empty()) {
      auto comma = rest.find(',');
      std::string_view name = rest.substr(0, comma);
      while (!name.empty() && name.front() == ' ') name.remove_prefix(1);
      while (!name.empty() && name.back() == ' ') name.remove_suffix(1);
      if (!name.empty()) members.push_back(ds.column_index(name));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    set = IndexSet(std::move(members));
    set_spec = {{"set", *a.set}};
  }

  EstimateOptions opts;
  opts.scale_normalize = a.scale;
  std::string csv = effect_csv_header();
  for (const auto& e : expand(a.estimand, {"ate", "att"}))
    for (const auto& m : expand(a.mode, {"norm", "pscore"}))
      csv += effect_csv_row(estimate_effect(ds, set, parse_estimand(e), parse_mode(m), opts), ds.columns());

  Outputs out{a.common.out, {}, base_manifest("estimate", a.common.seed, argv)};
  out.manifest["inputs"] = loaded.inputs;
  out.manifest["settings"] = {{"mode", a.mode}, {"estimand", a.estimand}, {"scale_normalize", a.scale}};
  out.manifest["settings"].update(set_spec);
  out.add("estimates.csv", csv);
  out.commit();
  std::cout << csv;
  return 0;
}

struct SimulateArgs {
  std::string scenario;
  Common common;
  bool seed_given = false;
  std::optional<int> replications;
  std::optional<int> n;
  int jobs = 1;
  bool progress = false;
};

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv) {
  const std::string text = io::read_text(a.scenario);
  auto config = sim::ScenarioConfig::parse(text);
  if (a.seed_given) config.seed = a.common.seed;
  if (a.replications) config.replications = *a.replications;
  if (a.n) config.n = *a.n;
  config.validate();

  const auto start = std::chrono::steady_clock::now();
  std::function<void(int)> tick;
  std::atomic<int> done{0};
  if (a.progress)
    tick = [&](int) {
      int d = ++done;
      if (d % 10 == 0 || d == config.replications)
        std::cerr << "\r" << d << "/" << config.replications << " replications" << std::flush;
    };
  sim::SimulationReport report;
  try {
    report = sim::run_study(config, a.jobs, tick);
  } catch (...) {
    if (a.progress) std::cerr << "\n";
    throw;
  }
  if (a.progress) std::cerr << "\n";
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  Outputs out{a.common.out, {}, base_manifest("simulate", config.seed, argv)};
  out.manifest["inputs"] = nlohmann::json::array({input_entry(a.scenario, text)});
  out.manifest["scenario"] = config.to_text();
  out.manifest["completed"] = report.completed;
  out.manifest["failures"] = report.failures;
  out.manifest["failure_log"] = report.failure_log;
  out.manifest["wall_time_seconds"] = wall;
  out.manifest["jobs"] = a.jobs;
  out.add("table2.csv", sim::table2_csv(report));
  out.add("table3.csv", sim::table3_csv(report));
  out.add("replications.csv", sim::replications_csv(report));
  out.add("scenario.txt", config.to_text());
  out.commit();
  std::cout << "selection rates (%)\n" << sim::table2_csv(report) << "\nestimation\n" << sim::table3_csv(report);
  return 0;
}

std::string aligned(const std::string& csv) {
  auto table = io::parse_csv(csv);
  std::vector<std::size_t> width(table.header.size(), 0);
  auto widen = [&](const std::vector<std::string>& row) {
    for (std::size_t k = 0; k < row.size() && k < width.size(); ++k) width[k] = std::max(width[k], row[k].size());
  };
  widen(table.header);
  for (const auto& r : table.rows) widen(r);
  std::string out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t k = 0; k < row.size(); ++k) {
      out += row[k];
      if (k + 1 < row.size()) out += std::string(width[k] - row[k].size() + 2, ' ');
    }
    out += "\n";
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
  return out;
}

struct ReportArgs {
  std::string run;
  DataArgs data;
};

int cmd_report(const ReportArgs& a) {
  if (!a.run.empty()) {
    const fs::path dir = a.run;
    std::cout << "Selection success rates (%)\n" << aligned(io::read_text(dir / "table2.csv")) << "\n";
    std::cout << "Estimation of the average effect\n" << aligned(io::read_text(dir / "table3.csv"));
    return 0;
  }
  if (a.data.data.empty() || a.data.schema.empty()) throw ValidationError("report needs --run or --data with --schema");
  const auto loaded = load(a.data);
  const auto& ds = loaded.ds;
  std::string csv = "column,kind,mean,sd,min,max\n";
  for (const auto& s : summarize(ds))
    csv += s.name + "," + s.kind.to_string() + "," + io::format_double(s.mean) + "," + io::format_double(s.sd) + "," +
           io::format_double(s.min) + "," + io::format_double(s.max) + "\n";
  std::cout << "n = " << ds.n() << ", treated = " << ds.n_treated() << ", p = " << ds.p() << "\n" << aligned(csv);
  return 0;
}

void add_data(CLI::App* cmd, DataArgs& d, bool required) {
  auto* data = cmd->add_option("--data", d.data, "CSV data file");
  auto* schema = cmd->add_option("--schema", d.schema, "schema sidecar");
  if (required) {
    data->required();
    schema->required();
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Confounder subset selection and matching estimators"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  std::vector<std::string> args(argv, argv + argc);

  SelectArgs sel;
  auto* select = app.add_subcommand("select", "Run Algorithms A and/or B");
  add_data(select, sel.data, true);
  select->add_option("--algorithm", sel.algorithm, "a, b or both")->check(CLI::IsMember({"a", "b", "both"}));
  select->add_option("--backend", sel.backend, "sdr or kernel (default: sdr when all covariates and the outcome are continuous)")
      ->check(CLI::IsMember({"sdr", "kernel"}));
  select->add_option("--alpha", sel.alpha, "level of the coordinate tests");
  select->add_option("--threshold-continuous", sel.threshold_continuous, "in units of the column SD");
  select->add_option("--threshold-ordered", sel.threshold_ordered);
  select->add_option("--threshold-binary", sel.threshold_binary, "threshold for unordered covariates");
  select->add_option("--subsample", sel.subsample, "run bandwidth CV on this many rows");
  select->add_option("--seed", sel.common.seed);
  select->add_option("--out", sel.common.out, "output directory");

  EstimateArgs est;
  auto* estimate = app.add_subcommand("estimate", "Estimate an average effect by nearest-neighbour matching");
  add_data(estimate, est.data, true);
  estimate->add_option("--set", est.set, "comma-separated covariate names");
  estimate->add_option("--bundle", est.bundle, "bundle.json written by select");
  estimate->add_option("--bundle-set", est.bundle_set, "xT, q0, q1, x0, x1, z0, z1, q, xy or z");
  estimate->add_option("--mode", est.mode)->check(CLI::IsMember({"norm", "pscore", "both"}));
  estimate->add_option("--estimand", est.estimand)->check(CLI::IsMember({"ate", "att", "atc", "both"}));
  estimate->add_flag("--scale", est.scale, "divide matching columns by their SD");
  estimate->add_option("--seed", est.common.seed);
  estimate->add_option("--out", est.common.out, "output directory");

  SimulateArgs simu;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation scenario");
  simulate->add_option("--scenario", simu.scenario, "scenario config file")->required();
  auto* seed_opt = simulate->add_option("--seed", simu.common.seed, "overrides the scenario seed");
  simulate->add_option("--replications", simu.replications);
  simulate->add_option("--n", simu.n);
  simulate->add_option("--jobs", simu.jobs, "worker threads")->check(CLI::PositiveNumber);
  simulate->add_flag("--progress", simu.progress);
  simulate->add_option("--out", simu.common.out, "output directory");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Print a simulation run or a dataset summary");
  report->add_option("--run", rep.run, "directory written by simulate");
  add_data(report, rep.data, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }
  simu.seed_given = seed_opt->count() > 0;

  try {
    if (*select) return cmd_select(sel, args);
    if (*estimate) return cmd_estimate(est, args);
    if (*simulate) return cmd_simulate(simu, args);
    if (*report) return cmd_report(rep);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const BackendError& e) {
    std::cerr << "backend error: " << e.what() << "\n";
    return 3;
  } catch (const SimulationError& e) {
    std::cerr << "simulation failed: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
