#include "confsel/simulation.hpp"

#include "confsel/error.hpp"
#include "confsel/io.hpp"
#include "confsel/parallel.hpp"
#include "confsel/selection.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

namespace confsel::sim {

namespace {

constexpr double kTrueEffect = 2.0;

template <class E>
E parse_enum(std::string_view key, std::string_view text, std::initializer_list<std::pair<const char*, E>> options) {
  std::string known;
  for (const auto& [name, value] : options) {
    if (text == name) return value;
    known += (known.empty() ? "" : ", ") + std::string(name);
  }
  throw ValidationError("scenario key '" + std::string(key) + "': unknown value '" + std::string(text) +
                        "' (expected " + known + ")");
}

double parse_real(std::string_view key, const std::string& text) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ValidationError("scenario key '" + std::string(key) + "': not a number: '" + text + "'");
  return v;
}

std::int64_t parse_int(std::string_view key, const std::string& text) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ValidationError("scenario key '" + std::string(key) + "': not an integer: '" + text + "'");
  return v;
}

std::uint64_t parse_u64(std::string_view key, const std::string& text) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ValidationError("scenario key '" + std::string(key) + "': not an unsigned integer: '" + text + "'");
  return v;
}

bool parse_bool(std::string_view key, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ValidationError("scenario key '" + std::string(key) + "': expected true or false");
}

/// Compensated running sum.
class NeumaierSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

ErrorSummary summarize_errors(const std::vector<double>& estimates) {
  ErrorSummary s;
  const double r = static_cast<double>(estimates.size());
  if (estimates.empty()) return s;
  NeumaierSum sum, sq;
  for (double v : estimates) {
    sum.add(v);
    sq.add((v - kTrueEffect) * (v - kTrueEffect));
  }
  const double mean = sum.value() / r;
  s.bias = mean - kTrueEffect;
  s.mse = sq.value() / r;
  double var_ml = 0.0;
  if (estimates.size() > 1) {
    NeumaierSum dev;
    for (double v : estimates) dev.add((v - mean) * (v - mean));
    const double var = dev.value() / (r - 1.0);
    s.sd = std::sqrt(var);
    var_ml = var * (r - 1.0) / r;
  }
  s.bias2_plus_var = s.bias * s.bias + var_ml;
  return s;
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

std::string percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string set_cell(const IndexSet& s) {
  std::string out;
  for (int k : s) {
    if (!out.empty()) out += ';';
    out += std::to_string(k + 1);
  }
  return out;
}

std::unique_ptr<RelevanceFilter> make_filter(const ScenarioConfig& c) {
  BackendChoice b = c.backend;
  if (b == BackendChoice::Auto) b = c.setup == CovariateSetup::Continuous ? BackendChoice::Sdr : BackendChoice::Kernel;
  if (b == BackendChoice::Sdr) {
    sdr::EliminationOptions opts;
    opts.alpha = c.alpha;
    return std::make_unique<SdrFilter>(opts);
  }
  kernel::ThresholdPolicy policy;
  policy.continuous = c.threshold_continuous;
  policy.ordered = c.threshold_ordered;
  policy.unordered = c.threshold_binary;
  kernel::OptimizerConfig opt;
  opt.restarts = c.restarts;
  opt.subsample = c.subsample;
  return std::make_unique<KernelFilter>(policy, opt);
}

}  // namespace

std::string to_string(CovariateSetup s) {
  switch (s) {
    case CovariateSetup::Continuous: return "continuous";
    case CovariateSetup::Discrete: return "discrete";
    case CovariateSetup::Mixed: return "mixed";
  }
  return "continuous";
}

std::string to_string(OutcomeModel m) { return m == OutcomeModel::Linear ? "linear" : "nonlinear"; }

std::string to_string(BackendChoice b) {
  switch (b) {
    case BackendChoice::Auto: return "auto";
    case BackendChoice::Sdr: return "sdr";
    case BackendChoice::Kernel: return "kernel";
  }
  return "auto";
}

void ScenarioConfig::validate() const {
  if (n < 100) throw ValidationError("scenario: n must be at least 100");
  if (replications < 1) throw ValidationError("scenario: replications must be at least 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("scenario: alpha must lie in (0, 1)");
  if (!(threshold_continuous > 0.0)) throw ValidationError("scenario: threshold_continuous must be positive");
  if (!(threshold_ordered > 0.0 && threshold_ordered <= 1.0))
    throw ValidationError("scenario: threshold_ordered must lie in (0, 1]");
  if (!(threshold_binary > 0.0 && threshold_binary <= 0.5))
    throw ValidationError("scenario: threshold_binary must lie in (0, 0.5]");
  if (restarts < 1) throw ValidationError("scenario: restarts must be at least 1");
  if (subsample && *subsample < 25) throw ValidationError("scenario: subsample must be at least 25");
  if (backend == BackendChoice::Sdr && setup != CovariateSetup::Continuous)
    throw ValidationError("scenario: the sdr backend needs the continuous setup");
}

ScenarioConfig ScenarioConfig::parse(std::string_view text) {
  ScenarioConfig c;
  for (const auto& [key, value] : io::parse_key_values(text)) {
    if (key == "setup")
      c.setup = parse_enum<CovariateSetup>(key, value, {{"continuous", CovariateSetup::Continuous},
                                                        {"discrete", CovariateSetup::Discrete},
                                                        {"mixed", CovariateSetup::Mixed}});
    else if (key == "outcome")
      c.outcome = parse_enum<OutcomeModel>(key, value,
                                           {{"linear", OutcomeModel::Linear}, {"nonlinear", OutcomeModel::Nonlinear}});
    else if (key == "backend")
      c.backend = parse_enum<BackendChoice>(
          key, value, {{"auto", BackendChoice::Auto}, {"sdr", BackendChoice::Sdr}, {"kernel", BackendChoice::Kernel}});
    else if (key == "n")
      c.n = static_cast<int>(parse_int(key, value));
    else if (key == "replications")
      c.replications = static_cast<int>(parse_int(key, value));
    else if (key == "seed")
      c.seed = parse_u64(key, value);
    else if (key == "alpha")
      c.alpha = parse_real(key, value);
    else if (key == "threshold_continuous")
      c.threshold_continuous = parse_real(key, value);
    else if (key == "threshold_ordered")
      c.threshold_ordered = parse_real(key, value);
    else if (key == "threshold_binary")
      c.threshold_binary = parse_real(key, value);
    else if (key == "restarts")
      c.restarts = static_cast<int>(parse_int(key, value));
    else if (key == "subsample")
      c.subsample = value == "off" ? std::nullopt : std::optional<int>(static_cast<int>(parse_int(key, value)));
    else if (key == "estimate")
      c.estimate = parse_bool(key, value);
    else
      throw ValidationError("scenario: unknown key '" + key + "'");
  }
  c.validate();
  return c;
}

std::string ScenarioConfig::to_text() const {
  std::ostringstream os;
  os << "setup = " << to_string(setup) << "\n"
     << "outcome = " << to_string(outcome) << "\n"
     << "n = " << n << "\n"
     << "replications = " << replications << "\n"
     << "seed = " << seed << "\n"
     << "backend = " << to_string(backend) << "\n"
     << "alpha = " << io::format_double(alpha) << "\n"
     << "threshold_continuous = " << io::format_double(threshold_continuous) << "\n"
     << "threshold_ordered = " << io::format_double(threshold_ordered) << "\n"
     << "threshold_binary = " << io::format_double(threshold_binary) << "\n"
     << "restarts = " << restarts << "\n"
     << "subsample = " << (subsample ? std::to_string(*subsample) : "off") << "\n"
     << "estimate = " << (estimate ? "true" : "false") << "\n";
  return os.str();
}

const TruthSets& truth() {
  static const TruthSets t{IndexSet::one_based({1, 2, 3, 4, 7}), IndexSet::one_based({1, 2, 7}),
                           IndexSet::one_based({1, 2, 5, 6, 8}), IndexSet::one_based({1, 2, 8}),
                           {IndexSet::one_based({1, 2, 7}), IndexSet::one_based({1, 2, 8})}};
  return t;
}

SelectionFlags evaluate_selection(const IndexSet& selected, const IndexSet& target, const TruthSets& t) {
  SelectionFlags f;
  f.sufficient = t.witnesses[0].is_subset_of(selected) || t.witnesses[1].is_subset_of(selected);
  f.includes_target = target.is_subset_of(selected);
  f.equals_target = target == selected;
  return f;
}

double latent_binary_correlation() { return std::sin(0.35 * std::numbers::pi); }

std::vector<Column> covariate_columns(CovariateSetup setup) {
  std::vector<Column> cols;
  for (int k = 1; k <= kCovariates; ++k) {
    bool continuous = setup == CovariateSetup::Continuous ||
                      (setup == CovariateSetup::Mixed && (k == 2 || k == 4 || k == 5));
    cols.push_back({"X" + std::to_string(k), continuous ? VariableKind::continuous() : VariableKind::unordered(2)});
  }
  return cols;
}

Eigen::MatrixXd gen_covariates(CovariateSetup setup, int n, Rng& rng) {
  const auto cols = covariate_columns(setup);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);
  const bool pair_continuous = setup == CovariateSetup::Continuous;
  const double rho = pair_continuous ? 0.7 : latent_binary_correlation();
  const double tail = std::sqrt(1.0 - rho * rho);
  Eigen::MatrixXd x(n, kCovariates);
  for (int i = 0; i < n; ++i) {
    for (int k = 0; k < kCovariates; ++k) {
      if (k == 6 || k == 7) continue;
      x(i, k) = cols[static_cast<std::size_t>(k)].kind.is_continuous() ? normal(rng) : (coin(rng) ? 1.0 : 0.0);
    }
    const double z7 = normal(rng);
    const double z8 = rho * z7 + tail * normal(rng);
    if (pair_continuous) {
      x(i, 6) = z7;
      x(i, 7) = z8;
    } else {
      x(i, 6) = z7 > 0.0 ? 1.0 : 0.0;
      x(i, 7) = z8 > 0.0 ? 1.0 : 0.0;
    }
  }
  return x;
}

Eigen::VectorXd treatment_probability(const Eigen::MatrixXd& x, CovariateSetup setup) {
  double a0 = 0.0, a = 1.0;
  if (setup == CovariateSetup::Discrete) a0 = 5.0, a = 2.0;
  if (setup == CovariateSetup::Mixed) a0 = 3.0, a = 2.0;
  Eigen::VectorXd p(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double index = a * (x(i, 0) + x(i, 1) + x(i, 2) + x(i, 3) + x(i, 6));
    p(i) = 1.0 / (1.0 + std::exp(a0 - index));
  }
  return p;
}

Eigen::VectorXi gen_treatment(const Eigen::MatrixXd& x, CovariateSetup setup, Rng& rng) {
  const Eigen::VectorXd p = treatment_probability(x, setup);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Eigen::VectorXi t(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) t(i) = unif(rng) < p(i) ? 1 : 0;
  return t;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> outcome_means(const Eigen::MatrixXd& x, CovariateSetup setup,
                                                          OutcomeModel model) {
  const auto cols = covariate_columns(setup);
  auto b = [&](int k1) { return cols[static_cast<std::size_t>(k1 - 1)].kind.is_continuous() ? 2.0 : 4.0; };
  Eigen::VectorXd base(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    auto X = [&](int k1) { return x(i, k1 - 1); };
    double m = 0.0;
    if (model == OutcomeModel::Linear) {
      for (int k : {1, 2, 5, 6, 8}) m += b(k) * X(k);
    } else if (setup == CovariateSetup::Continuous) {
      const double s = X(1) + 2.0;
      m = 7.0 * X(6) / (0.5 + s * s) + 2.0 * X(2) + 2.0 * X(5) + 2.0 * X(8);
    } else {
      const double s = X(1) + 1.4;
      m = -6.0 * X(6) / std::log(s * s) + b(2) * X(2) + b(5) * X(5) + b(8) * X(8);
    }
    base(i) = m;
  }
  return {base.array() + 2.0, base.array() + 4.0};
}

Outcomes gen_outcomes(const Eigen::MatrixXd& x, const Eigen::VectorXi& t, CovariateSetup setup, OutcomeModel model,
                      Rng& rng) {
  auto [m0, m1] = outcome_means(x, setup, model);
  std::normal_distribution<double> normal(0.0, 1.0);
  Outcomes o{std::move(m0), std::move(m1), Eigen::VectorXd(x.rows())};
  for (Eigen::Index i = 0; i < x.rows(); ++i) o.y0(i) += normal(rng);
  for (Eigen::Index i = 0; i < x.rows(); ++i) o.y1(i) += normal(rng);
  for (Eigen::Index i = 0; i < x.rows(); ++i) o.y(i) = t(i) == 1 ? o.y1(i) : o.y0(i);
  return o;
}

Dataset simulate_dataset(CovariateSetup setup, OutcomeModel model, int n, Rng& rng) {
  Eigen::MatrixXd x = gen_covariates(setup, n, rng);
  Eigen::VectorXi t = gen_treatment(x, setup, rng);
  Outcomes o = gen_outcomes(x, t, setup, model, rng);
  return Dataset(covariate_columns(setup), std::move(x), std::move(t), std::move(o.y),
                 PotentialOutcomes{std::move(o.y0), std::move(o.y1)});
}

ReplicationResult run_replication(const ScenarioConfig& config, int index) {
  ReplicationResult r;
  r.index = index;
  const std::uint64_t rep_seed = derive_seed(config.seed, static_cast<std::uint64_t>(index));
  try {
    Rng data_rng(derive_seed(rep_seed, "data"));
    const Dataset ds = simulate_dataset(config.setup, config.outcome, config.n, data_rng);
    const auto filter = make_filter(config);
    SelectionSettings settings{derive_seed(rep_seed, "select")};
    const auto bundle = run_selection(ds, *filter, Algorithm::Both, settings);
    for (std::size_t k = 0; k < kSelectionKeys.size(); ++k) r.selected[k] = bundle_set(bundle, kSelectionKeys[k]);
    const auto u = union_bundle(bundle);
    r.matching_sets = {IndexSet::all(ds.p()), *bundle.xT, u.q, u.xy, u.z};
    if (config.estimate) {
      for (std::size_t s = 0; s < r.matching_sets.size(); ++s) {
        r.norm[s] = estimate_ate(ds, r.matching_sets[s], MatchMode::VectorNorm).value;
        r.pscore[s] = estimate_ate(ds, r.matching_sets[s], MatchMode::PropensityScore).value;
      }
    }
  } catch (const std::exception& e) {
    r.failed = true;
    r.error = e.what();
  }
  return r;
}

SimulationReport aggregate(const ScenarioConfig& config, std::vector<ReplicationResult> reps) {
  SimulationReport rep;
  rep.config = config;
  const auto& t = truth();
  const std::array<const IndexSet*, 7> targets{&t.xT, &t.q, &t.q, &t.xY, &t.xY, &t.z, &t.z};
  std::array<int, 7> suff{}, inc{}, eq{};
  std::array<std::vector<double>, 5> norm, pscore, card;
  for (const auto& r : reps) {
    if (r.failed) {
      ++rep.failures;
      rep.failure_log.push_back("replication " + std::to_string(r.index + 1) + ": " + r.error);
      continue;
    }
    ++rep.completed;
    for (std::size_t k = 0; k < 7; ++k) {
      const auto f = evaluate_selection(r.selected[k], *targets[k], t);
      suff[k] += f.sufficient;
      inc[k] += f.includes_target;
      eq[k] += f.equals_target;
    }
    for (std::size_t s = 0; s < 5; ++s) {
      norm[s].push_back(r.norm[s]);
      pscore[s].push_back(r.pscore[s]);
      card[s].push_back(static_cast<double>(r.matching_sets[s].size()));
    }
  }
  if (rep.completed > 0) {
    for (std::size_t k = 0; k < 7; ++k) {
      rep.sufficient[k] = 100.0 * suff[k] / rep.completed;
      rep.includes[k] = 100.0 * inc[k] / rep.completed;
      rep.equals[k] = 100.0 * eq[k] / rep.completed;
    }
  }
  for (std::size_t s = 0; s < 5; ++s) {
    EstimationRow row;
    row.set = kEstimationSets[s];
    if (config.estimate) {
      row.norm = summarize_errors(norm[s]);
      row.pscore = summarize_errors(pscore[s]);
    }
    row.median_cardinality = median(card[s]);
    rep.estimation.push_back(row);
  }
  rep.replications = std::move(reps);
  return rep;
}

SimulationReport run_study(const ScenarioConfig& config, int jobs, const std::function<void(int)>& on_done) {
  config.validate();
  std::vector<ReplicationResult> reps(static_cast<std::size_t>(config.replications));
  parallel_for(config.replications, jobs, [&](int i) {
    reps[static_cast<std::size_t>(i)] = run_replication(config, i);
    if (on_done) on_done(i);
  });
  auto report = aggregate(config, std::move(reps));
  enforce_failure_cap(report);
  return report;
}

void enforce_failure_cap(const SimulationReport& report) {
  const int total = report.completed + report.failures;
  if (report.failures * 20 <= total) return;
  std::string msg = std::to_string(report.failures) + " of " + std::to_string(total) +
                    " replications failed (more than 5%)";
  for (std::size_t k = 0; k < report.failure_log.size() && k < 10; ++k) msg += "\n  " + report.failure_log[k];
  throw SimulationError(msg);
}

std::string table2_csv(const SimulationReport& r) {
  std::string out = "condition,X_T,Q_0,Q_1,X_0,X_1,Z_0,Z_1\n";
  auto row = [&](const char* name, const std::array<double, 7>& v) {
    out += name;
    for (double x : v) out += "," + percent(x);
    out += "\n";
  };
  row("sufficient", r.sufficient);
  row("includes", r.includes);
  row("equals", r.equals);
  return out;
}

std::string table3_csv(const SimulationReport& r) {
  std::string out =
      "set,norm_bias,norm_sd,norm_mse,pscore_bias,pscore_sd,pscore_mse,median_cardinality,norm_bias2_var,"
      "pscore_bias2_var\n";
  for (const auto& row : r.estimation) {
    auto cells = [&](const ErrorSummary& s) {
      if (!r.config.estimate || r.completed == 0) return std::string(",,");
      return fixed(s.bias) + "," + (s.sd ? fixed(*s.sd) : "") + "," + fixed(s.mse);
    };
    auto consistency = [&](const ErrorSummary& s) {
      return r.config.estimate && r.completed > 0 ? fixed(s.bias2_plus_var) : std::string();
    };
    out += row.set + "," + cells(row.norm) + "," + cells(row.pscore) + "," + io::format_double(row.median_cardinality) +
           "," + consistency(row.norm) + "," + consistency(row.pscore) + "\n";
  }
  return out;
}

std::string replications_csv(const SimulationReport& r) {
  std::string out = "replication,failed";
  for (const char* k : kSelectionKeys) out += std::string(",") + k;
  for (const char* s : kEstimationSets) out += std::string(",norm_") + s;
  for (const char* s : kEstimationSets) out += std::string(",pscore_") + s;
  out += "\n";
  for (const auto& rep : r.replications) {
    out += std::to_string(rep.index + 1) + "," + (rep.failed ? "1" : "0");
    for (const auto& s : rep.selected) out += "," + (rep.failed ? std::string() : set_cell(s));
    const bool show = !rep.failed && r.config.estimate;
    for (double v : rep.norm) out += "," + (show ? io::format_double(v) : std::string());
    for (double v : rep.pscore) out += "," + (show ? io::format_double(v) : std::string());
    out += "\n";
  }
  return out;
}

}  // namespace confsel::sim
