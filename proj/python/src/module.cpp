#include "confsel/error.hpp"
#include "confsel/estimation.hpp"
#include "confsel/selection.hpp"
#include "confsel/simulation.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

namespace py = pybind11;
using namespace confsel;

namespace {

std::vector<Column> make_columns(const std::vector<std::string>& kinds, std::optional<std::vector<std::string>> names) {
  std::vector<Column> cols;
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    std::string name = names ? names->at(k) : "X" + std::to_string(k + 1);
    cols.push_back({name, VariableKind::parse(kinds[k])});
  }
  return cols;
}

Dataset make_dataset(const Eigen::MatrixXd& x, const Eigen::VectorXi& t, const Eigen::VectorXd& y,
                     const std::vector<std::string>& kinds, std::optional<std::vector<std::string>> names) {
  if (static_cast<Eigen::Index>(kinds.size()) != x.cols())
    throw ValidationError("kinds must list one entry per column of x");
  return Dataset(make_columns(kinds, names), x, t, y);
}

std::vector<int> as_list(const IndexSet& s) { return s.members(); }

py::dict bundle_dict(const SelectionBundle& b) {
  py::dict out;
  const std::pair<const char*, const std::optional<IndexSet>*> slots[] = {
      {"xT", &b.xT}, {"q0", &b.q0}, {"q1", &b.q1}, {"x0", &b.x0}, {"x1", &b.x1}, {"z0", &b.z0}, {"z1", &b.z1}};
  for (const auto& [key, set] : slots)
    if (*set) out[key] = as_list(**set);
  out["warnings"] = b.provenance.warnings;
  out["seeds"] = b.provenance.seeds;
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Covariate selection and matching estimators";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<BackendError>(m, "BackendError", PyExc_RuntimeError);
  py::register_exception<SimulationError>(m, "SimulationError", PyExc_RuntimeError);

  m.attr("DEFAULT_SEED") = kDefaultSeed;

  m.def(
      "simulate",
      [](const std::string& setup, const std::string& outcome, int n, std::uint64_t seed) {
        auto config = sim::ScenarioConfig::parse("setup = " + setup + "\noutcome = " + outcome + "\n");
        Rng rng(seed);
        auto ds = sim::simulate_dataset(config.setup, config.outcome, n, rng);
        py::dict out;
        out["x"] = ds.x();
        out["t"] = Eigen::VectorXi(ds.treatment());
        out["y"] = ds.outcome();
        out["y0"] = ds.potential()->y0;
        out["y1"] = ds.potential()->y1;
        std::vector<std::string> kinds, names;
        for (const auto& c : ds.columns()) {
          kinds.push_back(c.kind.to_string());
          names.push_back(c.name);
        }
        out["kinds"] = kinds;
        out["names"] = names;
        return out;
      },
      py::arg("setup") = "continuous", py::arg("outcome") = "linear", py::arg("n") = 500,
      py::arg("seed") = kDefaultSeed, "Draw one dataset from a simulation scenario.");

  m.def(
      "select",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXi& t, const Eigen::VectorXd& y,
         const std::vector<std::string>& kinds, const std::string& algorithm, const std::string& backend,
         double alpha, double threshold_continuous, double threshold_ordered, double threshold_unordered,
         std::uint64_t seed) {
        auto ds = make_dataset(x, t, y, kinds, std::nullopt);
        SelectionSettings settings;
        settings.seed = seed;
        std::unique_ptr<RelevanceFilter> filter;
        if (backend == "sdr") {
          sdr::EliminationOptions opts;
          opts.alpha = alpha;
          filter = std::make_unique<SdrFilter>(opts);
        } else if (backend == "kernel") {
          kernel::ThresholdPolicy policy{threshold_continuous, threshold_ordered, threshold_unordered};
          filter = std::make_unique<KernelFilter>(policy);
        } else {
          throw ValidationError("unknown backend '" + backend + "' (expected sdr or kernel)");
        }
        SelectionBundle b;
        {
          py::gil_scoped_release release;
          b = run_selection(ds, *filter, parse_algorithm(algorithm), settings);
        }
        return bundle_dict(b);
      },
      py::arg("x"), py::arg("t"), py::arg("y"), py::arg("kinds"), py::arg("algorithm") = "both",
      py::arg("backend") = "sdr", py::arg("alpha") = 0.10, py::arg("threshold_continuous") = 100.0,
      py::arg("threshold_ordered") = 0.5, py::arg("threshold_unordered") = 0.5, py::arg("seed") = kDefaultSeed,
      "Run covariate selection; sets are lists of 0-based column positions.");

  m.def(
      "estimate",
      [](const Eigen::MatrixXd& x, const Eigen::VectorXi& t, const Eigen::VectorXd& y, const std::vector<int>& set,
         const std::string& estimand, const std::string& mode, bool scale) {
        std::vector<std::string> kinds(static_cast<std::size_t>(x.cols()), "continuous");
        auto ds = make_dataset(x, t, y, kinds, std::nullopt);
        EstimateOptions opts;
        opts.scale_normalize = scale;
        return estimate_effect(ds, IndexSet(set), parse_estimand(estimand), parse_mode(mode), opts).value;
      },
      py::arg("x"), py::arg("t"), py::arg("y"), py::arg("set"), py::arg("estimand") = "ate",
      py::arg("mode") = "norm", py::arg("scale") = false, "Nearest-neighbour matching estimate.");

  m.def(
      "fit_logistic",
      [](const Eigen::VectorXi& t, const Eigen::MatrixXd& s) {
        auto fit = fit_logistic(t, s);
        return py::make_tuple(fit.intercept, Eigen::VectorXd(fit.coefficients));
      },
      py::arg("t"), py::arg("s"), "Logistic regression by IRLS; returns (intercept, coefficients).");

  m.def(
      "match_nearest",
      [](const Eigen::MatrixXd& values, const Eigen::VectorXi& t) {
        return match_nearest(values, t, MatchDirection::BothArms).match;
      },
      py::arg("values"), py::arg("t"), "Nearest opposite-arm unit for every row.");

  m.def(
      "run_study",
      [](const std::string& scenario, int jobs) {
        auto config = sim::ScenarioConfig::parse(scenario);
        sim::SimulationReport r;
        {
          py::gil_scoped_release release;
          r = sim::run_study(config, jobs);
        }
        py::dict out;
        out["table2"] = sim::table2_csv(r);
        out["table3"] = sim::table3_csv(r);
        out["replications"] = sim::replications_csv(r);
        out["failures"] = r.failures;
        return out;
      },
      py::arg("scenario"), py::arg("jobs") = 1, "Run a simulation study from key = value scenario text.");

  m.def("latent_binary_correlation", &sim::latent_binary_correlation);
}
