#pragma once

#include "confsel/dataset.hpp"
#include "confsel/estimation.hpp"
#include "confsel/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

/// Ten-covariate data-generating processes with known minimal confounder
/// sets, and a replication harness scoring selection and matching.
namespace confsel::sim {

enum class CovariateSetup { Continuous, Discrete, Mixed };
enum class OutcomeModel { Linear, Nonlinear };
enum class BackendChoice { Auto, Sdr, Kernel };

std::string to_string(CovariateSetup s);
std::string to_string(OutcomeModel m);
std::string to_string(BackendChoice b);

struct ScenarioConfig {
  CovariateSetup setup = CovariateSetup::Continuous;
  OutcomeModel outcome = OutcomeModel::Linear;
  int n = 500;
  int replications = 100;
  std::uint64_t seed = kDefaultSeed;
  /// Auto: SDR for the all-continuous setup, kernel otherwise.
  BackendChoice backend = BackendChoice::Auto;
  double alpha = 0.10;
  double threshold_continuous = 100.0;
  double threshold_ordered = 0.5;
  double threshold_binary = 0.5;
  int restarts = 4;
  std::optional<int> subsample;
  bool estimate = true;

  void validate() const;
  /// key = value text; unknown keys are rejected.
  static ScenarioConfig parse(std::string_view text);
  std::string to_text() const;
};

struct TruthSets {
  IndexSet xT, q, xY, z;
  std::array<IndexSet, 2> witnesses;
};

/// X_T = {1,2,3,4,7}, Q = {1,2,7}, X_Y = {1,2,5,6,8}, Z = {1,2,8} (1-based).
const TruthSets& truth();

struct SelectionFlags {
  bool sufficient = false;
  bool includes_target = false;
  bool equals_target = false;
};

SelectionFlags evaluate_selection(const IndexSet& selected, const IndexSet& target, const TruthSets& t = truth());

constexpr int kCovariates = 10;

std::vector<Column> covariate_columns(CovariateSetup setup);
Eigen::MatrixXd gen_covariates(CovariateSetup setup, int n, Rng& rng);
Eigen::VectorXd treatment_probability(const Eigen::MatrixXd& x, CovariateSetup setup);
Eigen::VectorXi gen_treatment(const Eigen::MatrixXd& x, CovariateSetup setup, Rng& rng);

struct Outcomes {
  Eigen::VectorXd y0, y1, y;
};

/// Noise-free outcome means (epsilon = 0) for control and treated arms.
std::pair<Eigen::VectorXd, Eigen::VectorXd> outcome_means(const Eigen::MatrixXd& x, CovariateSetup setup,
                                                          OutcomeModel model);
Outcomes gen_outcomes(const Eigen::MatrixXd& x, const Eigen::VectorXi& t, CovariateSetup setup, OutcomeModel model,
                      Rng& rng);

Dataset simulate_dataset(CovariateSetup setup, OutcomeModel model, int n, Rng& rng);

/// Latent correlation whose dichotomization at 0 gives a binary
/// correlation of 0.7.
double latent_binary_correlation();

inline constexpr std::array<const char*, 7> kSelectionKeys{"xT", "q0", "q1", "x0", "x1", "z0", "z1"};
inline constexpr std::array<const char*, 5> kEstimationSets{"X", "X_T", "Q", "X_Y", "Z"};

struct ReplicationResult {
  int index = 0;
  bool failed = false;
  std::string error;
  std::array<IndexSet, 7> selected;        // by kSelectionKeys
  std::array<IndexSet, 5> matching_sets;   // by kEstimationSets
  std::array<double, 5> norm{};            // ATE estimates
  std::array<double, 5> pscore{};
};

struct ErrorSummary {
  double bias = 0.0;
  std::optional<double> sd;
  double mse = 0.0;
  /// bias^2 + sd^2 (R - 1) / R
  double bias2_plus_var = 0.0;
};

struct EstimationRow {
  std::string set;
  ErrorSummary norm, pscore;
  double median_cardinality = 0.0;
};

struct SimulationReport {
  ScenarioConfig config;
  int completed = 0;
  int failures = 0;
  std::vector<std::string> failure_log;
  /// Percentages by kSelectionKeys.
  std::array<double, 7> sufficient{}, includes{}, equals{};
  std::vector<EstimationRow> estimation;
  std::vector<ReplicationResult> replications;
};

ReplicationResult run_replication(const ScenarioConfig& config, int index);

/// Replications run on `jobs` threads; the report does not depend on jobs.
/// Throws SimulationError when more than 5% of replications fail.
SimulationReport run_study(const ScenarioConfig& config, int jobs = 1,
                           const std::function<void(int)>& on_done = {});

/// Throws SimulationError when more than 5% of replications failed.
void enforce_failure_cap(const SimulationReport& report);

/// Aggregates finished replications (in index order) into a report.
SimulationReport aggregate(const ScenarioConfig& config, std::vector<ReplicationResult> reps);

std::string table2_csv(const SimulationReport& r);
std::string table3_csv(const SimulationReport& r);
std::string replications_csv(const SimulationReport& r);

}  // namespace confsel::sim
