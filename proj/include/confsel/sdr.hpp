#pragma once

#include "confsel/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

/// Conditional-independence screening for continuous covariates: sliced
/// inverse regression plus marginal coordinate tests inside a backward
/// elimination loop.
namespace confsel::sdr {

/// Z = (X - center) * whitener, whitener the symmetric inverse square root
/// of the sample covariance (divisor n - 1).
struct StandardizedDesign {
  Eigen::MatrixXd z;
  Eigen::VectorXd center;
  Eigen::MatrixXd whitener;
  double condition_number = 1.0;
};

struct StandardizeOptions {
  double max_condition = 1e10;
};

StandardizedDesign standardize(const Eigen::MatrixXd& x, const StandardizeOptions& opts = {});

struct SirOptions {
  /// Continuous responses only; binary responses always use their 2 levels.
  /// Default: 10, reduced to floor(n / 20) for small n but never below 3.
  std::optional<int> slices;
  /// Level of the sequential dimension tests.
  double dim_level = 0.05;
  std::optional<int> dim_override;
};

struct SirFit {
  int slice_count = 0;
  std::vector<int> slice_of;      // slice label per observation
  Eigen::VectorXd slice_props;    // f_s, sums to 1
  Eigen::MatrixXd slice_means;    // h x p, rows are standardized slice means
  Eigen::MatrixXd candidate;      // sum_s f_s xi_s xi_s^T
  Eigen::VectorXd eigenvalues;    // descending
  Eigen::MatrixXd eigenvectors;   // columns match eigenvalues
  int dim = 0;                    // 0 only for degenerate fits
  bool degenerate = false;        // constant response
};

int default_slice_count(int n);

SirFit sir_fit(const StandardizedDesign& design, const Eigen::VectorXd& response, ResponseKind kind,
               const SirOptions& opts = {});

/// Leading `dim` SIR directions mapped back to original covariate
/// coordinates (p x dim, unit columns).
Eigen::MatrixXd original_directions(const StandardizedDesign& design, const SirFit& fit);

enum class NullApprox { MomentMatched, MonteCarloMixture };

struct MchOptions {
  NullApprox method = NullApprox::MomentMatched;
  int mc_draws = 100000;
  std::uint64_t mc_seed = 0x5eed5eedULL;
};

struct MchTestResult {
  int target = 0;
  double statistic = 0.0;
  std::vector<double> weights;  // eigenvalues of the estimated null covariance
  double p_value = 1.0;
  NullApprox method = NullApprox::MomentMatched;
  bool degenerate = false;
};

/// Marginal coordinate test that covariate `target` (0-based) contributes
/// nothing to the central subspace.
MchTestResult mch_test(const StandardizedDesign& design, const SirFit& fit, int target,
                       const MchOptions& opts = {});

struct EliminationStep {
  int round = 0;
  int removed = 0;  // 0-based position in the submitted matrix
  double p_value = 0.0;
};

struct EliminationResult {
  IndexSet retained;
  std::vector<EliminationStep> trace;
};

struct EliminationOptions {
  double alpha = 0.10;
  SirOptions sir;
  MchOptions mch;
  StandardizeOptions standardize;
};

EliminationResult backward_eliminate(const Eigen::VectorXd& response, ResponseKind kind, const Eigen::MatrixXd& x,
                                     std::span<const VariableKind> kinds, const EliminationOptions& opts = {});

/// round,removed_index,p_value with 1-based indices.
std::string trace_csv(const EliminationResult& result);

}  // namespace confsel::sdr
