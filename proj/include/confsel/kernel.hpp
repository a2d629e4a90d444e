#pragma once

#include "confsel/dataset.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

/// Conditional-independence screening for mixed continuous and discrete
/// covariates with the local-constant generalized product-kernel estimator.
/// Covariates whose cross-validated bandwidth reaches the analyst's
/// threshold are treated as smoothed out and dropped.
namespace confsel::kernel {

/// Column kinds plus a positive scale per column (sample SD for continuous
/// columns) used for bandwidth bounds and the continuous threshold.
struct KernelMeta {
  std::vector<VariableKind> kinds;
  std::vector<double> scales;

  std::size_t size() const { return kinds.size(); }
};

KernelMeta make_meta(const Eigen::MatrixXd& x, std::span<const VariableKind> kinds);

/// (c - 1) / c for unordered, 1 for ordered.
double discrete_upper(const VariableKind& kind);

/// Per-column smoothing parameters: h for continuous columns, lambda for
/// discrete ones.
struct BandwidthVector {
  std::vector<double> values;

  /// Continuous h in [h_min_factor * scale, inf), ordered lambda in [0, 1],
  /// unordered lambda in [0, (c - 1) / c].
  bool admissible(const KernelMeta& meta, double h_min_factor = 1e-3) const;
};

struct ThresholdPolicy {
  /// Multiplied by the column's sample SD.
  double continuous = 100.0;
  double ordered = 0.5;
  double unordered = 0.5;

  void validate(const KernelMeta& meta) const;
  double threshold_for(const KernelMeta& meta, std::size_t column) const;
};

/// W_h(x_i, x_j) * L_lambda(x_i, x_j) with a standard Gaussian w.
double kernel_weight(std::span<const double> row_i, std::span<const double> row_j, const BandwidthVector& bw,
                     const KernelMeta& meta);

/// Weighted average of `u` at `query`; throws BackendError when every
/// weight is zero.
double kernel_regress(const Eigen::VectorXd& u, const Eigen::MatrixXd& x, const BandwidthVector& bw,
                      const KernelMeta& meta, std::span<const double> query);

/// Leave-one-out least-squares cross-validation criterion. Rows whose
/// leave-one-out neighborhood is empty contribute (U_i - mean(U_{-i}))^2.
/// All-discrete designs with a small category grid are evaluated by
/// per-axis transforms over the grid; everything else by a pairwise sweep.
class CvObjective {
 public:
  CvObjective(const Eigen::VectorXd& u, const Eigen::MatrixXd& x, KernelMeta meta);
  ~CvObjective();
  CvObjective(CvObjective&&) noexcept;
  CvObjective& operator=(CvObjective&&) noexcept;

  double operator()(const BandwidthVector& bw) const;
  bool uses_grid() const;
  const KernelMeta& meta() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

double loo_cv(const Eigen::VectorXd& u, const Eigen::MatrixXd& x, const BandwidthVector& bw, const KernelMeta& meta);

struct OptimizerConfig {
  int restarts = 4;
  double rel_tol = 1e-4;
  int max_iter = 500;
  double h_min_factor = 1e-3;
  /// Box upper bound for continuous h, in units of the column scale.
  double h_max_factor = 1e8;
  int min_n = 25;
  /// When set and n exceeds it, CV runs on a seeded random subsample of
  /// this many rows.
  std::optional<int> subsample;
};

struct BandwidthFit {
  BandwidthVector bandwidths;
  double cv = 0.0;
  std::vector<double> start_cv;  // CV at each multistart initial point
  int evaluations = 0;
};

BandwidthFit select_bandwidths(const Eigen::VectorXd& u, const Eigen::MatrixXd& x, const KernelMeta& meta,
                               const OptimizerConfig& config, std::uint64_t seed);

/// Positions whose bandwidth is strictly below the threshold for its kind.
IndexSet screen(const BandwidthVector& bw, const ThresholdPolicy& policy, const KernelMeta& meta);

/// column,kind,bandwidth,threshold,retained
std::string bandwidth_csv(std::span<const std::string> names, const BandwidthVector& bw,
                          const ThresholdPolicy& policy, const KernelMeta& meta);

}  // namespace confsel::kernel
