#pragma once

#include "confsel/dataset.hpp"

#include <Eigen/Dense>

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace confsel {

/// P(T = 1 | S) = 1 / (1 + exp(-(intercept + S * coefficients))).
struct PropensityModel {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  int iterations = 0;
  double gradient_norm = 0.0;

  Eigen::VectorXd scores(const Eigen::MatrixXd& s) const;
};

struct LogisticOptions {
  double gradient_tol = 1e-8;
  int max_iter = 100;
  double separation_norm = 1e3;
};

/// Maximum likelihood by iteratively reweighted least squares with step
/// halving. The gradient is that of the mean log-likelihood.
PropensityModel fit_logistic(const Eigen::VectorXi& t, const Eigen::MatrixXd& s, const LogisticOptions& opts = {});

enum class MatchDirection {
  BothArms,            // every unit gets a match from the other arm
  ControlsToTreated,   // treated units get control matches
  TreatedToControls,   // control units get treated matches
};

struct MatchAssignment {
  std::vector<int> match;           // -1 where the unit needs no match
  std::vector<double> distance;     // Euclidean; 0 where match is -1
  std::vector<int> multiplicity;    // times each unit serves as a match
};

/// One nearest neighbour with replacement; exact ties in squared distance
/// go to the lowest row index.
MatchAssignment match_nearest(const Eigen::MatrixXd& values, const Eigen::VectorXi& t, MatchDirection direction);

enum class Estimand { ATE, ATT, ATC };
enum class MatchMode { VectorNorm, PropensityScore };

std::string to_string(Estimand e);
std::string to_string(MatchMode m);
Estimand parse_estimand(std::string_view text);
MatchMode parse_mode(std::string_view text);

struct EffectEstimate {
  Estimand estimand = Estimand::ATE;
  MatchMode mode = MatchMode::VectorNorm;
  IndexSet covariate_set;
  double value = 0.0;
  int n = 0;
  int n_treated = 0;
};

struct EstimateOptions {
  /// Divide each matching column by its sample SD before vector-norm matching.
  bool scale_normalize = false;
  LogisticOptions logistic;
};

EffectEstimate estimate_effect(const Dataset& ds, const IndexSet& set, Estimand estimand, MatchMode mode,
                               const EstimateOptions& opts = {});
EffectEstimate estimate_ate(const Dataset& ds, const IndexSet& set, MatchMode mode, const EstimateOptions& opts = {});
EffectEstimate estimate_att(const Dataset& ds, const IndexSet& set, MatchMode mode, const EstimateOptions& opts = {});
EffectEstimate estimate_atc(const Dataset& ds, const IndexSet& set, MatchMode mode, const EstimateOptions& opts = {});

/// estimand,mode,covariate_set,value,n,n_treated
std::string effect_csv_header();
std::string effect_csv_row(const EffectEstimate& e, std::span<const Column> columns);

}  // namespace confsel
