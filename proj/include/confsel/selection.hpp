#pragma once

#include "confsel/dataset.hpp"
#include "confsel/kernel.hpp"
#include "confsel/rng.hpp"
#include "confsel/sdr.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace confsel {

struct FilterResult {
  IndexSet retained;  // positions within the submitted matrix
  std::vector<std::string> notes;
};

/// Decides which covariates a response depends on, given the others.
class RelevanceFilter {
 public:
  virtual ~RelevanceFilter() = default;

  virtual FilterResult filter(const Eigen::VectorXd& response, ResponseKind kind, const Eigen::MatrixXd& x,
                              std::span<const VariableKind> kinds, std::uint64_t seed) const = 0;
  virtual std::string name() const = 0;
  virtual std::map<std::string, std::string> settings() const = 0;
};

class SdrFilter final : public RelevanceFilter {
 public:
  explicit SdrFilter(sdr::EliminationOptions opts = {}) : opts_(std::move(opts)) {}

  FilterResult filter(const Eigen::VectorXd& response, ResponseKind kind, const Eigen::MatrixXd& x,
                      std::span<const VariableKind> kinds, std::uint64_t seed) const override;
  std::string name() const override { return "sdr"; }
  std::map<std::string, std::string> settings() const override;

 private:
  sdr::EliminationOptions opts_;
};

class KernelFilter final : public RelevanceFilter {
 public:
  explicit KernelFilter(kernel::ThresholdPolicy policy = {}, kernel::OptimizerConfig config = {})
      : policy_(policy), config_(config) {}

  FilterResult filter(const Eigen::VectorXd& response, ResponseKind kind, const Eigen::MatrixXd& x,
                      std::span<const VariableKind> kinds, std::uint64_t seed) const override;
  std::string name() const override { return "kernel"; }
  std::map<std::string, std::string> settings() const override;

 private:
  kernel::ThresholdPolicy policy_;
  kernel::OptimizerConfig config_;
};

enum class Algorithm { A, B, Both };

Algorithm parse_algorithm(std::string_view text);

struct SelectionSettings {
  std::uint64_t seed = kDefaultSeed;
};

/// Step 1: T on all covariates gives X_T. Step 2: Y on X_T within each arm
/// gives Q_0 and Q_1.
SelectionBundle run_algorithm_a(const Dataset& ds, const RelevanceFilter& filter, const SelectionSettings& settings);

/// Step 1: Y on all covariates within each arm gives X_0 and X_1. Step 2: T
/// on X_t over the full sample gives Z_t.
SelectionBundle run_algorithm_b(const Dataset& ds, const RelevanceFilter& filter, const SelectionSettings& settings);

SelectionBundle run_selection(const Dataset& ds, const RelevanceFilter& filter, Algorithm algorithm,
                              const SelectionSettings& settings);

/// Seed handed to the filter invocation with the given step label.
std::uint64_t step_seed(std::uint64_t master, std::string_view label);

nlohmann::json bundle_to_json(const SelectionBundle& bundle, std::span<const Column> columns);
SelectionBundle bundle_from_json(const nlohmann::json& doc, std::span<const Column> columns);

/// One line per present set: "X_T = {ageM, soc}".
std::string bundle_listing(const SelectionBundle& bundle, std::span<const Column> columns);

/// Looks up a set by key (xT, q0, q1, x0, x1, z0, z1, q, xy, z).
IndexSet bundle_set(const SelectionBundle& bundle, std::string_view key);

}  // namespace confsel
