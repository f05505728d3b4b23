#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "erm/scm.hpp"

namespace erm {

struct TxnStep {
  Intervention action;
  Intervention compensation;
  /// Deviation budget of the compensation.
  double epsilon = 0.0;
  double cost = 1.0;
  double time = 1.0;
};

struct PhysicalTransaction {
  std::string name;
  WorldState initial_state;
  std::vector<TxnStep> steps;
  std::optional<WorldState> final_state;

  /// Throws InvalidTransaction.
  void validate(const Scm& env) const;
  double total_budget(std::size_t upto) const;
};

using StateMetric = std::function<double(const WorldState&, const WorldState&)>;

/// Fraction of variables whose values differ. Both states must assign the
/// same variables.
double hamming_distance(const WorldState& a, const WorldState& b);

struct ExecOptions {
  /// 1-based step whose action is reported failed after it executes.
  std::optional<std::size_t> fail_at;
  /// 1-based steps whose compensation raises.
  std::set<std::size_t> poisoned;
  /// 1-based steps whose compensation perturbs one variable more than its
  /// budget allows.
  std::set<std::size_t> adversarial;
  std::uint64_t seed = 0;
};

struct TraceEvent {
  enum class Kind { Action, Compensation };
  Kind kind = Kind::Action;
  std::size_t step = 0;
  WorldState state;
  /// For compensations, distance to a perfect undo of the step.
  double deviation = 0.0;
};

struct TxnResult {
  enum class Status { Committed, RolledBack };
  Status status = Status::Committed;
  /// Final state when committed, recovery state when rolled back.
  WorldState state;
  double bound = 0.0;
  std::optional<std::size_t> failed_step;
  std::vector<TraceEvent> trace;
  double compensation_cost = 0.0;
  double compensation_time = 0.0;
};

/// Runs the steps in order. On a failed step every executed step is
/// compensated in reverse order. Throws CompensationFailure when a
/// compensation raises; the transaction is then poisoned and never committed.
TxnResult execute(const PhysicalTransaction& txn, const Scm& env, const ExecOptions& opts = {},
                  const StateMetric& metric = hamming_distance);

/// Measured d(recovery, initial) is within the declared bound.
bool verify_recovery_bound(const PhysicalTransaction& txn, const TxnResult& result,
                           const StateMetric& metric = hamming_distance);

PhysicalTransaction transaction_from_json(const nlohmann::json& doc);
std::vector<PhysicalTransaction> transactions_from_scenario(const nlohmann::json& scenario);

}  // namespace erm
