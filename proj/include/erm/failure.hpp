#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "erm/distribution.hpp"
#include "erm/graph.hpp"
#include "erm/scm.hpp"

namespace erm {

enum class FailureKind {
  RungCollapse,
  ConfounderBlind,
  TransitionCostOmit,
  PrematureCertainty,
  NegativeConstraintIgnore,
};

inline constexpr FailureKind kAllFailureKinds[] = {
    FailureKind::RungCollapse, FailureKind::ConfounderBlind, FailureKind::TransitionCostOmit,
    FailureKind::PrematureCertainty, FailureKind::NegativeConstraintIgnore};

std::string to_string(FailureKind k);
FailureKind failure_kind_from_string(const std::string& s);
/// Corrective constraint injected into the meta-prompt for this mode.
const std::string& guard_text(FailureKind k);

/// Context tags that enable the plan-level modes.
inline constexpr const char* kTagTransition = "transition";
inline constexpr const char* kTagNegativeConstraint = "negative_constraint";

/// Evaluator-side facts about one failed step. `truth` is the environment's
/// model and is never shown to the agent.
struct FailureContext {
  const Scm* truth = nullptr;
  std::optional<Distribution> predicted;
  /// Observational P(outcome | target = value) under the environment.
  std::optional<Distribution> observational;
  std::optional<double> confidence;
  bool first_attempt = true;
  std::set<std::string> tags;
};

inline constexpr double kRungCollapseTolerance = 0.02;

/// Rule-based label for a failure (delta > eps_err). Rules are tried in the
/// order ConfounderBlind, RungCollapse, PrematureCertainty,
/// TransitionCostOmit, NegativeConstraintIgnore.
std::optional<FailureKind> classify(const std::vector<CausalClaim>& hypothesis, double delta,
                                    const FailureContext& context, double eps_err);

struct FailureModeStats {
  std::size_t count = 0;
  double ewma_regret = 0.0;
};

struct Guard {
  FailureKind mode = FailureKind::RungCollapse;
  std::string text;
  bool active = false;
  bool retracted = false;
  /// Set once the post-injection window has been judged and the guard kept.
  bool settled = false;
  std::optional<std::uint64_t> injected_at;
  double regret_before = 0.0;
  double regret_after = 0.0;
  std::vector<double> after_window;
};

enum class GuardVerdict { Keep, Retract };

/// Retract iff the mean post-injection regret exceeds guard.regret_before.
/// Needs at least `window` observations.
GuardVerdict evaluate_guard(const Guard& guard, std::span<const double> regrets_after, std::size_t window = 5);

struct RegistryConfig {
  double alpha = 0.3;
  std::size_t window = 5;
  std::size_t freq_threshold = 3;
};

class FailureRegistry {
 public:
  explicit FailureRegistry(RegistryConfig cfg = {}) : cfg_(cfg) {}

  const RegistryConfig& config() const { return cfg_; }

  /// Counts a failure. Returns the guard when this record activates one.
  std::optional<Guard> record_and_maybe_inject(FailureKind mode, double regret, std::uint64_t t);

  /// Feeds one episode's regret. Active guards collect it until their
  /// window fills, then are kept or retracted. Returns retracted modes.
  std::vector<FailureKind> observe_episode(double regret);

  /// Texts of active guards, oldest injection first.
  std::vector<std::string> active_guards() const;
  bool guard_active(FailureKind mode) const;

  const std::map<FailureKind, FailureModeStats>& stats() const { return stats_; }
  const std::vector<Guard>& guards() const { return guards_; }

  nlohmann::json to_json() const;
  static FailureRegistry from_json(const nlohmann::json& doc);

 private:
  RegistryConfig cfg_;
  std::map<FailureKind, FailureModeStats> stats_;
  std::vector<Guard> guards_;
  std::deque<double> recent_;
};

}  // namespace erm
