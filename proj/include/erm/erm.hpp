#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "erm/ctl.hpp"
#include "erm/distribution.hpp"
#include "erm/graph.hpp"

namespace erm {

struct ErmConfig {
  double lambda = 1.0;
  double mu = 1.0;
  double theta_min = kDefaultThetaMin;
  double theta_max = kDefaultThetaMax;
  double eps_conf = 1e-9;
  double eps_err = kDefaultEpsErr;

  /// Throws InvalidParameter when a field is out of range.
  void validate() const;
  /// lambda = 0 is the outcome-only baseline.
  bool baseline() const { return lambda == 0.0; }

  friend bool operator==(const ErmConfig&, const ErmConfig&) = default;
};

/// Missing keys keep their defaults.
ErmConfig erm_config_from_json(const nlohmann::json& doc);
nlohmann::json erm_config_to_json(const ErmConfig& cfg);
/// Reads the `erm` object of a scenario file (defaults if absent).
ErmConfig load_erm_config(const std::string& scenario_path);

struct LossBreakdown {
  double task = 0.0;
  double epistemic = 0.0;
  double consistency = 0.0;
  double total = 0.0;
};

/// D_KL(predicted || observed_do) in nats. Returns +infinity when predicted
/// puts mass where observed_do has none.
double epistemic_regret(const Distribution& predicted, const Distribution& observed_do);

LossBreakdown total_loss(double task_loss, const CausalGraph& graph, const Distribution& predicted,
                         const Distribution& observed_do, const ErmConfig& cfg);

/// The task succeeded while the model's interventional prediction was wrong.
bool detect_aleatoric_success(double task_loss, double regret, const ErmConfig& cfg, double task_tolerance = 0.0);

/// s / (s + r + eps_conf).
double revision_confidence(std::size_t support, std::size_t refute, double eps_conf);

/// Belief revision against the log. Asserted claims missing from the graph
/// are inserted before their weight is updated.
CausalGraph erm_revise(const CausalGraph& graph, const std::vector<CausalClaim>& hypothesis, const CtlStore& log,
                       const ErmConfig& cfg);

struct AgmReport {
  bool success = true;
  bool inclusion = true;
  /// nullopt when the evidence contradicted something and vacuity does not apply.
  std::optional<bool> vacuity;
  bool consistency = true;

  bool ok() const { return success && inclusion && vacuity.value_or(true) && consistency; }
};

AgmReport check_agm_postulates(const CausalGraph& before, const std::vector<CausalClaim>& hypothesis,
                               const CtlStore& log, const ErmConfig& cfg, const CausalGraph& after);

}  // namespace erm
