#include "erm/erm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

namespace erm {

void ErmConfig::validate() const {
  if (!(lambda >= 0.0)) throw InvalidParameter("lambda must be nonnegative");
  if (!(mu >= 0.0)) throw InvalidParameter("mu must be nonnegative");
  if (!(theta_min >= 0.0 && theta_max <= 1.0 && theta_min < theta_max)) {
    throw InvalidParameter("thresholds must satisfy 0 <= theta_min < theta_max <= 1");
  }
  if (!(eps_conf > 0.0)) throw InvalidParameter("eps_conf must be positive");
  if (!(eps_err >= 0.0)) throw InvalidParameter("eps_err must be nonnegative");
}

ErmConfig erm_config_from_json(const nlohmann::json& doc) {
  ErmConfig cfg;
  try {
    cfg.lambda = doc.value("lambda", cfg.lambda);
    cfg.mu = doc.value("mu", cfg.mu);
    cfg.theta_min = doc.value("theta_min", cfg.theta_min);
    cfg.theta_max = doc.value("theta_max", cfg.theta_max);
    cfg.eps_conf = doc.value("eps_conf", cfg.eps_conf);
    cfg.eps_err = doc.value("eps_err", cfg.eps_err);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed erm config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json erm_config_to_json(const ErmConfig& cfg) {
  return {{"lambda", cfg.lambda},       {"mu", cfg.mu},           {"theta_min", cfg.theta_min},
          {"theta_max", cfg.theta_max}, {"eps_conf", cfg.eps_conf}, {"eps_err", cfg.eps_err}};
}

ErmConfig load_erm_config(const std::string& scenario_path) {
  std::ifstream in(scenario_path);
  if (!in) throw FormatError("cannot read scenario '" + scenario_path + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(scenario_path + ": " + e.what());
  }
  return doc.contains("erm") ? erm_config_from_json(doc["erm"]) : ErmConfig{};
}

double epistemic_regret(const Distribution& predicted, const Distribution& observed_do) {
  if (!predicted.same_domain(observed_do)) throw DomainMismatch("KL over different domains");
  double kl = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    double p = predicted.probs()[i];
    double q = observed_do.probs()[i];
    if (p == 0.0) continue;
    if (q == 0.0) return std::numeric_limits<double>::infinity();
    kl += p * std::log(p / q);
  }
  return std::max(kl, 0.0);
}

LossBreakdown total_loss(double task_loss, const CausalGraph& graph, const Distribution& predicted,
                         const Distribution& observed_do, const ErmConfig& cfg) {
  if (!(task_loss >= 0.0)) throw InvalidParameter("task loss must be nonnegative");
  LossBreakdown out;
  out.task = task_loss;
  out.epistemic = epistemic_regret(predicted, observed_do);
  out.consistency = consistency_loss(graph);
  // 0 * inf would be NaN; the baseline ignores the epistemic term entirely.
  double weighted_epistemic = cfg.lambda == 0.0 ? 0.0 : cfg.lambda * out.epistemic;
  out.total = out.task + weighted_epistemic + cfg.mu * out.consistency;
  return out;
}

bool detect_aleatoric_success(double task_loss, double regret, const ErmConfig& cfg, double task_tolerance) {
  return task_loss <= task_tolerance && regret > cfg.eps_err;
}

double revision_confidence(std::size_t support, std::size_t refute, double eps_conf) {
  double s = static_cast<double>(support);
  double r = static_cast<double>(refute);
  return s / (s + r + eps_conf);
}

namespace {

// Weight updates without the final cycle breaking.
CausalGraph revise_weights(const CausalGraph& graph, const std::vector<CausalClaim>& hypothesis, const CtlStore& log,
                           const ErmConfig& cfg) {
  CausalGraph g = graph;
  for (const auto& claim : hypothesis) {
    g.add_variable(claim.from);
    g.add_variable(claim.to);
    auto ev = log.evidence(claim, cfg.eps_err);
    double conf = revision_confidence(ev.support, ev.refute, cfg.eps_conf);
    if (conf < cfg.theta_min) {
      g.remove_edge(claim.from, claim.to);
    } else if (conf > cfg.theta_max) {
      // A sub-threshold edge is lifted from theta_min so that it is believed.
      double w = std::max(g.weight(claim.from, claim.to).value_or(kInitialEdgeWeight), cfg.theta_min);
      g.set_edge(claim.from, claim.to, std::min(1.0, w + 0.1));
    } else {
      g.set_edge(claim.from, claim.to, conf);
    }
  }
  return g;
}

// Claims the evidence backs above theta_max. Cycle breaking spares them.
std::set<CausalClaim> accepted_claims(const std::vector<CausalClaim>& hypothesis, const CtlStore& log,
                                      const ErmConfig& cfg) {
  std::set<CausalClaim> out;
  for (const auto& claim : hypothesis) {
    auto ev = log.evidence(claim, cfg.eps_err);
    if (revision_confidence(ev.support, ev.refute, cfg.eps_conf) > cfg.theta_max) out.insert(claim);
  }
  return out;
}

bool reaches(const std::set<CausalClaim>& edges, const std::string& from, const std::string& to) {
  std::set<std::string> seen{from};
  std::vector<std::string> stack{from};
  while (!stack.empty()) {
    std::string v = stack.back();
    stack.pop_back();
    if (v == to) return true;
    for (const auto& e : edges)
      if (e.from == v && seen.insert(e.to).second) stack.push_back(e.to);
  }
  return false;
}

}  // namespace

CausalGraph erm_revise(const CausalGraph& graph, const std::vector<CausalClaim>& hypothesis, const CtlStore& log,
                       const ErmConfig& cfg) {
  return enforce_dag(revise_weights(graph, hypothesis, log, cfg), accepted_claims(hypothesis, log, cfg));
}

AgmReport check_agm_postulates(const CausalGraph& before, const std::vector<CausalClaim>& hypothesis,
                               const CtlStore& log, const ErmConfig& cfg, const CausalGraph& after) {
  AgmReport report;
  BeliefSet k_before = belief_set(before);
  BeliefSet k_after = belief_set(after);

  // An accepted claim may only be missing when the accepted claims close a
  // cycle through it, i.e. the evidence itself is inconsistent.
  auto accepted = accepted_claims(hypothesis, log, cfg);
  for (const auto& claim : accepted)
    if (!k_after.contains(claim) && !reaches(accepted, claim.to, claim.from)) report.success = false;

  bool contradicted = false;
  for (const auto& claim : hypothesis) {
    auto ev = log.evidence(claim, cfg.eps_err);
    if (revision_confidence(ev.support, ev.refute, cfg.eps_conf) < cfg.theta_min) contradicted = true;
  }
  if (consistency_loss(revise_weights(before, hypothesis, log, cfg)) > 0.0) contradicted = true;

  for (const auto& c : k_after.claims) {
    bool asserted = std::find(hypothesis.begin(), hypothesis.end(), c) != hypothesis.end();
    if (!k_before.contains(c) && !asserted) report.inclusion = false;
  }

  if (!contradicted) {
    report.vacuity = std::includes(k_after.claims.begin(), k_after.claims.end(), k_before.claims.begin(),
                                   k_before.claims.end());
  }
  report.consistency = after.is_acyclic();
  return report;
}

}  // namespace erm
