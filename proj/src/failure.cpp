#include "erm/failure.hpp"

#include <algorithm>
#include <numeric>

namespace erm {

namespace {

struct ModeInfo {
  FailureKind kind;
  const char* name;
  std::string guard;
};

const std::vector<ModeInfo>& mode_table() {
  static const std::vector<ModeInfo> table{
      {FailureKind::RungCollapse, "RungCollapse",
       "Verify evidence level matches query level before concluding causation."},
      {FailureKind::ConfounderBlind, "ConfounderBlind",
       "Enumerate potential common causes of X and Y before accepting X → Y."},
      {FailureKind::TransitionCostOmit, "TransitionCostOmit",
       "Explicitly calculate buffer/transition time between sequential phases."},
      {FailureKind::PrematureCertainty, "PrematureCertainty",
       "When confidence > 0.9 on first pass, search for at least one alternative."},
      {FailureKind::NegativeConstraintIgnore, "NegativeConstraintIgnore",
       "List constraints that prohibit actions before generating a plan."},
  };
  return table;
}

const ModeInfo& info(FailureKind k) {
  for (const auto& m : mode_table()) {
    if (m.kind == k) return m;
  }
  throw InvalidParameter("unknown failure kind");
}

double mean(std::span<const double> xs) {
  return xs.empty() ? 0.0 : std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

bool has_confounder(const Scm& truth, const CausalClaim& claim) {
  if (!truth.has_variable(claim.from) || !truth.has_variable(claim.to)) return false;
  auto pa_to = truth.parents(claim.to);
  if (std::find(pa_to.begin(), pa_to.end(), claim.from) != pa_to.end()) return false;  // the claim is true
  for (const auto& p : truth.parents(claim.from)) {
    if (std::find(pa_to.begin(), pa_to.end(), p) != pa_to.end()) return true;
  }
  return false;
}

}  // namespace

std::string to_string(FailureKind k) { return info(k).name; }

FailureKind failure_kind_from_string(const std::string& s) {
  for (const auto& m : mode_table()) {
    if (s == m.name) return m.kind;
  }
  throw FormatError("unknown failure mode '" + s + "'");
}

const std::string& guard_text(FailureKind k) { return info(k).guard; }

std::optional<FailureKind> classify(const std::vector<CausalClaim>& hypothesis, double delta,
                                    const FailureContext& context, double eps_err) {
  if (!(delta > eps_err)) throw PreconditionViolation("only failures (delta > eps_err) are classified");
  if (context.truth) {
    for (const auto& c : hypothesis) {
      if (has_confounder(*context.truth, c)) return FailureKind::ConfounderBlind;
    }
  }
  if (context.predicted && context.observational && context.predicted->same_domain(*context.observational) &&
      total_variation(*context.predicted, *context.observational) <= kRungCollapseTolerance) {
    return FailureKind::RungCollapse;
  }
  if (context.confidence && *context.confidence > 0.9 && context.first_attempt) return FailureKind::PrematureCertainty;
  if (context.tags.count(kTagTransition)) return FailureKind::TransitionCostOmit;
  if (context.tags.count(kTagNegativeConstraint)) return FailureKind::NegativeConstraintIgnore;
  return std::nullopt;
}

GuardVerdict evaluate_guard(const Guard& guard, std::span<const double> regrets_after, std::size_t window) {
  if (regrets_after.size() < window) {
    throw InsufficientWindow("guard evaluation needs " + std::to_string(window) + " post-injection episodes, got " +
                             std::to_string(regrets_after.size()));
  }
  return mean(regrets_after) > guard.regret_before ? GuardVerdict::Retract : GuardVerdict::Keep;
}

std::optional<Guard> FailureRegistry::record_and_maybe_inject(FailureKind mode, double regret, std::uint64_t t) {
  auto& s = stats_[mode];
  double r = std::max(regret, 0.0);
  s.ewma_regret = s.count == 0 ? r : cfg_.alpha * r + (1 - cfg_.alpha) * s.ewma_regret;
  ++s.count;
  if (s.count < cfg_.freq_threshold || guard_active(mode)) return std::nullopt;

  Guard g;
  g.mode = mode;
  g.text = guard_text(mode);
  g.active = true;
  g.injected_at = t;
  std::vector<double> recent(recent_.begin(), recent_.end());
  g.regret_before = recent.empty() ? s.ewma_regret : mean(recent);
  guards_.push_back(g);
  return g;
}

std::vector<FailureKind> FailureRegistry::observe_episode(double regret) {
  std::vector<FailureKind> retracted;
  for (auto& g : guards_) {
    if (!g.active || g.settled) continue;
    g.after_window.push_back(regret);
    if (g.after_window.size() < cfg_.window) continue;
    g.regret_after = mean(g.after_window);
    if (evaluate_guard(g, g.after_window, cfg_.window) == GuardVerdict::Retract) {
      g.active = false;
      g.retracted = true;
      // A later activation needs a fresh threshold crossing.
      stats_[g.mode].count = 0;
      retracted.push_back(g.mode);
    } else {
      g.settled = true;
    }
  }
  recent_.push_back(regret);
  while (recent_.size() > cfg_.window) recent_.pop_front();
  return retracted;
}

std::vector<std::string> FailureRegistry::active_guards() const {
  std::vector<const Guard*> active;
  for (const auto& g : guards_) {
    if (g.active) active.push_back(&g);
  }
  std::stable_sort(active.begin(), active.end(),
                   [](const Guard* a, const Guard* b) { return a->injected_at < b->injected_at; });
  std::vector<std::string> out;
  for (const auto* g : active) out.push_back(g->text);
  return out;
}

bool FailureRegistry::guard_active(FailureKind mode) const {
  return std::any_of(guards_.begin(), guards_.end(), [&](const Guard& g) { return g.active && g.mode == mode; });
}

nlohmann::json FailureRegistry::to_json() const {
  nlohmann::json doc;
  doc["config"] = {{"alpha", cfg_.alpha}, {"window", cfg_.window}, {"freq_threshold", cfg_.freq_threshold}};
  doc["modes"] = nlohmann::json::object();
  for (const auto& [k, s] : stats_) doc["modes"][to_string(k)] = {{"count", s.count}, {"ewma_regret", s.ewma_regret}};
  doc["guards"] = nlohmann::json::array();
  for (const auto& g : guards_) {
    nlohmann::json j{{"mode", to_string(g.mode)},
                     {"text", g.text},
                     {"active", g.active},
                     {"retracted", g.retracted},
                     {"settled", g.settled},
                     {"regret_before", g.regret_before},
                     {"regret_after", g.regret_after},
                     {"after_window", g.after_window}};
    j["injected_at"] = g.injected_at ? nlohmann::json(*g.injected_at) : nlohmann::json(nullptr);
    doc["guards"].push_back(j);
  }
  doc["recent"] = std::vector<double>(recent_.begin(), recent_.end());
  return doc;
}

FailureRegistry FailureRegistry::from_json(const nlohmann::json& doc) {
  try {
    RegistryConfig cfg;
    if (doc.contains("config")) {
      const auto& c = doc["config"];
      cfg.alpha = c.value("alpha", cfg.alpha);
      cfg.window = c.value("window", cfg.window);
      cfg.freq_threshold = c.value("freq_threshold", cfg.freq_threshold);
    }
    FailureRegistry reg(cfg);
    const auto modes = doc.value("modes", nlohmann::json::object());
    for (const auto& [name, s] : modes.items()) {
      reg.stats_[failure_kind_from_string(name)] = {s.at("count").get<std::size_t>(),
                                                    s.at("ewma_regret").get<double>()};
    }
    const auto guards = doc.value("guards", nlohmann::json::array());
    for (const auto& j : guards) {
      Guard g;
      g.mode = failure_kind_from_string(j.at("mode").get<std::string>());
      g.text = j.at("text").get<std::string>();
      g.active = j.at("active").get<bool>();
      g.retracted = j.value("retracted", false);
      g.settled = j.value("settled", false);
      if (!j.at("injected_at").is_null()) g.injected_at = j.at("injected_at").get<std::uint64_t>();
      g.regret_before = j.value("regret_before", 0.0);
      g.regret_after = j.value("regret_after", 0.0);
      g.after_window = j.value("after_window", std::vector<double>{});
      reg.guards_.push_back(std::move(g));
    }
    for (double r : doc.value("recent", std::vector<double>{})) reg.recent_.push_back(r);
    return reg;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed failure registry: ") + e.what());
  }
}

}  // namespace erm
