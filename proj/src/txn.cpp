#include "erm/txn.hpp"

#include <algorithm>
#include <cmath>

namespace erm {

namespace {

constexpr std::uint64_t kActionStream = 0xac7;
constexpr std::uint64_t kSlackStream = 0x51ac;

// Uniform integer in [0, n) from the counter noise source.
std::size_t draw_index(std::uint64_t seed, std::uint64_t var, std::uint64_t index, std::size_t n) {
  auto k = static_cast<std::size_t>(counter_uniform(seed, kSlackStream, var, index) * static_cast<double>(n));
  return std::min(k, n - 1);
}

}  // namespace

void PhysicalTransaction::validate(const Scm& env) const {
  for (const auto& v : env.variables()) {
    auto it = initial_state.assignment.find(v.name);
    if (it == initial_state.assignment.end()) throw InvalidTransaction("initial state misses '" + v.name + "'");
    if (std::find(v.domain.begin(), v.domain.end(), it->second) == v.domain.end()) {
      throw InvalidTransaction("initial value '" + it->second + "' not in domain of '" + v.name + "'");
    }
  }
  if (initial_state.assignment.size() != env.num_variables()) {
    throw InvalidTransaction("initial state assigns unknown variables");
  }
  for (std::size_t i = 0; i < steps.size(); ++i) {
    const auto& s = steps[i];
    std::string where = "step " + std::to_string(i + 1);
    try {
      env.validate_intervention(s.action);
      env.validate_intervention(s.compensation);
    } catch (const Error& e) {
      throw InvalidTransaction(where + ": " + e.what());
    }
    if (s.compensation.target.empty()) throw InvalidTransaction(where + " has no compensation");
    if (!(s.epsilon >= 0.0)) throw InvalidTransaction(where + ": epsilon must be nonnegative");
    if (!(s.cost > 0.0) || !(s.time > 0.0)) throw InvalidTransaction(where + ": compensation cost and time must be positive");
  }
}

double PhysicalTransaction::total_budget(std::size_t upto) const {
  double total = 0.0;
  for (std::size_t i = 0; i < std::min(upto, steps.size()); ++i) total += steps[i].epsilon;
  return total;
}

double hamming_distance(const WorldState& a, const WorldState& b) {
  if (a.assignment.size() != b.assignment.size()) throw DomainMismatch("states assign different variables");
  if (a.assignment.empty()) return 0.0;
  std::size_t diff = 0;
  for (const auto& [k, v] : a.assignment) {
    auto it = b.assignment.find(k);
    if (it == b.assignment.end()) throw DomainMismatch("states assign different variables");
    if (it->second != v) ++diff;
  }
  return static_cast<double>(diff) / static_cast<double>(a.assignment.size());
}

TxnResult execute(const PhysicalTransaction& txn, const Scm& env, const ExecOptions& opts, const StateMetric& metric) {
  txn.validate(env);
  if (opts.fail_at && (*opts.fail_at == 0 || *opts.fail_at > txn.steps.size())) {
    throw InvalidParameter("fail_at must name a step between 1 and " + std::to_string(txn.steps.size()));
  }

  TxnResult result;
  std::vector<WorldState> before;  // state before each executed action
  WorldState current = txn.initial_state;
  for (std::size_t i = 0; i < txn.steps.size(); ++i) {
    before.push_back(current);
    current = propagate_intervention(env, current, txn.steps[i].action, NoiseKey{opts.seed, kActionStream, i});
    result.trace.push_back({TraceEvent::Kind::Action, i + 1, current, 0.0});
    if (opts.fail_at && *opts.fail_at == i + 1) {
      result.failed_step = i + 1;
      break;
    }
  }

  if (!result.failed_step) {
    result.status = TxnResult::Status::Committed;
    result.state = current;
    return result;
  }

  const auto& vars = env.variables();
  for (std::size_t k = before.size(); k-- > 0;) {
    const auto& step = txn.steps[k];
    if (opts.poisoned.count(k + 1)) {
      throw CompensationFailure("compensation of step " + std::to_string(k + 1) + " failed; transaction poisoned");
    }
    // Perfect undo: revert what the action changed, then apply the compensation.
    const WorldState& pre = before[k];
    const WorldState& post = result.trace[k].state;
    WorldState undo = current;
    for (const auto& [name, value] : pre.assignment) {
      if (post.assignment.at(name) != value) undo.assignment[name] = value;
    }
    undo.assignment[step.compensation.target] = step.compensation.value;

    // Imperfect physical undo: perturb up to floor(eps |V|) variables.
    WorldState out = undo;
    const std::uint64_t salt = opts.seed * 1000003ULL + k;
    auto budget = static_cast<std::size_t>(std::floor(step.epsilon * static_cast<double>(vars.size()) + 1e-9));
    std::size_t perturb = draw_index(salt, 0, 0, budget + 1);
    if (opts.adversarial.count(k + 1)) perturb = budget + 1;
    perturb = std::min(perturb, vars.size());
    std::vector<std::size_t> order(vars.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = 0; i < perturb; ++i) {
      std::swap(order[i], order[i + draw_index(salt, 1, i, order.size() - i)]);
      const auto& var = vars[order[i]];
      if (var.domain.size() < 2) continue;
      const std::string& cur = out.assignment[var.name];
      std::size_t cur_idx = static_cast<std::size_t>(std::find(var.domain.begin(), var.domain.end(), cur) - var.domain.begin());
      std::size_t shift = 1 + draw_index(salt, 2, i, var.domain.size() - 1);
      out.assignment[var.name] = var.domain[(cur_idx + shift) % var.domain.size()];
    }

    current = out;
    result.trace.push_back({TraceEvent::Kind::Compensation, k + 1, current, metric(current, undo)});
    result.compensation_cost += step.cost;
    result.compensation_time += step.time;
    result.bound += step.epsilon;
  }
  result.status = TxnResult::Status::RolledBack;
  result.state = current;
  return result;
}

bool verify_recovery_bound(const PhysicalTransaction& txn, const TxnResult& result, const StateMetric& metric) {
  if (result.status != TxnResult::Status::RolledBack) return true;
  return metric(result.state, txn.initial_state) <= result.bound + 1e-12;
}

PhysicalTransaction transaction_from_json(const nlohmann::json& doc) {
  auto iv = [](const nlohmann::json& j) {
    return Intervention{j.at("target").get<std::string>(), j.at("value").get<std::string>()};
  };
  try {
    PhysicalTransaction txn;
    txn.name = doc.value("name", "transaction");
    txn.initial_state.assignment = doc.at("initial_state").get<Assignment>();
    for (const auto& s : doc.at("steps")) {
      if (!s.contains("compensation")) throw InvalidTransaction("every step needs a compensation");
      txn.steps.push_back({iv(s.at("action")), iv(s.at("compensation")), s.value("epsilon", 0.0), s.value("cost", 1.0),
                           s.value("time", 1.0)});
    }
    return txn;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed transaction: ") + e.what());
  }
}

std::vector<PhysicalTransaction> transactions_from_scenario(const nlohmann::json& scenario) {
  std::vector<PhysicalTransaction> out;
  if (!scenario.contains("transactions")) return out;
  for (const auto& t : scenario["transactions"]) out.push_back(transaction_from_json(t));
  return out;
}

}  // namespace erm
