#include "erm/consensus.hpp"

#include <future>

namespace erm {

namespace {

constexpr std::uint64_t kDropStream = 0xd209;

}  // namespace

void SwarmConfig::validate() const {
  if (m < 1) throw EmptySwarm("a swarm needs at least one agent");
  if (!(theta_q > 0.0 && theta_q < 1.0)) throw InvalidParameter("quorum threshold must lie in (0,1)");
  if (!(drop_probability >= 0.0 && drop_probability <= 1.0)) throw InvalidParameter("drop probability must lie in [0,1]");
}

SwarmConfig swarm_config_from_json(const nlohmann::json& doc) {
  SwarmConfig cfg;
  try {
    cfg.m = doc.value("agents", cfg.m);
    cfg.theta_q = doc.value("quorum", cfg.theta_q);
    cfg.drop_probability = doc.value("drop_probability", cfg.drop_probability);
    cfg.seed = doc.value("seed", cfg.seed);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed swarm config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

nlohmann::json global_graph_to_json(const GlobalGraph& g) {
  auto edges = [](const std::set<CausalClaim>& s) {
    auto arr = nlohmann::json::array();
    for (const auto& c : s) arr.push_back({c.from, c.to});
    return arr;
  };
  auto tally = nlohmann::json::array();
  for (const auto& [c, n] : g.tally) tally.push_back({c.from, c.to, n});
  return {{"m", g.m},
          {"included", edges(g.included)},
          {"underdetermined", edges(g.underdetermined)},
          {"tally", tally},
          {"graph", graph_to_json(g.graph)}};
}

bool agent_supports(const CausalGraph& graph, const CtlStore& log, const CausalClaim& edge, const ErmConfig& cfg) {
  auto ev = log.evidence(edge, cfg.eps_err);
  if (ev.support + ev.refute == 0) return belief_set(graph).contains(edge);
  return revision_confidence(ev.support, ev.refute, cfg.eps_conf) > cfg.theta_max;
}

GlobalGraph aggregate_tallies(const std::vector<std::string>& variables, const std::map<CausalClaim, std::size_t>& tally,
                              std::size_t m, double theta_q) {
  if (m == 0) throw EmptySwarm("a swarm needs at least one agent");
  GlobalGraph g;
  g.m = m;
  g.tally = tally;
  CausalGraph candidate(variables);
  for (const auto& [edge, votes] : tally) {
    double fraction = static_cast<double>(votes) / static_cast<double>(m);
    if (fraction > theta_q) {
      candidate.add_variable(edge.from);
      candidate.add_variable(edge.to);
      candidate.set_edge(edge.from, edge.to, fraction);
    } else {
      g.underdetermined.insert(edge);
    }
  }
  g.graph = enforce_dag(candidate);
  for (const auto& [e, _] : candidate.edges()) {
    CausalClaim c{e.first, e.second};
    if (g.graph.has_edge(c.from, c.to)) {
      g.included.insert(c);
    } else {
      g.underdetermined.insert(c);
    }
  }
  return g;
}

GlobalGraph aggregate(const std::vector<AgentView>& agents, const SwarmConfig& cfg, const ErmConfig& erm,
                      std::uint64_t round) {
  if (agents.empty()) throw EmptySwarm("no agents to aggregate");
  std::vector<std::string> variables;
  std::set<CausalClaim> candidates;
  for (const auto& a : agents) {
    for (const auto& v : a.graph->variables()) {
      if (std::find(variables.begin(), variables.end(), v) == variables.end()) variables.push_back(v);
    }
    for (const auto& [e, _] : a.graph->edges()) candidates.emplace(e.first, e.second);
    for (const auto& entry : a.log->entries()) {
      for (const auto& c : entry.claims) candidates.insert(c);
    }
  }
  std::map<CausalClaim, std::size_t> tally;
  for (const auto& c : candidates) tally[c] = 0;
  for (std::size_t i = 0; i < agents.size(); ++i) {
    if (cfg.drop_probability > 0.0 && counter_uniform(cfg.seed, kDropStream, i, round) < cfg.drop_probability) continue;
    for (const auto& c : candidates) {
      if (agent_supports(*agents[i].graph, *agents[i].log, c, erm)) ++tally[c];
    }
  }
  return aggregate_tallies(variables, tally, agents.size(), cfg.theta_q);
}

void broadcast(const GlobalGraph& global, std::vector<AgentState*>& agents) {
  for (auto* a : agents) {
    CausalGraph g = global.graph;
    g.set_thresholds(a->graph.theta_min(), a->graph.theta_max());
    a->graph = std::move(g);
  }
}

SwarmResult run_swarm(const Scm& env, const CausalGraph& initial_graph, const AgentConfig& base,
                      const std::vector<Subtask>& subtasks, const SourceFactory& make_source, const SwarmConfig& cfg,
                      std::size_t rounds, const std::optional<BeliefSet>& target,
                      const std::function<void(std::size_t, const GlobalGraph&)>& on_round) {
  cfg.validate();
  std::vector<AgentConfig> configs(cfg.m, base);
  std::vector<AgentState> states;
  std::vector<std::unique_ptr<HypothesisSource>> sources;
  for (std::size_t i = 0; i < cfg.m; ++i) {
    configs[i].seed = base.seed + 0x9e3779b97f4a7c15ULL * i;
    states.push_back(make_agent(env, initial_graph, configs[i]));
    sources.push_back(make_source());
  }

  SwarmResult result;
  for (std::size_t round = 1; round <= rounds; ++round) {
    std::vector<std::future<void>> running;
    for (std::size_t i = 0; i < cfg.m; ++i) {
      running.push_back(std::async(std::launch::async, [&, i] {
        run_episode(env, states[i], *sources[i], configs[i], subtasks, "swarm");
      }));
    }
    for (auto& f : running) f.get();

    GlobalGraph global;
    if (cfg.m == 1) {
      global.m = 1;
      global.graph = states[0].graph;
      for (const auto& c : belief_set(states[0].graph).claims) {
        global.included.insert(c);
        global.tally[c] = 1;
      }
    } else {
      std::vector<AgentView> views;
      for (auto& s : states) views.push_back({&s.graph, &s.log});
      global = aggregate(views, cfg, base.erm, round);
      std::vector<AgentState*> ptrs;
      for (auto& s : states) ptrs.push_back(&s);
      broadcast(global, ptrs);
    }
    if (on_round) on_round(round, global);
    result.snapshots.push_back(global);
    if (target && !result.rounds_to_target && belief_set(global.graph) == *target) result.rounds_to_target = round;
  }
  return result;
}

}  // namespace erm
