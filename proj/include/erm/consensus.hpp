#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "erm/agent.hpp"

namespace erm {

struct SwarmConfig {
  std::size_t m = 1;
  double theta_q = 0.5;
  /// Chance that an agent's ballot is lost in a round.
  double drop_probability = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

SwarmConfig swarm_config_from_json(const nlohmann::json& doc);

struct GlobalGraph {
  std::size_t m = 0;
  std::set<CausalClaim> included;
  std::set<CausalClaim> underdetermined;
  std::map<CausalClaim, std::size_t> tally;
  /// Included edges at weight = vote fraction, acyclic.
  CausalGraph graph;
};

nlohmann::json global_graph_to_json(const GlobalGraph& g);

/// An agent backs an edge when its log gives conf > theta_max. Without any
/// logged evidence on the edge it backs the edges it believes.
bool agent_supports(const CausalGraph& graph, const CtlStore& log, const CausalClaim& edge, const ErmConfig& cfg);

/// Quorum rule on precomputed tallies: included iff votes / m > theta_q.
GlobalGraph aggregate_tallies(const std::vector<std::string>& variables, const std::map<CausalClaim, std::size_t>& tally,
                              std::size_t m, double theta_q);

struct AgentView {
  const CausalGraph* graph;
  const CtlStore* log;
};

/// Collects ballots from every agent (minus dropped ones) and applies the
/// quorum rule. `round` keys the drop draws. Throws EmptySwarm.
GlobalGraph aggregate(const std::vector<AgentView>& agents, const SwarmConfig& cfg, const ErmConfig& erm,
                      std::uint64_t round = 0);

/// Replaces every agent's graph by the global one. Logs and registries are
/// left alone.
void broadcast(const GlobalGraph& global, std::vector<AgentState*>& agents);

struct SwarmResult {
  std::vector<GlobalGraph> snapshots;
  /// Round after which the global belief set first matched `target`.
  std::optional<std::size_t> rounds_to_target;
};

using SourceFactory = std::function<std::unique_ptr<HypothesisSource>()>;

/// Runs `rounds` synchronous rounds: each agent runs one episode (agents run
/// concurrently), then aggregate and broadcast. With m = 1 aggregation is
/// skipped and the lone agent's own belief set is compared.
SwarmResult run_swarm(const Scm& env, const CausalGraph& initial_graph, const AgentConfig& base,
                      const std::vector<Subtask>& subtasks, const SourceFactory& make_source, const SwarmConfig& cfg,
                      std::size_t rounds, const std::optional<BeliefSet>& target = std::nullopt,
                      const std::function<void(std::size_t, const GlobalGraph&)>& on_round = {});

}  // namespace erm
