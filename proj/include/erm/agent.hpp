#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "erm/chat.hpp"
#include "erm/ctl.hpp"
#include "erm/erm.hpp"
#include "erm/failure.hpp"
#include "erm/graph.hpp"
#include "erm/scm.hpp"

namespace erm {

/// One step of a goal: perform `intervention` and watch `outcome`.
struct Subtask {
  std::string id;
  std::string text;
  Intervention intervention;
  std::string outcome;
  /// Value that counts as task success. Empty means no task loss.
  std::string desired_outcome;
  std::set<std::string> tags;
};

/// The natural-language claim a subtask asks about.
std::string subtask_claim(const Subtask& s);

struct Hypothesis {
  std::vector<CausalClaim> claims;
  /// When absent the agent derives the prediction from the claims.
  std::optional<Distribution> predicted;
  double confidence = 0.5;
};

class HypothesisSource {
 public:
  virtual ~HypothesisSource() = default;
  virtual Hypothesis hypothesize(const Subtask& subtask, const CausalGraph& graph,
                                 const std::vector<std::string>& guards) = 0;
  virtual std::string id() const = 0;
};

/// Replays a fixed list of hypotheses, cycling.
class ScriptedSource : public HypothesisSource {
 public:
  explicit ScriptedSource(std::vector<Hypothesis> script);
  Hypothesis hypothesize(const Subtask&, const CausalGraph&, const std::vector<std::string>&) override;
  std::string id() const override { return "scripted"; }

 private:
  std::vector<Hypothesis> script_;
  std::size_t next_ = 0;
};

/// Claims the believed path from the intervened variable to the outcome.
class GraphFaithfulSource : public HypothesisSource {
 public:
  Hypothesis hypothesize(const Subtask& subtask, const CausalGraph& graph,
                         const std::vector<std::string>& guards) override;
  std::string id() const override { return "graph_faithful"; }
};

/// Asks a chat model. Claims are read from "CLAIM: A -> B" lines; without
/// any, a YES verdict claims intervention target -> outcome.
class RemoteChatSource : public HypothesisSource {
 public:
  explicit RemoteChatSource(ChatModel& model) : model_(model) {}
  Hypothesis hypothesize(const Subtask& subtask, const CausalGraph& graph,
                         const std::vector<std::string>& guards) override;
  std::string id() const override { return "remote:" + model_.id(); }
  const std::string& last_prompt() const { return last_prompt_; }

 private:
  ChatModel& model_;
  std::string last_prompt_;
};

/// Parses a chat reply into a hypothesis over the graph's variables.
Hypothesis parse_hypothesis(const std::string& response, const Subtask& subtask, const CausalGraph& graph);

/// Believed edges, then active guards, then the zero-shot question.
std::string render_prompt(const CausalGraph& graph, const std::vector<std::string>& guards, const Subtask& subtask);

/// Per task class rolling mean of per-episode regret.
class RoutingTable {
 public:
  explicit RoutingTable(std::size_t window = 5, double theta_route = 0.2, std::string route_target = "human");

  void record(const std::string& task_class, double episode_regret);
  /// Throws NoEpisodes for an unseen class.
  double residual_regret(const std::string& task_class) const;
  bool should_route(const std::string& task_class) const;
  std::string route_target(const std::string& task_class) const;
  void set_route_target(const std::string& task_class, std::string target);

  std::size_t window() const { return window_; }
  double theta_route() const { return theta_route_; }

  nlohmann::json to_json() const;
  static RoutingTable from_json(const nlohmann::json& doc);

 private:
  std::size_t window_;
  double theta_route_;
  std::string default_target_;
  std::map<std::string, std::deque<double>> regrets_;
  std::map<std::string, std::string> targets_;
};

struct AgentConfig {
  ErmConfig erm;
  std::string task_class = "default";
  std::size_t observational_samples = 20000;
  DeltaMetric delta_metric = DeltaMetric::EmpiricalDo;
  RegistryConfig registry;
  std::size_t route_window = 5;
  double theta_route = 0.2;
  std::string route_target = "human";
  /// Seeds the agent's observational table and its physical actions.
  std::uint64_t seed = 0;
};

struct AgentState {
  CausalGraph graph;
  FailureRegistry registry;
  RoutingTable routing;
  CtlStore log;
  Samples evidence;
  std::uint64_t t = 0;
  std::set<std::string> attempted;
};

/// Fresh agent: initial graph, empty log, observational table drawn from env.
AgentState make_agent(const Scm& env, const CausalGraph& initial_graph, const AgentConfig& cfg);

struct StepRecord {
  CtlEntry entry;
  LossBreakdown loss;
  std::vector<CausalClaim> claims;
  bool revised = false;
  std::optional<FailureKind> failure;
};

struct Episode {
  std::string goal;
  std::string task_class;
  std::vector<Subtask> subtasks;
  std::vector<CtlEntry> outcomes;
  std::vector<LossBreakdown> losses;
  std::vector<StepRecord> steps;
  std::vector<Guard> injected;
  std::vector<FailureKind> retracted;
  std::size_t revisions = 0;
  double mean_regret = 0.0;
  bool routed = false;
  std::string source_id;
};

/// Runs every subtask once through the three layers. When the task class is
/// already routed and `alternate` is given, the alternate source answers.
Episode run_episode(const Scm& env, AgentState& state, HypothesisSource& source, const AgentConfig& cfg,
                    const std::vector<Subtask>& subtasks, const std::string& goal = "goal",
                    HypothesisSource* alternate = nullptr);

/// Mean of per-episode regret over the last `window` episodes of the class.
double residual_regret(std::span<const Episode> episodes, const std::string& task_class, std::size_t window = 5);

/// Graph, registry, routing table and clock as one JSON document.
nlohmann::json checkpoint_to_json(const AgentState& state);
void restore_checkpoint(AgentState& state, const nlohmann::json& doc);
void save_checkpoint(const std::string& path, const AgentState& state);
void load_checkpoint(const std::string& path, AgentState& state);

/// A scenario file: environment model plus agent, subtask and extra blocks.
struct Scenario {
  std::string name;
  Scm scm;
  ErmConfig erm;
  AgentConfig agent;
  CausalGraph initial_graph;
  nlohmann::json source_spec;
  std::vector<Subtask> subtasks;
  nlohmann::json raw;
};

Scenario load_scenario(const std::string& path);
Scenario scenario_from_json(const nlohmann::json& doc);

/// Builds the source named in the scenario. A "remote" source needs `model`.
std::unique_ptr<HypothesisSource> make_source(const nlohmann::json& spec, ChatModel* model = nullptr);

}  // namespace erm
