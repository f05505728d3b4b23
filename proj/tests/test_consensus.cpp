#include <doctest.h>

#include <algorithm>
#include <random>

#include "erm/consensus.hpp"
#include "fixtures.hpp"

using namespace erm;

namespace {

const std::vector<std::string> kVars{"X", "Y", "Z"};

GlobalGraph quorum(std::size_t supporters, std::size_t m, double theta_q) {
  return aggregate_tallies(kVars, {{CausalClaim{"X", "Y"}, supporters}}, m, theta_q);
}

Subtask dock_subtask() {
  Subtask s;
  s.id = "shelve-red";
  s.intervention = {"X", "1"};
  s.outcome = "Y";
  s.desired_outcome = "0";
  return s;
}

}  // namespace

TEST_CASE("quorum truth table") {
  CHECK(quorum(3, 5, 0.5).included.count({"X", "Y"}));
  auto boundary = quorum(3, 5, 0.6);
  CHECK(boundary.included.empty());
  CHECK(boundary.underdetermined.count({"X", "Y"}));
  CHECK(quorum(4, 5, 0.6).included.count({"X", "Y"}));
  CHECK(quorum(2, 4, 0.5).underdetermined.count({"X", "Y"}));
  CHECK(quorum(1, 1, 0.5).included.count({"X", "Y"}));
  CHECK(quorum(0, 3, 0.1).underdetermined.count({"X", "Y"}));
  // Oracle sweep against the strict rule.
  for (std::size_t m = 1; m <= 8; ++m) {
    for (std::size_t s = 0; s <= m; ++s) {
      for (double q : {0.1, 0.25, 0.5, 0.6, 0.75, 0.9}) {
        bool expected = static_cast<double>(s) / static_cast<double>(m) > q;
        CHECK(quorum(s, m, q).included.count({"X", "Y"}) == (expected ? 1u : 0u));
      }
    }
  }
  CHECK(*quorum(4, 5, 0.5).graph.weight("X", "Y") == doctest::Approx(0.8));
  CHECK_THROWS_AS(aggregate_tallies(kVars, {}, 0, 0.5), EmptySwarm);
  CHECK_THROWS_AS(aggregate({}, SwarmConfig{}, ErmConfig{}), EmptySwarm);
}

TEST_CASE("opposite edges above quorum") {
  auto g = aggregate_tallies(kVars, {{CausalClaim{"X", "Y"}, 4}, {CausalClaim{"Y", "X"}, 3}}, 5, 0.5);
  CHECK(g.graph.is_acyclic());
  CHECK(g.included.count({"X", "Y"}));
  CHECK(g.underdetermined.count({"Y", "X"}));
  for (const auto& [c, _] : g.tally) CHECK(g.included.count(c) + g.underdetermined.count(c) == 1);
}

TEST_CASE("agent ballots") {
  ErmConfig cfg;
  CausalGraph g(kVars);
  g.set_edge("Z", "Y", 0.5);
  CtlStore empty;
  CHECK(agent_supports(g, empty, {"Z", "Y"}, cfg));
  CHECK_FALSE(agent_supports(g, empty, {"X", "Y"}, cfg));
  CtlStore log;
  for (std::uint64_t t = 1; t <= 10; ++t) {
    CtlEntry e;
    e.t = t;
    e.claims = {{"X", "Y"}};
    e.action = {"X", "1"};
    e.predicted = Distribution::bernoulli(0.5);
    e.observed = "1";
    e.delta = t <= 9 ? 0.0 : 0.5;
    log.append(e);
  }
  CHECK(agent_supports(g, log, {"X", "Y"}, cfg));
  CtlStore weak;
  for (std::uint64_t t = 1; t <= 10; ++t) {
    CtlEntry e = log.entries()[t - 1];
    e.delta = t <= 8 ? 0.0 : 0.5;
    weak.append(e);
  }
  CHECK_FALSE(agent_supports(g, weak, {"X", "Y"}, cfg));
}

TEST_CASE("adding a supporter never removes an edge") {
  std::mt19937_64 rng(17);
  const std::vector<std::string> vars{"A", "B", "C", "D"};
  for (int trial = 0; trial < 300; ++trial) {
    std::size_t m = 1 + rng() % 7;
    double q = 0.05 + 0.9 * std::uniform_real_distribution<double>(0, 1)(rng);
    std::map<CausalClaim, std::size_t> tally;
    for (int e = 0; e < 4; ++e) {
      std::size_t a = rng() % 4, b = rng() % 4;
      if (a < b) tally[{vars[a], vars[b]}] = rng() % (m + 1);
    }
    if (tally.empty()) continue;
    auto before = aggregate_tallies(vars, tally, m, q);
    auto edge = std::next(tally.begin(), static_cast<long>(rng() % tally.size()))->first;
    if (tally[edge] == m) continue;
    tally[edge] += 1;
    auto after = aggregate_tallies(vars, tally, m, q);
    for (const auto& c : before.included) CHECK(after.included.count(c));
  }
}

TEST_CASE("aggregation is deterministic") {
  auto a = aggregate_tallies(kVars, {{CausalClaim{"X", "Y"}, 2}, {CausalClaim{"Z", "Y"}, 3}}, 3, 0.5);
  auto b = aggregate_tallies(kVars, {{CausalClaim{"X", "Y"}, 2}, {CausalClaim{"Z", "Y"}, 3}}, 3, 0.5);
  CHECK(global_graph_to_json(a) == global_graph_to_json(b));
}

TEST_CASE("broadcast") {
  Scm dock = erm::testing::dock_scm();
  AgentConfig cfg;
  CausalGraph start(kVars);
  start.set_edge("X", "Y", 0.9);
  AgentState one = make_agent(dock, start, cfg);
  for (std::uint64_t t = 1; t <= 3; ++t) one.registry.record_and_maybe_inject(FailureKind::RungCollapse, 0.3, t);
  auto global = aggregate_tallies(kVars, {{CausalClaim{"Z", "Y"}, 3}, {CausalClaim{"Z", "X"}, 2}}, 3, 0.5);
  std::vector<AgentState*> agents{&one};
  auto guards = one.registry.active_guards();
  broadcast(global, agents);
  CHECK(one.graph.edges() == global.graph.edges());
  auto once = one.graph;
  broadcast(global, agents);
  CHECK(one.graph == once);
  CHECK(one.registry.active_guards() == guards);
}

TEST_CASE("swarm reaches the correct beliefs no later than a lone agent") {
  Scm dock = erm::testing::dock_scm();
  CausalGraph start(kVars);
  start.set_edge("Z", "X", 0.5);
  start.set_edge("Z", "Y", 0.5);
  start.set_edge("X", "Y", 0.5);
  BeliefSet target{{CausalClaim{"Z", "X"}, CausalClaim{"Z", "Y"}}};
  SourceFactory wrong = [] { return std::make_unique<ScriptedSource>(std::vector<Hypothesis>{{{{"X", "Y"}}, std::nullopt, 0.95}}); };

  std::vector<std::size_t> solo, swarm;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    AgentConfig cfg;
    cfg.seed = seed;
    auto r1 = run_swarm(dock, start, cfg, {dock_subtask()}, wrong, SwarmConfig{1, 0.5, 0.0, seed}, 20, target);
    auto r4 = run_swarm(dock, start, cfg, {dock_subtask()}, wrong, SwarmConfig{4, 0.5, 0.0, seed}, 20, target);
    REQUIRE(r1.rounds_to_target);
    REQUIRE(r4.rounds_to_target);
    solo.push_back(*r1.rounds_to_target);
    swarm.push_back(*r4.rounds_to_target);
    CHECK(r4.snapshots.size() == 20);
    for (const auto& snap : r4.snapshots) CHECK(snap.graph.is_acyclic());
  }
  std::sort(solo.begin(), solo.end());
  std::sort(swarm.begin(), swarm.end());
  CHECK(swarm[2] <= solo[2]);
}

TEST_CASE("dropped ballots") {
  Scm dock = erm::testing::dock_scm();
  CausalGraph start(kVars);
  start.set_edge("Z", "Y", 0.5);
  AgentConfig cfg;
  std::vector<AgentState> states;
  for (int i = 0; i < 4; ++i) states.push_back(make_agent(dock, start, cfg));
  std::vector<AgentView> views;
  for (auto& s : states) views.push_back({&s.graph, &s.log});
  auto all = aggregate(views, SwarmConfig{4, 0.5, 0.0, 1}, ErmConfig{});
  CHECK(all.tally.at({"Z", "Y"}) == 4);
  auto none = aggregate(views, SwarmConfig{4, 0.5, 1.0, 1}, ErmConfig{});
  CHECK(none.tally.at({"Z", "Y"}) == 0);
  CHECK(none.underdetermined.count({"Z", "Y"}));
  CHECK_THROWS_AS(swarm_config_from_json({{"agents", 0}}), EmptySwarm);
  CHECK_THROWS_AS(swarm_config_from_json({{"quorum", 1.0}}), InvalidParameter);
}
