#include <doctest.h>

#include <random>

#include "erm/agent.hpp"
#include "erm/txn.hpp"
#include "fixtures.hpp"

using namespace erm;

namespace {

// Ten binary variables in a chain V0 -> V1 -> ... -> V9.
Scm chain10() {
  Scm::Builder b;
  for (int i = 0; i < 10; ++i) b.variable("V" + std::to_string(i), {"0", "1"});
  for (int i = 1; i < 10; ++i) b.edge("V" + std::to_string(i - 1), "V" + std::to_string(i));
  b.bernoulli_row("V0", {}, 0.5);
  for (int i = 1; i < 10; ++i) {
    std::string p = "V" + std::to_string(i - 1), c = "V" + std::to_string(i);
    b.bernoulli_row(c, {{p, "0"}}, 0.2);
    b.bernoulli_row(c, {{p, "1"}}, 0.8);
  }
  return b.seed(1).build();
}

PhysicalTransaction dock_txn() {
  Scenario sc = load_scenario(erm::testing::scenario_path("dock"));
  return transactions_from_scenario(sc.raw).at(0);
}

WorldState assign(const Scm& scm, std::mt19937_64& rng) {
  WorldState s;
  for (const auto& v : scm.variables()) s.assignment[v.name] = v.domain[rng() % v.domain.size()];
  return s;
}

}  // namespace

TEST_CASE("hamming distance") {
  WorldState a{{{"A", "0"}, {"B", "1"}, {"C", "0"}, {"D", "1"}}, std::nullopt};
  WorldState b = a;
  CHECK(hamming_distance(a, b) == 0.0);
  b.assignment["A"] = "1";
  CHECK(hamming_distance(a, b) == 0.25);
  b.assignment["C"] = "1";
  CHECK(hamming_distance(a, b) == 0.5);
  WorldState c{{{"A", "0"}}, std::nullopt};
  CHECK_THROWS_AS(hamming_distance(a, c), DomainMismatch);
}

TEST_CASE("hamming distance obeys the triangle inequality") {
  Scm scm = chain10();
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    auto a = assign(scm, rng), b = assign(scm, rng), c = assign(scm, rng);
    CHECK(hamming_distance(a, c) <= hamming_distance(a, b) + hamming_distance(b, c) + 1e-12);
  }
}

TEST_CASE("dock transaction") {
  Scm dock = erm::testing::dock_scm();
  PhysicalTransaction txn = dock_txn();
  REQUIRE(txn.steps.size() == 3);

  SUBCASE("failure at the last step rolls back within 0.20") {
    auto r = execute(txn, dock, ExecOptions{3, {}, {}, 7});
    CHECK(r.status == TxnResult::Status::RolledBack);
    CHECK(r.bound == doctest::Approx(0.1 + 0.05 + 0.05));
    CHECK(hamming_distance(r.state, txn.initial_state) <= r.bound);
    CHECK(verify_recovery_bound(txn, r));
    CHECK(r.compensation_cost == doctest::Approx(4.5));
    CHECK(r.compensation_time == doctest::Approx(3.5));
  }
  SUBCASE("no failure commits without compensating") {
    auto r = execute(txn, dock);
    CHECK(r.status == TxnResult::Status::Committed);
    CHECK(r.trace.size() == 3);
    for (const auto& e : r.trace) CHECK(e.kind == TraceEvent::Kind::Action);
    CHECK(r.compensation_cost == 0.0);
    CHECK(r.state.at("Y") == "1");
  }
  SUBCASE("zero budgets restore the initial state exactly") {
    PhysicalTransaction exact = txn;
    for (auto& s : exact.steps) s.epsilon = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      auto r = execute(exact, dock, ExecOptions{3, {}, {}, seed});
      CHECK(r.state == exact.initial_state);
      CHECK(r.bound == 0.0);
      CHECK(verify_recovery_bound(exact, r));
    }
  }
  SUBCASE("poisoned compensation is reported, never committed") {
    CHECK_THROWS_AS(execute(txn, dock, ExecOptions{3, {2}, {}, 0}), CompensationFailure);
  }
}

TEST_CASE("violator fixture is caught") {
  Scm dock = erm::testing::dock_scm();
  PhysicalTransaction txn = dock_txn();
  for (auto& s : txn.steps) s.epsilon = 0.0;
  // Undo of X=1 leaves X at 1 instead of restoring 0.
  txn.steps[0].compensation.value = "1";
  auto r = execute(txn, dock, ExecOptions{3, {}, {}, 0});
  CHECK(hamming_distance(r.state, txn.initial_state) > r.bound);
  CHECK_FALSE(verify_recovery_bound(txn, r));

  // Slack beyond the budget on a single rolled-back step.
  Scm big = chain10();
  PhysicalTransaction one;
  for (const auto& v : big.variables()) one.initial_state.assignment[v.name] = "0";
  one.steps.push_back({{"V3", "1"}, {"V3", "0"}, 0.2, 1.0, 1.0});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto bad = execute(one, big, ExecOptions{1, {}, {1}, seed});
    CHECK_FALSE(verify_recovery_bound(one, bad));
  }
}

TEST_CASE("invalid transactions") {
  Scm dock = erm::testing::dock_scm();
  PhysicalTransaction txn = dock_txn();
  auto bad = txn;
  bad.steps[1].cost = 0.0;
  CHECK_THROWS_AS(execute(bad, dock), InvalidTransaction);
  bad = txn;
  bad.steps[0].compensation = {"Q", "0"};
  CHECK_THROWS_AS(execute(bad, dock), InvalidTransaction);
  bad = txn;
  bad.initial_state.assignment.erase("Z");
  CHECK_THROWS_AS(execute(bad, dock), InvalidTransaction);
  CHECK_THROWS_AS(execute(txn, dock, ExecOptions{4, {}, {}, 0}), InvalidParameter);
  CHECK_THROWS_AS(transaction_from_json({{"initial_state", {{"Z", "0"}}}, {"steps", {{{"action", {{"target", "Z"}, {"value", "1"}}}}}}}),
                  InvalidTransaction);
}

TEST_CASE("randomized transactions respect the recovery bound") {
  Scm scm = chain10();
  std::mt19937_64 rng(2026);
  std::uniform_real_distribution<double> eps(0.0, 0.3);
  int honoured = 0;
  for (int trial = 0; trial < 100; ++trial) {
    PhysicalTransaction txn;
    txn.initial_state = assign(scm, rng);
    std::size_t n = 1 + rng() % 6;
    for (std::size_t i = 0; i < n; ++i) {
      const auto& v = scm.variables()[rng() % scm.num_variables()];
      std::string target = v.name;
      txn.steps.push_back({{target, v.domain[rng() % 2]}, {target, txn.initial_state.at(target)}, eps(rng), 0.5, 0.5});
    }
    // Compensations restore the value the target had before the whole transaction,
    // which is the pre-action value only for the first write of each target.
    std::set<std::string> written;
    for (auto& s : txn.steps) {
      if (!written.insert(s.action.target).second) s.compensation.value = "";
    }
    // Fill later writes with the value current just before that action.
    std::size_t k = 1 + rng() % n;
    WorldState cur = txn.initial_state;
    for (std::size_t i = 0; i < n; ++i) {
      if (txn.steps[i].compensation.value.empty()) txn.steps[i].compensation.value = cur.at(txn.steps[i].action.target);
      cur = propagate_intervention(scm, cur, txn.steps[i].action, NoiseKey{std::uint64_t(trial), 0xac7, i});
    }
    auto r = execute(txn, scm, ExecOptions{k, {}, {}, std::uint64_t(trial)});
    REQUIRE(r.status == TxnResult::Status::RolledBack);

    // Reverse-order discipline.
    std::vector<std::size_t> actions, comps;
    double per_step = 0.0;
    for (const auto& e : r.trace) {
      if (e.kind == TraceEvent::Kind::Action) {
        actions.push_back(e.step);
      } else {
        comps.push_back(e.step);
        per_step += e.deviation;
        CHECK(e.deviation <= txn.steps[e.step - 1].epsilon + 1e-12);
      }
    }
    std::reverse(actions.begin(), actions.end());
    CHECK(comps == actions);
    CHECK(r.bound == doctest::Approx(txn.total_budget(k)));
    double measured = hamming_distance(r.state, txn.initial_state);
    CHECK(per_step + 1e-12 >= measured);
    CHECK(r.compensation_cost > 0.0);
    if (verify_recovery_bound(txn, r)) ++honoured;
  }
  CHECK(honoured == 100);
}
