#include <doctest.h>

#include <random>

#include "erm/failure.hpp"
#include "fixtures.hpp"

using namespace erm;

namespace {

FailureContext dock_context(const Scm& dock) {
  FailureContext ctx;
  ctx.predicted = Distribution::bernoulli(0.64);
  ctx.observational = exact_conditional(dock, "Y", {{"X", "1"}});
  return ctx;
}

}  // namespace

TEST_CASE("guard texts") {
  CHECK(guard_text(FailureKind::RungCollapse) == "Verify evidence level matches query level before concluding causation.");
  CHECK(guard_text(FailureKind::ConfounderBlind) ==
        "Enumerate potential common causes of X and Y before accepting X \xE2\x86\x92 Y.");
  CHECK(guard_text(FailureKind::TransitionCostOmit) ==
        "Explicitly calculate buffer/transition time between sequential phases.");
  CHECK(guard_text(FailureKind::PrematureCertainty) ==
        "When confidence > 0.9 on first pass, search for at least one alternative.");
  CHECK(guard_text(FailureKind::NegativeConstraintIgnore) ==
        "List constraints that prohibit actions before generating a plan.");
  for (auto k : kAllFailureKinds) CHECK(failure_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(failure_kind_from_string("Hubris"), FormatError);
}

TEST_CASE("classify") {
  Scm dock = erm::testing::dock_scm();
  const std::vector<CausalClaim> xy{{"X", "Y"}};

  SUBCASE("prediction equal to the observational conditional") {
    auto ctx = dock_context(dock);
    CHECK(total_variation(*ctx.predicted, *ctx.observational) < 1e-12);
    CHECK(classify(xy, 0.36, ctx, 0.1) == FailureKind::RungCollapse);
    ctx.predicted = Distribution::bernoulli(0.64 - 0.019);
    CHECK(classify(xy, 0.36, ctx, 0.1) == FailureKind::RungCollapse);
    ctx.predicted = Distribution::bernoulli(0.64 - 0.05);
    CHECK(classify(xy, 0.36, ctx, 0.1) == std::nullopt);
  }
  SUBCASE("confounded false claim") {
    auto ctx = dock_context(dock);
    ctx.truth = &dock;
    CHECK(classify(xy, 0.36, ctx, 0.1) == FailureKind::ConfounderBlind);
    // A true edge is never blamed on a confounder.
    CHECK(classify({{"Z", "Y"}}, 0.36, ctx, 0.1) == FailureKind::RungCollapse);
  }
  SUBCASE("premature certainty and context tags") {
    FailureContext ctx;
    ctx.confidence = 0.95;
    CHECK(classify(xy, 0.5, ctx, 0.1) == FailureKind::PrematureCertainty);
    ctx.first_attempt = false;
    CHECK(classify(xy, 0.5, ctx, 0.1) == std::nullopt);
    ctx.tags = {kTagTransition};
    CHECK(classify(xy, 0.5, ctx, 0.1) == FailureKind::TransitionCostOmit);
    ctx.tags = {kTagNegativeConstraint};
    CHECK(classify(xy, 0.5, ctx, 0.1) == FailureKind::NegativeConstraintIgnore);
    ctx.confidence = 0.9;
    ctx.first_attempt = true;
    CHECK(classify(xy, 0.5, ctx, 0.1) == FailureKind::NegativeConstraintIgnore);
  }
  SUBCASE("successes are not classified") {
    CHECK_THROWS_AS(classify(xy, 0.1, FailureContext{}, 0.1), PreconditionViolation);
    CHECK_THROWS_AS(classify(xy, 0.0, FailureContext{}, 0.1), PreconditionViolation);
  }
  SUBCASE("deterministic") {
    auto ctx = dock_context(dock);
    ctx.truth = &dock;
    auto first = classify(xy, 0.4, ctx, 0.1);
    for (int i = 0; i < 20; ++i) CHECK(classify(xy, 0.4, ctx, 0.1) == first);
  }
}

TEST_CASE("record_and_maybe_inject") {
  FailureRegistry reg;
  CHECK_FALSE(reg.record_and_maybe_inject(FailureKind::ConfounderBlind, 0.12, 1));
  CHECK_FALSE(reg.record_and_maybe_inject(FailureKind::ConfounderBlind, 0.12, 2));
  auto g = reg.record_and_maybe_inject(FailureKind::ConfounderBlind, 0.12, 3);
  REQUIRE(g);
  CHECK(g->text == guard_text(FailureKind::ConfounderBlind));
  CHECK(g->injected_at == 3u);
  CHECK(g->active);
  CHECK_FALSE(reg.record_and_maybe_inject(FailureKind::ConfounderBlind, 0.12, 4));
  CHECK(reg.stats().at(FailureKind::ConfounderBlind).count == 4);

  SUBCASE("distinct modes keep separate counters") {
    FailureRegistry mixed;
    for (std::uint64_t t = 1; t <= 6; ++t) {
      auto kind = t % 2 ? FailureKind::RungCollapse : FailureKind::PrematureCertainty;
      auto out = mixed.record_and_maybe_inject(kind, 0.2, t);
      CHECK(out.has_value() == (t >= 5));
    }
  }
}

TEST_CASE("EWMA of failure regret") {
  FailureRegistry reg;
  std::vector<double> xs{0.5, 0.1, 0.3, 0.9};
  double oracle = xs[0];
  for (std::size_t i = 1; i < xs.size(); ++i) oracle = 0.3 * xs[i] + 0.7 * oracle;
  for (std::size_t i = 0; i < xs.size(); ++i) reg.record_and_maybe_inject(FailureKind::RungCollapse, xs[i], i + 1);
  CHECK(reg.stats().at(FailureKind::RungCollapse).ewma_regret == doctest::Approx(oracle));
}

TEST_CASE("evaluate_guard") {
  Guard g;
  g.regret_before = 0.12;
  std::vector<double> low(5, 0.03);
  CHECK(evaluate_guard(g, low) == GuardVerdict::Keep);
  g.regret_before = 0.03;
  std::vector<double> high(5, 0.12);
  CHECK(evaluate_guard(g, high) == GuardVerdict::Retract);
  std::vector<double> four(4, 0.12);
  CHECK_THROWS_AS(evaluate_guard(g, four), InsufficientWindow);
}

TEST_CASE("guard lifecycle") {
  FailureRegistry reg;
  for (int i = 0; i < 5; ++i) reg.observe_episode(0.03);
  for (std::uint64_t t = 1; t <= 3; ++t) reg.record_and_maybe_inject(FailureKind::RungCollapse, 0.4, t);
  REQUIRE(reg.guard_active(FailureKind::RungCollapse));
  CHECK(reg.guards()[0].regret_before == doctest::Approx(0.03));

  for (int i = 0; i < 4; ++i) CHECK(reg.observe_episode(0.12).empty());
  CHECK(reg.guard_active(FailureKind::RungCollapse));
  auto retracted = reg.observe_episode(0.12);
  REQUIRE(retracted.size() == 1);
  CHECK(retracted[0] == FailureKind::RungCollapse);
  CHECK(reg.active_guards().empty());

  // No resurrection without a fresh crossing.
  CHECK_FALSE(reg.record_and_maybe_inject(FailureKind::RungCollapse, 0.4, 20));
  CHECK_FALSE(reg.record_and_maybe_inject(FailureKind::RungCollapse, 0.4, 21));
  CHECK(reg.active_guards().empty());
  CHECK(reg.record_and_maybe_inject(FailureKind::RungCollapse, 0.4, 22));
  CHECK(reg.active_guards().size() == 1);
}

TEST_CASE("helpful guard is kept for good") {
  FailureRegistry reg;
  for (int i = 0; i < 5; ++i) reg.observe_episode(0.3);
  for (std::uint64_t t = 1; t <= 3; ++t) reg.record_and_maybe_inject(FailureKind::ConfounderBlind, 0.3, t);
  for (int i = 0; i < 5; ++i) reg.observe_episode(0.05);
  CHECK(reg.guards()[0].settled);
  for (int i = 0; i < 20; ++i) CHECK(reg.observe_episode(0.9).empty());
  CHECK(reg.guard_active(FailureKind::ConfounderBlind));
}

TEST_CASE("active_guards ordering") {
  CHECK(FailureRegistry{}.active_guards().empty());
  FailureRegistry reg(RegistryConfig{0.3, 5, 1});
  reg.record_and_maybe_inject(FailureKind::PrematureCertainty, 0.2, 1);
  reg.record_and_maybe_inject(FailureKind::RungCollapse, 0.2, 3);
  auto active = reg.active_guards();
  REQUIRE(active.size() == 2);
  CHECK(active[0] == guard_text(FailureKind::PrematureCertainty));
  CHECK(active[1] == guard_text(FailureKind::RungCollapse));
}

TEST_CASE("guard lifecycle never resurrects without a crossing") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    FailureRegistry reg;
    bool was_active = false;
    std::size_t since_retraction = 0;
    bool retracted_once = false;
    for (std::uint64_t t = 1; t <= 200; ++t) {
      bool record = u(rng) < 0.3;
      if (record) {
        ++since_retraction;
        reg.record_and_maybe_inject(FailureKind::RungCollapse, u(rng), t);
      }
      auto out = reg.observe_episode(u(rng));
      bool active = reg.guard_active(FailureKind::RungCollapse);
      if (!out.empty()) {
        retracted_once = true;
        since_retraction = 0;
        CHECK_FALSE(active);
      }
      if (active && !was_active && retracted_once) CHECK(since_retraction >= 3);
      was_active = active;
    }
  }
}

TEST_CASE("registry serialization round-trip") {
  FailureRegistry reg;
  for (int i = 0; i < 3; ++i) reg.observe_episode(0.2);
  for (std::uint64_t t = 1; t <= 4; ++t) reg.record_and_maybe_inject(FailureKind::ConfounderBlind, 0.1 * t, t);
  reg.observe_episode(0.05);
  auto doc = reg.to_json();
  auto back = FailureRegistry::from_json(doc);
  CHECK(back.to_json() == doc);
  CHECK(back.active_guards() == reg.active_guards());
  CHECK_THROWS_AS(FailureRegistry::from_json({{"modes", {{"Nope", {{"count", 1}, {"ewma_regret", 0}}}}}}), FormatError);
}
