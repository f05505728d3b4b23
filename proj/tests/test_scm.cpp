#include <doctest.h>

#include <cmath>
#include <set>

#include "erm/scm.hpp"
#include "fixtures.hpp"

using namespace erm;
using erm::testing::dock_scm;

namespace {

double frequency(const std::vector<WorldState>& samples, const std::string& var, const std::string& val,
                 const Assignment& given = {}) {
  double hit = 0, total = 0;
  for (const auto& s : samples) {
    bool ok = true;
    for (const auto& [k, v] : given) ok = ok && s.at(k) == v;
    if (!ok) continue;
    total += 1;
    if (s.at(var) == val) hit += 1;
  }
  return hit / total;
}

}  // namespace

TEST_CASE("hand oracle values for the dock model") {
  CHECK(erm::testing::kDockObservationalY1GivenX1 == doctest::Approx(0.64).epsilon(1e-12));
  CHECK(erm::testing::kDockDoY1 == doctest::Approx(0.40).epsilon(1e-12));
}

TEST_CASE("exact_conditional on the dock model") {
  Scm scm = dock_scm();
  CHECK(exact_conditional(scm, "Y", {{"X", "1"}}).prob("1") == doctest::Approx(erm::testing::kDockObservationalY1GivenX1).epsilon(1e-12));
  CHECK(exact_conditional(scm, "Y").prob("1") == doctest::Approx(0.40).epsilon(1e-12));
  auto d = exact_conditional(scm, "Y", {{"Z", "1"}});
  CHECK(d.probs()[0] + d.probs()[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact_conditional on an impossible event") {
  Scm scm = Scm::Builder()
                .variable("A", {"0", "1"})
                .variable("B", {"0", "1"})
                .edge("A", "B")
                .bernoulli_row("A", {}, 1.0)
                .bernoulli_row("B", {{"A", "0"}}, 0.5)
                .bernoulli_row("B", {{"A", "1"}}, 0.5)
                .build();
  CHECK_THROWS_AS(exact_conditional(scm, "B", {{"A", "0"}}), ZeroProbabilityEvidence);
  CHECK_THROWS_AS(exact_conditional(scm, "C"), UnknownVariable);
  CHECK_THROWS_AS(exact_conditional(scm, "B", {{"A", "2"}}), ValueOutOfDomain);
}

TEST_CASE("state space guard") {
  Scm::Builder b;
  std::vector<std::string> dom;
  for (int i = 0; i < 10; ++i) dom.push_back(std::to_string(i));
  std::map<std::string, double> uni;
  for (const auto& v : dom) uni[v] = 0.1;
  for (int i = 0; i < 8; ++i) {
    b.variable("V" + std::to_string(i), dom);
    b.row("V" + std::to_string(i), {}, uni);
  }
  Scm scm = b.build();  // 10^8 joint states
  CHECK_THROWS_AS(exact_conditional(scm, "V0"), StateSpaceTooLarge);
}

TEST_CASE("exact_do_distribution") {
  Scm scm = dock_scm();
  CHECK(exact_do_distribution(scm, "Y", {"X", "1"}).prob("1") == doctest::Approx(0.40).epsilon(1e-12));
  CHECK(exact_do_distribution(scm, "Y", {"X", "0"}).prob("1") == doctest::Approx(0.40).epsilon(1e-12));

  SUBCASE("rung collapse gap") {
    double gap = exact_conditional(scm, "Y", {{"X", "1"}}).prob("1") - exact_do_distribution(scm, "Y", {"X", "1"}).prob("1");
    CHECK(gap == doctest::Approx(0.24).epsilon(1e-12));
  }
  SUBCASE("confounder stratification under do") {
    CHECK(exact_do_conditional(scm, "Y", {"X", "1"}, {{"Z", "1"}}).prob("1") == doctest::Approx(0.7));
    CHECK(exact_do_conditional(scm, "Y", {"X", "1"}, {{"Z", "0"}}).prob("1") == doctest::Approx(0.1));
    CHECK(std::abs(exact_do_distribution(scm, "Z", {"X", "1"}).prob("1") - exact_conditional(scm, "Z").prob("1")) < 1e-12);
  }
  SUBCASE("deterministic chain propagates") {
    Scm chain = load_scm(erm::testing::scenario_path("chain"));
    CHECK(exact_do_distribution(chain, "Y", {"X", "1"}).prob("1") == 1.0);
    CHECK(exact_do_distribution(chain, "Y", {"X", "0"}).prob("1") == 0.0);
    CHECK(exact_do_distribution(chain, "Y", {"M", "0"}).prob("1") == 0.0);
  }
  CHECK_THROWS_AS(exact_do_distribution(scm, "Y", {"W", "1"}), UnknownVariable);
  CHECK_THROWS_AS(exact_do_distribution(scm, "Y", {"X", "red"}), ValueOutOfDomain);
}

TEST_CASE("sample_observational") {
  SUBCASE("dock conditional frequency") {
    Samples s = draw_observational(dock_scm(), 200000, NoiseKey{1, 0, 0});
    CHECK(std::abs(s.conditional("Y", {{"X", "1"}}).prob("1") - 0.64) <= 0.01);
  }
  SUBCASE("degenerate CPT") {
    Scm one = Scm::Builder().variable("Y", {"0", "1"}).bernoulli_row("Y", {}, 1.0).build();
    auto samples = sample_observational(one, 10);
    REQUIRE(samples.size() == 10);
    for (const auto& s : samples) CHECK(s.at("Y") == "1");
  }
  SUBCASE("deterministic given seed") {
    Scm scm = dock_scm(5);
    CHECK(sample_observational(scm, 500) == sample_observational(scm, 500));
    CHECK(sample_observational(scm, 500) != sample_observational(scm.with_seed(6), 500));
  }
  SUBCASE("WorldState covers the variable set") {
    for (const auto& s : sample_observational(dock_scm(), 5)) CHECK(s.assignment.size() == 3);
  }
  CHECK_THROWS_AS(draw_observational(dock_scm(), 0, {}), InvalidParameter);
}

TEST_CASE("sample_interventional") {
  Scm scm = dock_scm();
  SUBCASE("dock do(X=1)") {
    auto samples = sample_interventional(scm, {"X", "1"}, 200000);
    CHECK(std::abs(frequency(samples, "Y", "1") - 0.40) <= 0.01);
    for (std::size_t i = 0; i < 1000; ++i) CHECK(samples[i].at("X") == "1");
  }
  SUBCASE("root without descendants leaves other marginals unchanged") {
    Scm iso = Scm::Builder()
                  .variable("R", {"0", "1"})
                  .variable("A", {"0", "1"})
                  .variable("B", {"0", "1"})
                  .edge("A", "B")
                  .bernoulli_row("R", {}, 0.3)
                  .bernoulli_row("A", {}, 0.6)
                  .bernoulli_row("B", {{"A", "0"}}, 0.2)
                  .bernoulli_row("B", {{"A", "1"}}, 0.9)
                  .build();
    for (const char* v : {"A", "B"}) {
      CHECK(sup_norm(exact_do_distribution(iso, v, {"R", "1"}), exact_conditional(iso, v)) < 1e-12);
    }
    // Shared counter noise: surgery on an isolated root leaves the other columns identical.
    Samples obs = draw_observational(iso, 1000, NoiseKey{3, 0, 0});
    Samples itv = draw_interventional(iso, {"R", "1"}, 1000, NoiseKey{3, 0, 0});
    for (std::size_t r = 0; r < 1000; ++r) {
      CHECK(obs.value_index(r, 1) == itv.value_index(r, 1));
      CHECK(obs.value_index(r, 2) == itv.value_index(r, 2));
    }
  }
  SUBCASE("stratified by the confounder") {
    auto samples = sample_interventional(scm, {"X", "1"}, 200000);
    CHECK(std::abs(frequency(samples, "Y", "1", {{"Z", "1"}}) - 0.7) <= 0.01);
    CHECK(std::abs(frequency(samples, "Y", "1", {{"Z", "0"}}) - 0.1) <= 0.01);
  }
  CHECK_THROWS_AS(sample_interventional(scm, {"Q", "1"}, 3), UnknownVariable);
  CHECK_THROWS_AS(sample_interventional(scm, {"X", "7"}, 3), ValueOutOfDomain);
}

TEST_CASE("graph surgery keeps every other mechanism bit-identical") {
  for (const char* name : {"dock", "clinic", "sprinkler", "market", "chain"}) {
    Scm scm = load_scm(erm::testing::scenario_path(name));
    for (const auto& var : scm.variables()) {
      for (const auto& val : var.domain) {
        Scm cut = scm.intervene({var.name, val});
        for (std::size_t v = 0; v < scm.num_variables(); ++v) {
          if (scm.variables()[v].name == var.name) {
            CHECK(cut.cpt(v).parents.empty());
          } else {
            CHECK(cut.cpt(v) == scm.cpt(v));
          }
        }
      }
    }
  }
}

TEST_CASE("leaky actuator breaks confounder immunity") {
  Scm scm = dock_scm();
  Samples clean = draw_interventional(scm, {"X", "1"}, 100000, NoiseKey{9, 0, 0});
  Samples leaky = draw_interventional(scm, {"X", "1"}, 100000, NoiseKey{9, 0, 0}, Actuator{0.8});
  // Under a clean actuator X carries no information about Z.
  CHECK(std::abs(clean.conditional("Z", {{"X", "1"}}).prob("1") - 0.5) < 0.01);
  // A leaky actuator lets Z flow through X again.
  CHECK(leaky.conditional("Z", {{"X", "1"}}).prob("1") > 0.6);
  CHECK(std::abs(leaky.conditional("Y", {{"X", "1"}}).prob("1") - 0.40) > 0.03);
}

TEST_CASE("invalid models are rejected") {
  CHECK_THROWS_AS(Scm::Builder()
                      .variable("A", {"0", "1"})
                      .variable("B", {"0", "1"})
                      .edge("A", "B")
                      .edge("B", "A")
                      .build(),
                  InvalidScm);
  CHECK_THROWS_AS(Scm::Builder().variable("A", {"0", "1"}).row("A", {}, {{"0", 0.5}, {"1", 0.4}}).build(), InvalidScm);
  CHECK_THROWS_AS(Scm::Builder()
                      .variable("A", {"0", "1"})
                      .variable("B", {"0", "1"})
                      .edge("A", "B")
                      .bernoulli_row("A", {}, 0.5)
                      .bernoulli_row("B", {{"A", "0"}}, 0.5)
                      .build(),
                  InvalidScm);
  CHECK_THROWS_AS(Scm::Builder().variable("A", {"0", "1"}).bernoulli_row("A", {}, 0.5).bernoulli_row("A", {}, 0.5).build(),
                  InvalidScm);
}

TEST_CASE("scenario JSON round-trip") {
  Scm scm = load_scm(erm::testing::scenario_path("sprinkler"));
  CHECK(scm_from_json(scm_to_json(scm)) == scm);
  CHECK(scm.variable("Season").domain.size() == 3);
  CHECK(scm.parents("Grass") == std::vector<std::string>{"Sprinkler", "Rain"});
  CHECK_THROWS_AS(scm_from_json(nlohmann::json::parse(R"({"variables": 3})")), FormatError);
}

TEST_CASE("detect_rung_collapse") {
  CHECK(detect_rung_collapse(Distribution::bernoulli(0.64), Distribution::bernoulli(0.40), 0.05));
  CHECK_FALSE(detect_rung_collapse(Distribution::bernoulli(0.4), Distribution::bernoulli(0.4), 0.05));
  CHECK_FALSE(detect_rung_collapse(Distribution::bernoulli(0.41), Distribution::bernoulli(0.40), 0.05));
  CHECK_THROWS_AS(detect_rung_collapse(Distribution::bernoulli(0.4), Distribution::uniform({"a", "b", "c"}), 0.05),
                  DomainMismatch);
}

TEST_CASE("propagate_intervention resamples only descendants") {
  Scm scm = load_scm(erm::testing::scenario_path("clinic"));
  WorldState s{{{"Genotype", "high"}, {"Smoking", "yes"}, {"Tar", "yes"}, {"Cancer", "yes"}}, std::nullopt};
  for (std::uint64_t i = 0; i < 50; ++i) {
    WorldState t = propagate_intervention(scm, s, {"Tar", "no"}, NoiseKey{1, 0, i});
    CHECK(t.at("Genotype") == "high");
    CHECK(t.at("Smoking") == "yes");
    CHECK(t.at("Tar") == "no");
  }
}
