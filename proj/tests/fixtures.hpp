#pragma once

#include <string>

#include "erm/scm.hpp"

namespace erm::testing {

inline std::string scenario_path(const std::string& name) {
  return std::string(ERM_SOURCE_DIR) + "/scenarios/" + name + ".json";
}

/// Z ~ Bern(0.5); P(X=1|Z) = 0.9 / 0.1; P(Y=1|Z) = 0.7 / 0.1.
inline Scm dock_scm(std::uint64_t seed = 20260118) {
  return Scm::Builder()
      .variable("Z", {"0", "1"})
      .variable("X", {"0", "1"})
      .variable("Y", {"0", "1"})
      .edge("Z", "X")
      .edge("Z", "Y")
      .bernoulli_row("Z", {}, 0.5)
      .bernoulli_row("X", {{"Z", "0"}}, 0.1)
      .bernoulli_row("X", {{"Z", "1"}}, 0.9)
      .bernoulli_row("Y", {{"Z", "0"}}, 0.1)
      .bernoulli_row("Y", {{"Z", "1"}}, 0.7)
      .seed(seed)
      .build();
}

// Hand enumeration of the dock model, independent of the library oracle.
inline constexpr double kDockObservationalY1GivenX1 = (0.5 * 0.9 * 0.7 + 0.5 * 0.1 * 0.1) / (0.5 * 0.9 + 0.5 * 0.1);
inline constexpr double kDockDoY1 = 0.5 * 0.7 + 0.5 * 0.1;

}  // namespace erm::testing
