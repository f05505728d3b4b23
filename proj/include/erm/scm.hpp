#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "erm/distribution.hpp"

namespace erm {

using Assignment = std::map<std::string, std::string>;

struct Variable {
  std::string name;
  std::vector<std::string> domain;

  friend bool operator==(const Variable&, const Variable&) = default;
};

/// do(target = value).
struct Intervention {
  std::string target;
  std::string value;

  friend bool operator==(const Intervention&, const Intervention&) = default;
  friend auto operator<=>(const Intervention&, const Intervention&) = default;
};

std::string to_string(const Intervention& iv);

/// A full assignment of the model's variables, optionally with a numeric
/// embedding used by embedding-based state metrics.
struct WorldState {
  Assignment assignment;
  std::optional<std::vector<double>> metric_embedding;

  const std::string& at(const std::string& var) const;

  friend bool operator==(const WorldState&, const WorldState&) = default;
};

/// Conditional probability table of one variable. Rows are indexed by the
/// mixed-radix encoding of the parents' value indices, in parent order with
/// the last parent varying fastest.
struct Cpt {
  std::vector<std::size_t> parents;
  std::vector<std::vector<double>> rows;

  friend bool operator==(const Cpt&, const Cpt&) = default;
};

/// Discrete structural causal model. Immutable once built.
class Scm {
 public:
  class Builder;

  const std::vector<Variable>& variables() const { return variables_; }
  std::size_t num_variables() const { return variables_.size(); }
  std::size_t index_of(const std::string& name) const;
  bool has_variable(const std::string& name) const;
  const Variable& variable(const std::string& name) const { return variables_[index_of(name)]; }

  const Cpt& cpt(std::size_t var) const { return cpts_[var]; }
  const Cpt& cpt(const std::string& name) const { return cpts_[index_of(name)]; }
  std::vector<std::string> parents(const std::string& name) const;
  std::vector<std::string> children(const std::string& name) const;
  /// Edges of the ground-truth graph as (parent, child) pairs.
  std::vector<std::pair<std::string, std::string>> edges() const;

  const std::vector<std::size_t>& topological_order() const { return topo_; }
  std::uint64_t seed() const { return seed_; }
  Scm with_seed(std::uint64_t seed) const;

  /// Graph surgery: the target's mechanism becomes the constant `iv.value`
  /// and loses its parents. Every other CPT is copied unchanged.
  Scm intervene(const Intervention& iv) const;

  void validate_intervention(const Intervention& iv) const;
  /// Index of the CPT row selected by `values` (value index per variable).
  std::size_t row_index(std::size_t var, const std::vector<std::size_t>& values) const;

  /// Throws InvalidScm if the parent relation is cyclic or a CPT is
  /// malformed.
  void validate() const;

  friend bool operator==(const Scm&, const Scm&) = default;

 private:
  friend class Builder;
  std::vector<Variable> variables_;
  std::vector<Cpt> cpts_;
  std::vector<std::size_t> topo_;
  std::uint64_t seed_ = 0;
};

class Scm::Builder {
 public:
  Builder& variable(std::string name, std::vector<std::string> domain);
  Builder& edge(const std::string& parent, const std::string& child);
  /// Sets the row for the parent assignment `given`. All parents of `child`
  /// must be assigned in `given`.
  Builder& row(const std::string& child, const Assignment& given,
               const std::map<std::string, double>& dist);
  /// Shorthand for a binary variable: P(child = "1" | given) = p.
  Builder& bernoulli_row(const std::string& child, const Assignment& given, double p);
  Builder& seed(std::uint64_t s);

  Scm build() const;

 private:
  struct PendingRow {
    std::string child;
    Assignment given;
    std::map<std::string, double> dist;
  };
  std::vector<Variable> variables_;
  std::vector<std::pair<std::string, std::string>> edges_;
  std::vector<PendingRow> rows_;
  std::uint64_t seed_ = 0;
};

/// Key for the counter-based noise source. Draw `i` of variable `v` is a
/// pure function of (seed, stream, v, first_index + i).
struct NoiseKey {
  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t first_index = 0;
};

/// Uniform [0,1) draw from the counter-based generator.
double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                       std::uint64_t variable, std::uint64_t index);

/// Actuator used by sample_interventional. With `leak` > 0 the actuator
/// violates actuator independence: with that probability the target keeps
/// the value its own mechanism would have produced from its parents.
struct Actuator {
  double leak = 0.0;
};

/// Row-major table of sampled value indices.
class Samples {
 public:
  Samples() = default;
  Samples(std::vector<Variable> variables, std::vector<std::uint16_t> data);

  std::size_t size() const;
  std::size_t num_variables() const { return variables_.size(); }
  const std::vector<Variable>& variables() const { return variables_; }

  std::size_t value_index(std::size_t row, std::size_t var) const {
    return data_[row * variables_.size() + var];
  }
  const std::string& value(std::size_t row, const std::string& var) const;
  WorldState state(std::size_t row) const;
  std::vector<WorldState> states() const;

  /// Empirical marginal of `var`. Throws NoEvidence on an empty table.
  Distribution marginal(const std::string& var) const;
  /// Empirical P(var | given). Throws NoEvidence when no row matches.
  Distribution conditional(const std::string& var, const Assignment& given) const;
  std::size_t count_matching(const Assignment& given) const;

 private:
  std::size_t column(const std::string& var) const;
  std::vector<Variable> variables_;
  std::vector<std::uint16_t> data_;
};

Samples draw_observational(const Scm& scm, std::size_t n, const NoiseKey& key);
Samples draw_interventional(const Scm& scm, const Intervention& iv, std::size_t n,
                            const NoiseKey& key, const Actuator& actuator = {});

/// n i.i.d. observational samples keyed by the model's own seed.
std::vector<WorldState> sample_observational(const Scm& scm, std::size_t n);
/// n samples of the mutilated model do(iv), keyed by the model's own seed.
std::vector<WorldState> sample_interventional(const Scm& scm, const Intervention& iv,
                                              std::size_t n);

/// Re-samples every descendant of `iv.target` after forcing it, keeping the
/// other variables of `state`. Used to apply one physical action to a world.
WorldState propagate_intervention(const Scm& scm, const WorldState& state,
                                  const Intervention& iv, const NoiseKey& key);

inline constexpr double kMaxEnumeratedStates = 1e7;

/// Exact P(outcome | given) by full enumeration of the joint.
Distribution exact_conditional(const Scm& scm, const std::string& outcome,
                               const Assignment& given = {});
/// Exact P(outcome | do(iv)) by enumeration of the mutilated model.
Distribution exact_do_distribution(const Scm& scm, const std::string& outcome,
                                   const Intervention& iv);
/// Exact P(outcome | do(iv), given).
Distribution exact_do_conditional(const Scm& scm, const std::string& outcome,
                                  const Intervention& iv, const Assignment& given);

/// True iff the distribution backing an answer differs from the
/// interventional truth by more than `tol` in total variation.
bool detect_rung_collapse(const Distribution& answer_source,
                          const Distribution& l2_truth, double tol);

Scm scm_from_json(const nlohmann::json& doc);
nlohmann::json scm_to_json(const Scm& scm);
Scm load_scm(const std::string& path);

}  // namespace erm
