#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "erm/distribution.hpp"
#include "erm/scm.hpp"

namespace erm {

/// An asserted causal edge `from -> to`.
struct CausalClaim {
  std::string from;
  std::string to;

  CausalClaim() = default;
  CausalClaim(std::string f, std::string t);

  friend bool operator==(const CausalClaim&, const CausalClaim&) = default;
  friend auto operator<=>(const CausalClaim&, const CausalClaim&) = default;
};

std::string to_string(const CausalClaim& c);

struct BeliefSet {
  std::set<CausalClaim> claims;

  bool contains(const CausalClaim& c) const { return claims.count(c) > 0; }
  std::size_t size() const { return claims.size(); }
  friend bool operator==(const BeliefSet&, const BeliefSet&) = default;
};

inline constexpr double kInitialEdgeWeight = 0.5;
inline constexpr double kDefaultThetaMin = 0.2;
inline constexpr double kDefaultThetaMax = 0.8;

/// The agent's weighted causal graph. Edge insertion does not check for
/// cycles; callers restore acyclicity with enforce_dag before the graph is
/// handed out.
class CausalGraph {
 public:
  CausalGraph() = default;
  CausalGraph(std::vector<std::string> variables, double theta_min = kDefaultThetaMin,
              double theta_max = kDefaultThetaMax);

  const std::vector<std::string>& variables() const { return variables_; }
  bool has_variable(const std::string& v) const;
  void add_variable(const std::string& v);

  double theta_min() const { return theta_min_; }
  double theta_max() const { return theta_max_; }
  void set_thresholds(double theta_min, double theta_max);

  /// Inserts or overwrites an edge. Weight must lie in [0,1].
  void set_edge(const std::string& from, const std::string& to, double weight = kInitialEdgeWeight);
  bool remove_edge(const std::string& from, const std::string& to);
  bool has_edge(const std::string& from, const std::string& to) const;
  std::optional<double> weight(const std::string& from, const std::string& to) const;

  /// Edges keyed by (from, to), in lexicographic order.
  const std::map<std::pair<std::string, std::string>, double>& edges() const { return edges_; }
  std::size_t num_edges() const { return edges_.size(); }

  bool is_acyclic() const;
  /// A deterministic topological order, or nullopt when a cycle exists.
  std::optional<std::vector<std::string>> topological_order() const;

  friend bool operator==(const CausalGraph&, const CausalGraph&) = default;

 private:
  void require_variable(const std::string& v) const;

  std::vector<std::string> variables_;
  std::map<std::pair<std::string, std::string>, double> edges_;
  double theta_min_ = kDefaultThetaMin;
  double theta_max_ = kDefaultThetaMax;
};

/// Edges with weight strictly above theta_min.
BeliefSet belief_set(const CausalGraph& graph);

/// Builds a graph holding exactly `claims`, each at weight 1.
CausalGraph graph_from_claims(const std::vector<std::string>& variables, const std::vector<CausalClaim>& claims,
                              double theta_min = kDefaultThetaMin, double theta_max = kDefaultThetaMax);

struct RemovedEdge {
  CausalClaim edge;
  double weight = 0.0;
};

/// Greedy cycle breaking: while a cycle exists, drop the lightest edge on
/// the first cycle found (ties broken by smallest (from, to)). Edges in
/// `keep` are dropped only from cycles made entirely of kept edges.
std::vector<RemovedEdge> cycle_breaking_removals(const CausalGraph& graph, const std::set<CausalClaim>& keep = {});
CausalGraph enforce_dag(const CausalGraph& graph, const std::set<CausalClaim>& keep = {});
/// Total weight removed by enforce_dag; 0 iff the graph is acyclic.
double consistency_loss(const CausalGraph& graph);

struct PredictOptions {
  /// Fall back to a uniform prediction instead of throwing NoEvidence.
  bool uniform_prior = false;
};

/// The agent's predicted P(outcome | do(iv)) under `graph`, estimated from
/// the evidence table. Only believed edges are used. A believed direct edge
/// yields the evidence conditional; a believed multi-hop path composes the
/// per-edge conditionals; no believed path yields the evidence marginal.
Distribution predict_do(const CausalGraph& graph, const Intervention& iv, const std::string& outcome,
                        const Samples& evidence, const PredictOptions& options = {});

/// Believed directed path from `from` to `to` (shortest, lexicographically
/// smallest), as a list of claims. Empty when none exists.
std::vector<CausalClaim> believed_path(const CausalGraph& graph, const std::string& from, const std::string& to);

nlohmann::json graph_to_json(const CausalGraph& graph);
CausalGraph graph_from_json(const nlohmann::json& doc);

}  // namespace erm
