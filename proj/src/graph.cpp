#include "erm/graph.hpp"

#include <algorithm>
#include <deque>
#include <queue>

namespace erm {

CausalClaim::CausalClaim(std::string f, std::string t) : from(std::move(f)), to(std::move(t)) {
  if (from == to) throw InvalidGraph("a causal claim needs distinct endpoints, got " + from + " -> " + to);
}

std::string to_string(const CausalClaim& c) { return c.from + " -> " + c.to; }

CausalGraph::CausalGraph(std::vector<std::string> variables, double theta_min, double theta_max) {
  for (auto& v : variables) add_variable(v);
  set_thresholds(theta_min, theta_max);
}

bool CausalGraph::has_variable(const std::string& v) const {
  return std::find(variables_.begin(), variables_.end(), v) != variables_.end();
}

void CausalGraph::add_variable(const std::string& v) {
  if (v.empty()) throw InvalidGraph("empty variable name");
  if (!has_variable(v)) variables_.push_back(v);
}

void CausalGraph::set_thresholds(double theta_min, double theta_max) {
  if (!(theta_min >= 0.0 && theta_max <= 1.0 && theta_min < theta_max)) {
    throw InvalidGraph("thresholds must satisfy 0 <= theta_min < theta_max <= 1");
  }
  theta_min_ = theta_min;
  theta_max_ = theta_max;
}

void CausalGraph::require_variable(const std::string& v) const {
  if (!has_variable(v)) throw UnknownVariable("graph has no variable '" + v + "'");
}

void CausalGraph::set_edge(const std::string& from, const std::string& to, double weight) {
  require_variable(from);
  require_variable(to);
  if (from == to) throw InvalidGraph("self-loop on '" + from + "'");
  if (!(weight >= 0.0 && weight <= 1.0)) throw InvalidGraph("edge weight must be in [0,1]");
  edges_[{from, to}] = weight;
}

bool CausalGraph::remove_edge(const std::string& from, const std::string& to) {
  return edges_.erase({from, to}) > 0;
}

bool CausalGraph::has_edge(const std::string& from, const std::string& to) const {
  return edges_.count({from, to}) > 0;
}

std::optional<double> CausalGraph::weight(const std::string& from, const std::string& to) const {
  auto it = edges_.find({from, to});
  if (it == edges_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::vector<std::string>> CausalGraph::topological_order() const {
  std::map<std::string, std::size_t> indegree;
  for (const auto& v : variables_) indegree[v] = 0;
  for (const auto& [e, _] : edges_) ++indegree[e.second];
  std::priority_queue<std::string, std::vector<std::string>, std::greater<>> ready;
  for (const auto& [v, d] : indegree) {
    if (d == 0) ready.push(v);
  }
  std::vector<std::string> order;
  while (!ready.empty()) {
    std::string v = ready.top();
    ready.pop();
    order.push_back(v);
    for (auto it = edges_.lower_bound({v, ""}); it != edges_.end() && it->first.first == v; ++it) {
      if (--indegree[it->first.second] == 0) ready.push(it->first.second);
    }
  }
  if (order.size() != variables_.size()) return std::nullopt;
  return order;
}

bool CausalGraph::is_acyclic() const { return topological_order().has_value(); }

BeliefSet belief_set(const CausalGraph& graph) {
  BeliefSet out;
  for (const auto& [e, w] : graph.edges()) {
    if (w > graph.theta_min()) out.claims.emplace(e.first, e.second);
  }
  return out;
}

CausalGraph graph_from_claims(const std::vector<std::string>& variables, const std::vector<CausalClaim>& claims,
                              double theta_min, double theta_max) {
  CausalGraph g(variables, theta_min, theta_max);
  for (const auto& c : claims) g.set_edge(c.from, c.to, 1.0);
  return g;
}

namespace {

// First cycle met by a DFS over names in sorted order, as a list of edges.
std::optional<std::vector<CausalClaim>> find_cycle(const std::map<std::pair<std::string, std::string>, double>& edges,
                                                   const std::vector<std::string>& variables) {
  std::vector<std::string> names = variables;
  std::sort(names.begin(), names.end());
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& [e, _] : edges) adj[e.first].push_back(e.second);

  enum class Mark { White, Grey, Black };
  std::map<std::string, Mark> mark;
  for (const auto& v : names) mark[v] = Mark::White;

  for (const auto& root : names) {
    if (mark[root] != Mark::White) continue;
    // Stack of (vertex, next child index).
    std::vector<std::pair<std::string, std::size_t>> stack{{root, 0}};
    mark[root] = Mark::Grey;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      const auto& children = adj[v];
      if (next == children.size()) {
        mark[v] = Mark::Black;
        stack.pop_back();
        continue;
      }
      const std::string child = children[next++];
      if (mark[child] == Mark::Grey) {
        std::vector<CausalClaim> cycle;
        std::size_t start = 0;
        while (stack[start].first != child) ++start;
        for (std::size_t i = start; i + 1 < stack.size(); ++i) cycle.emplace_back(stack[i].first, stack[i + 1].first);
        cycle.emplace_back(stack.back().first, child);
        return cycle;
      }
      if (mark[child] == Mark::White) {
        mark[child] = Mark::Grey;
        stack.emplace_back(child, 0);
      }
    }
  }
  return std::nullopt;
}

}  // namespace

std::vector<RemovedEdge> cycle_breaking_removals(const CausalGraph& graph, const std::set<CausalClaim>& keep) {
  auto edges = graph.edges();
  std::vector<RemovedEdge> removed;
  while (auto cycle = find_cycle(edges, graph.variables())) {
    bool all_kept = std::all_of(cycle->begin(), cycle->end(), [&](const CausalClaim& c) { return keep.count(c) > 0; });
    const CausalClaim* lightest = nullptr;
    double lightest_w = 0.0;
    for (const auto& c : *cycle) {
      if (!all_kept && keep.count(c)) continue;
      double w = edges.at({c.from, c.to});
      if (!lightest || w < lightest_w || (w == lightest_w && c < *lightest)) {
        lightest = &c;
        lightest_w = w;
      }
    }
    removed.push_back(RemovedEdge{*lightest, lightest_w});
    edges.erase({lightest->from, lightest->to});
  }
  return removed;
}

CausalGraph enforce_dag(const CausalGraph& graph, const std::set<CausalClaim>& keep) {
  CausalGraph out = graph;
  for (const auto& r : cycle_breaking_removals(graph, keep)) out.remove_edge(r.edge.from, r.edge.to);
  return out;
}

double consistency_loss(const CausalGraph& graph) {
  double total = 0.0;
  for (const auto& r : cycle_breaking_removals(graph)) total += r.weight;
  return total;
}

std::vector<CausalClaim> believed_path(const CausalGraph& graph, const std::string& from, const std::string& to) {
  BeliefSet beliefs = belief_set(graph);
  std::map<std::string, std::vector<std::string>> adj;
  for (const auto& c : beliefs.claims) adj[c.from].push_back(c.to);  // sorted by construction
  std::map<std::string, std::string> parent;
  std::deque<std::string> queue{from};
  parent[from] = from;
  while (!queue.empty()) {
    std::string v = queue.front();
    queue.pop_front();
    if (v == to) break;
    for (const auto& w : adj[v]) {
      if (parent.count(w)) continue;
      parent[w] = v;
      queue.push_back(w);
    }
  }
  if (from == to || !parent.count(to)) return {};
  std::vector<CausalClaim> path;
  for (std::string v = to; v != from; v = parent[v]) path.emplace_back(parent[v], v);
  std::reverse(path.begin(), path.end());
  return path;
}

Distribution predict_do(const CausalGraph& graph, const Intervention& iv, const std::string& outcome,
                        const Samples& evidence, const PredictOptions& options) {
  if (!graph.has_variable(iv.target)) throw UnknownVariable("graph has no variable '" + iv.target + "'");
  if (!graph.has_variable(outcome)) throw UnknownVariable("graph has no variable '" + outcome + "'");

  const Variable* outcome_var = nullptr;
  for (const auto& v : evidence.variables()) {
    if (v.name == outcome) outcome_var = &v;
  }
  if (!outcome_var) {
    throw NoEvidence("evidence table has no column for '" + outcome + "'");
  }
  if (outcome == iv.target) return Distribution::point_mass(outcome_var->domain, iv.value);

  auto estimate = [&](const std::string& var, const Assignment& given) -> Distribution {
    try {
      return evidence.conditional(var, given);
    } catch (const NoEvidence&) {
      if (!options.uniform_prior) throw;
      for (const auto& v : evidence.variables()) {
        if (v.name == var) return Distribution::uniform(v.domain);
      }
      throw;
    }
  };

  std::vector<CausalClaim> path = believed_path(graph, iv.target, outcome);
  if (path.empty()) return estimate(outcome, {});

  // Push the point mass on the intervened value through each believed edge.
  std::vector<std::string> current_values{iv.value};
  std::vector<double> current_probs{1.0};
  for (const auto& step : path) {
    std::vector<std::string> next_values;
    std::vector<double> next_probs;
    for (std::size_t i = 0; i < current_values.size(); ++i) {
      if (current_probs[i] == 0.0) continue;
      Distribution table = estimate(step.to, {{step.from, current_values[i]}});
      if (next_values.empty()) {
        next_values = table.values();
        next_probs.assign(next_values.size(), 0.0);
      }
      for (std::size_t k = 0; k < table.size(); ++k) next_probs[k] += current_probs[i] * table.probs()[k];
    }
    current_values = std::move(next_values);
    current_probs = std::move(next_probs);
  }
  return Distribution(current_values, current_probs);
}

nlohmann::json graph_to_json(const CausalGraph& graph) {
  nlohmann::json doc;
  doc["variables"] = graph.variables();
  doc["edges"] = nlohmann::json::array();
  for (const auto& [e, w] : graph.edges()) doc["edges"].push_back({e.first, e.second, w});
  doc["theta_min"] = graph.theta_min();
  doc["theta_max"] = graph.theta_max();
  return doc;
}

CausalGraph graph_from_json(const nlohmann::json& doc) {
  try {
    CausalGraph g(doc.at("variables").get<std::vector<std::string>>(), doc.value("theta_min", kDefaultThetaMin),
                  doc.value("theta_max", kDefaultThetaMax));
    for (const auto& e : doc.at("edges")) {
      if (!e.is_array() || (e.size() != 2 && e.size() != 3)) {
        throw FormatError("graph edge must be [from, to] or [from, to, weight]");
      }
      g.set_edge(e[0].get<std::string>(), e[1].get<std::string>(),
                 e.size() == 3 ? e[2].get<double>() : kInitialEdgeWeight);
    }
    return g;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed graph document: ") + e.what());
  }
}

}  // namespace erm
