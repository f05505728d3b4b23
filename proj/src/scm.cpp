#include "erm/scm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>
#include <set>

namespace erm {

namespace {

constexpr double kRowSumTolerance = 1e-9;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix64(a ^ (splitmix64(b) + 0x9e3779b97f4a7c15ULL + (a << 6) + (a >> 2)));
}

// Stream offset reserved for the leaky-actuator coin.
constexpr std::uint64_t kLeakStream = 0x4c45414b;

std::size_t sample_from_row(const std::vector<double>& row, double u) {
  double acc = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    acc += row[k];
    if (u < acc) return k;
  }
  // u lands beyond the accumulated mass only through rounding; take the last
  // value with positive probability.
  for (std::size_t k = row.size(); k-- > 0;) {
    if (row[k] > 0.0) return k;
  }
  return row.size() - 1;
}

std::string json_value_to_string(const nlohmann::json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) return v.dump();
  throw FormatError("domain values must be strings, integers or booleans, got " + v.dump());
}

}  // namespace

std::string to_string(const Intervention& iv) {
  return "do(" + iv.target + "=" + iv.value + ")";
}

const std::string& WorldState::at(const std::string& var) const {
  auto it = assignment.find(var);
  if (it == assignment.end()) throw UnknownVariable("state has no variable '" + var + "'");
  return it->second;
}

double counter_uniform(std::uint64_t seed, std::uint64_t stream, std::uint64_t variable,
                       std::uint64_t index) {
  std::uint64_t h = mix(mix(mix(splitmix64(seed), stream), variable), index);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// Scm

std::size_t Scm::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].name == name) return i;
  }
  throw UnknownVariable("unknown variable '" + name + "'");
}

bool Scm::has_variable(const std::string& name) const {
  return std::any_of(variables_.begin(), variables_.end(),
                     [&](const Variable& v) { return v.name == name; });
}

std::vector<std::string> Scm::parents(const std::string& name) const {
  std::vector<std::string> out;
  for (std::size_t p : cpts_[index_of(name)].parents) out.push_back(variables_[p].name);
  return out;
}

std::vector<std::string> Scm::children(const std::string& name) const {
  std::size_t idx = index_of(name);
  std::vector<std::string> out;
  for (std::size_t v = 0; v < variables_.size(); ++v) {
    const auto& ps = cpts_[v].parents;
    if (std::find(ps.begin(), ps.end(), idx) != ps.end()) out.push_back(variables_[v].name);
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> Scm::edges() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t v = 0; v < variables_.size(); ++v) {
    for (std::size_t p : cpts_[v].parents) out.emplace_back(variables_[p].name, variables_[v].name);
  }
  return out;
}

Scm Scm::with_seed(std::uint64_t seed) const {
  Scm copy = *this;
  copy.seed_ = seed;
  return copy;
}

void Scm::validate_intervention(const Intervention& iv) const {
  const Variable& var = variables_[index_of(iv.target)];
  if (std::find(var.domain.begin(), var.domain.end(), iv.value) == var.domain.end()) {
    throw ValueOutOfDomain("value '" + iv.value + "' is not in the domain of '" + iv.target + "'");
  }
}

Scm Scm::intervene(const Intervention& iv) const {
  validate_intervention(iv);
  Scm out = *this;
  std::size_t t = index_of(iv.target);
  const auto& domain = variables_[t].domain;
  std::vector<double> row(domain.size(), 0.0);
  row[static_cast<std::size_t>(std::find(domain.begin(), domain.end(), iv.value) - domain.begin())] = 1.0;
  out.cpts_[t] = Cpt{{}, {std::move(row)}};
  return out;
}

std::size_t Scm::row_index(std::size_t var, const std::vector<std::size_t>& values) const {
  std::size_t idx = 0;
  for (std::size_t p : cpts_[var].parents) idx = idx * variables_[p].domain.size() + values[p];
  return idx;
}

void Scm::validate() const {
  if (variables_.empty()) throw InvalidScm("model has no variables");
  if (cpts_.size() != variables_.size()) throw InvalidScm("one CPT per variable required");
  std::set<std::string> names;
  for (const auto& v : variables_) {
    if (v.name.empty()) throw InvalidScm("empty variable name");
    if (!names.insert(v.name).second) throw InvalidScm("duplicate variable '" + v.name + "'");
    if (v.domain.empty()) throw InvalidScm("variable '" + v.name + "' has an empty domain");
    if (v.domain.size() > 65535) throw InvalidScm("domain of '" + v.name + "' is too large");
    std::set<std::string> vals(v.domain.begin(), v.domain.end());
    if (vals.size() != v.domain.size()) throw InvalidScm("duplicate value in domain of '" + v.name + "'");
  }
  if (topo_.size() != variables_.size()) throw InvalidScm("parent relation is cyclic");
  std::vector<std::size_t> position(variables_.size());
  for (std::size_t i = 0; i < topo_.size(); ++i) position[topo_[i]] = i;
  for (std::size_t v = 0; v < variables_.size(); ++v) {
    const Cpt& cpt = cpts_[v];
    std::size_t expected_rows = 1;
    for (std::size_t p : cpt.parents) {
      if (p >= variables_.size() || p == v) throw InvalidScm("bad parent of '" + variables_[v].name + "'");
      if (position[p] >= position[v]) throw InvalidScm("parent relation is cyclic");
      expected_rows *= variables_[p].domain.size();
    }
    if (cpt.rows.size() != expected_rows) {
      throw InvalidScm("CPT of '" + variables_[v].name + "' has " + std::to_string(cpt.rows.size()) +
                       " rows, expected " + std::to_string(expected_rows));
    }
    for (const auto& row : cpt.rows) {
      if (row.size() != variables_[v].domain.size()) {
        throw InvalidScm("CPT row of '" + variables_[v].name + "' does not match its domain");
      }
      double sum = 0.0;
      for (double p : row) {
        if (!(p >= 0.0) || p > 1.0) throw InvalidScm("probability out of [0,1] in CPT of '" + variables_[v].name + "'");
        sum += p;
      }
      if (std::abs(sum - 1.0) > kRowSumTolerance) {
        throw InvalidScm("CPT row of '" + variables_[v].name + "' sums to " + std::to_string(sum));
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Builder

Scm::Builder& Scm::Builder::variable(std::string name, std::vector<std::string> domain) {
  variables_.push_back(Variable{std::move(name), std::move(domain)});
  return *this;
}

Scm::Builder& Scm::Builder::edge(const std::string& parent, const std::string& child) {
  edges_.emplace_back(parent, child);
  return *this;
}

Scm::Builder& Scm::Builder::row(const std::string& child, const Assignment& given,
                                const std::map<std::string, double>& dist) {
  rows_.push_back(PendingRow{child, given, dist});
  return *this;
}

Scm::Builder& Scm::Builder::bernoulli_row(const std::string& child, const Assignment& given, double p) {
  return row(child, given, {{"0", 1.0 - p}, {"1", p}});
}

Scm::Builder& Scm::Builder::seed(std::uint64_t s) {
  seed_ = s;
  return *this;
}

Scm Scm::Builder::build() const {
  Scm scm;
  scm.variables_ = variables_;
  scm.seed_ = seed_;
  const std::size_t n = variables_.size();
  std::set<std::string> names;
  for (const auto& v : variables_) {
    if (!names.insert(v.name).second) throw InvalidScm("duplicate variable '" + v.name + "'");
  }
  auto find = [&](const std::string& name) -> std::size_t {
    for (std::size_t i = 0; i < n; ++i) {
      if (variables_[i].name == name) return i;
    }
    throw InvalidScm("edge or CPT refers to unknown variable '" + name + "'");
  };

  scm.cpts_.assign(n, Cpt{});
  for (const auto& [p, c] : edges_) {
    std::size_t pi = find(p), ci = find(c);
    if (pi == ci) throw InvalidScm("self-loop on '" + p + "'");
    auto& ps = scm.cpts_[ci].parents;
    if (std::find(ps.begin(), ps.end(), pi) != ps.end()) throw InvalidScm("duplicate edge " + p + "->" + c);
    ps.push_back(pi);
  }

  // Kahn's algorithm, smallest declaration index first.
  std::vector<std::size_t> indegree(n, 0);
  for (std::size_t v = 0; v < n; ++v) indegree[v] = scm.cpts_[v].parents.size();
  std::priority_queue<std::size_t, std::vector<std::size_t>, std::greater<>> ready;
  for (std::size_t v = 0; v < n; ++v) {
    if (indegree[v] == 0) ready.push(v);
  }
  while (!ready.empty()) {
    std::size_t v = ready.top();
    ready.pop();
    scm.topo_.push_back(v);
    for (std::size_t c = 0; c < n; ++c) {
      const auto& ps = scm.cpts_[c].parents;
      if (std::find(ps.begin(), ps.end(), v) != ps.end() && --indegree[c] == 0) ready.push(c);
    }
  }
  if (scm.topo_.size() != n) throw InvalidScm("parent relation is cyclic");

  std::vector<std::vector<bool>> filled(n);
  for (std::size_t v = 0; v < n; ++v) {
    std::size_t rows = 1;
    for (std::size_t p : scm.cpts_[v].parents) rows *= std::max<std::size_t>(variables_[p].domain.size(), 1);
    scm.cpts_[v].rows.assign(rows, std::vector<double>(variables_[v].domain.size(), 0.0));
    filled[v].assign(rows, false);
  }
  for (const auto& pending : rows_) {
    std::size_t v = find(pending.child);
    const Cpt& cpt = scm.cpts_[v];
    std::vector<std::size_t> values(n, 0);
    for (std::size_t p : cpt.parents) {
      auto it = pending.given.find(variables_[p].name);
      if (it == pending.given.end()) {
        throw InvalidScm("CPT row of '" + pending.child + "' does not assign parent '" + variables_[p].name + "'");
      }
      const auto& dom = variables_[p].domain;
      auto pos = std::find(dom.begin(), dom.end(), it->second);
      if (pos == dom.end()) throw InvalidScm("CPT row of '" + pending.child + "' uses unknown value '" + it->second + "'");
      values[p] = static_cast<std::size_t>(pos - dom.begin());
    }
    for (const auto& [k, _] : pending.given) {
      if (std::none_of(cpt.parents.begin(), cpt.parents.end(),
                       [&](std::size_t p) { return variables_[p].name == k; })) {
        throw InvalidScm("CPT row of '" + pending.child + "' conditions on non-parent '" + k + "'");
      }
    }
    std::size_t r = scm.row_index(v, values);
    if (filled[v][r]) throw InvalidScm("duplicate CPT row for '" + pending.child + "'");
    filled[v][r] = true;
    auto& row = scm.cpts_[v].rows[r];
    const auto& dom = variables_[v].domain;
    for (const auto& [value, prob] : pending.dist) {
      auto pos = std::find(dom.begin(), dom.end(), value);
      if (pos == dom.end()) throw InvalidScm("CPT of '" + pending.child + "' assigns unknown value '" + value + "'");
      row[static_cast<std::size_t>(pos - dom.begin())] = prob;
    }
  }
  for (std::size_t v = 0; v < n; ++v) {
    for (bool f : filled[v]) {
      if (!f) throw InvalidScm("CPT of '" + variables_[v].name + "' is missing a parent assignment");
    }
  }
  scm.validate();
  return scm;
}

// ---------------------------------------------------------------------------
// Samples

Samples::Samples(std::vector<Variable> variables, std::vector<std::uint16_t> data)
    : variables_(std::move(variables)), data_(std::move(data)) {}

std::size_t Samples::size() const {
  return variables_.empty() ? 0 : data_.size() / variables_.size();
}

std::size_t Samples::column(const std::string& var) const {
  for (std::size_t i = 0; i < variables_.size(); ++i) {
    if (variables_[i].name == var) return i;
  }
  throw UnknownVariable("unknown variable '" + var + "'");
}

const std::string& Samples::value(std::size_t row, const std::string& var) const {
  std::size_t c = column(var);
  return variables_[c].domain[value_index(row, c)];
}

WorldState Samples::state(std::size_t row) const {
  WorldState s;
  for (std::size_t c = 0; c < variables_.size(); ++c) {
    s.assignment.emplace(variables_[c].name, variables_[c].domain[value_index(row, c)]);
  }
  return s;
}

std::vector<WorldState> Samples::states() const {
  std::vector<WorldState> out;
  out.reserve(size());
  for (std::size_t r = 0; r < size(); ++r) out.push_back(state(r));
  return out;
}

Distribution Samples::marginal(const std::string& var) const { return conditional(var, {}); }

std::size_t Samples::count_matching(const Assignment& given) const {
  std::vector<std::pair<std::size_t, std::size_t>> filter;
  for (const auto& [k, v] : given) {
    std::size_t c = column(k);
    const auto& dom = variables_[c].domain;
    auto pos = std::find(dom.begin(), dom.end(), v);
    if (pos == dom.end()) throw ValueOutOfDomain("value '" + v + "' not in domain of '" + k + "'");
    filter.emplace_back(c, static_cast<std::size_t>(pos - dom.begin()));
  }
  std::size_t count = 0;
  for (std::size_t r = 0; r < size(); ++r) {
    bool ok = std::all_of(filter.begin(), filter.end(),
                          [&](const auto& f) { return value_index(r, f.first) == f.second; });
    if (ok) ++count;
  }
  return count;
}

Distribution Samples::conditional(const std::string& var, const Assignment& given) const {
  std::size_t target = column(var);
  std::vector<std::pair<std::size_t, std::size_t>> filter;
  for (const auto& [k, v] : given) {
    std::size_t c = column(k);
    const auto& dom = variables_[c].domain;
    auto pos = std::find(dom.begin(), dom.end(), v);
    if (pos == dom.end()) throw ValueOutOfDomain("value '" + v + "' not in domain of '" + k + "'");
    filter.emplace_back(c, static_cast<std::size_t>(pos - dom.begin()));
  }
  std::vector<double> counts(variables_[target].domain.size(), 0.0);
  std::size_t total = 0;
  for (std::size_t r = 0; r < size(); ++r) {
    bool ok = std::all_of(filter.begin(), filter.end(),
                          [&](const auto& f) { return value_index(r, f.first) == f.second; });
    if (!ok) continue;
    counts[value_index(r, target)] += 1.0;
    ++total;
  }
  if (total == 0) throw NoEvidence("no samples match the conditioning event for '" + var + "'");
  for (double& c : counts) c /= static_cast<double>(total);
  return Distribution(variables_[target].domain, std::move(counts));
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

Samples draw(const Scm& model, const Scm* natural, std::optional<std::size_t> leaky_target,
             double leak, std::size_t n, const NoiseKey& key) {
  const std::size_t nv = model.num_variables();
  std::vector<std::uint16_t> data(n * nv);
  std::vector<std::size_t> values(nv, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t index = key.first_index + i;
    for (std::size_t v : model.topological_order()) {
      const Scm* mechanism = &model;
      if (leaky_target && *leaky_target == v && leak > 0.0 &&
          counter_uniform(key.seed, key.stream + kLeakStream, v, index) < leak) {
        mechanism = natural;
      }
      const auto& row = mechanism->cpt(v).rows[mechanism->row_index(v, values)];
      values[v] = sample_from_row(row, counter_uniform(key.seed, key.stream, v, index));
      data[i * nv + v] = static_cast<std::uint16_t>(values[v]);
    }
  }
  return Samples(model.variables(), std::move(data));
}

}  // namespace

Samples draw_observational(const Scm& scm, std::size_t n, const NoiseKey& key) {
  if (n == 0) throw InvalidParameter("sample count must be at least 1");
  return draw(scm, nullptr, std::nullopt, 0.0, n, key);
}

Samples draw_interventional(const Scm& scm, const Intervention& iv, std::size_t n,
                            const NoiseKey& key, const Actuator& actuator) {
  if (n == 0) throw InvalidParameter("sample count must be at least 1");
  if (actuator.leak < 0.0 || actuator.leak > 1.0) throw InvalidParameter("actuator leak must be in [0,1]");
  Scm mutilated = scm.intervene(iv);
  return draw(mutilated, &scm, scm.index_of(iv.target), actuator.leak, n, key);
}

std::vector<WorldState> sample_observational(const Scm& scm, std::size_t n) {
  return draw_observational(scm, n, NoiseKey{scm.seed(), 0, 0}).states();
}

std::vector<WorldState> sample_interventional(const Scm& scm, const Intervention& iv, std::size_t n) {
  return draw_interventional(scm, iv, n, NoiseKey{scm.seed(), 0, 0}).states();
}

WorldState propagate_intervention(const Scm& scm, const WorldState& state, const Intervention& iv,
                                  const NoiseKey& key) {
  scm.validate_intervention(iv);
  const std::size_t nv = scm.num_variables();
  std::vector<std::size_t> values(nv, 0);
  for (std::size_t v = 0; v < nv; ++v) {
    const auto& var = scm.variables()[v];
    const std::string& val = state.at(var.name);
    auto pos = std::find(var.domain.begin(), var.domain.end(), val);
    if (pos == var.domain.end()) throw ValueOutOfDomain("state value '" + val + "' not in domain of '" + var.name + "'");
    values[v] = static_cast<std::size_t>(pos - var.domain.begin());
  }
  const std::size_t target = scm.index_of(iv.target);
  const auto& tdom = scm.variables()[target].domain;
  values[target] = static_cast<std::size_t>(std::find(tdom.begin(), tdom.end(), iv.value) - tdom.begin());

  std::vector<bool> affected(nv, false);
  affected[target] = true;
  for (std::size_t v : scm.topological_order()) {
    if (v == target) continue;
    const auto& ps = scm.cpt(v).parents;
    if (std::none_of(ps.begin(), ps.end(), [&](std::size_t p) { return affected[p]; })) continue;
    affected[v] = true;
    const auto& row = scm.cpt(v).rows[scm.row_index(v, values)];
    values[v] = sample_from_row(row, counter_uniform(key.seed, key.stream, v, key.first_index));
  }
  WorldState out;
  out.metric_embedding = state.metric_embedding;
  for (std::size_t v = 0; v < nv; ++v) {
    out.assignment.emplace(scm.variables()[v].name, scm.variables()[v].domain[values[v]]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Enumeration oracle

Distribution exact_conditional(const Scm& scm, const std::string& outcome, const Assignment& given) {
  const std::size_t nv = scm.num_variables();
  const std::size_t target = scm.index_of(outcome);
  double states = 1.0;
  for (const auto& v : scm.variables()) states *= static_cast<double>(v.domain.size());
  if (states > kMaxEnumeratedStates) {
    throw StateSpaceTooLarge("joint state space has " + std::to_string(states) + " states");
  }
  std::vector<std::optional<std::size_t>> fixed(nv);
  for (const auto& [k, val] : given) {
    std::size_t idx = scm.index_of(k);
    const auto& dom = scm.variables()[idx].domain;
    auto pos = std::find(dom.begin(), dom.end(), val);
    if (pos == dom.end()) throw ValueOutOfDomain("value '" + val + "' not in domain of '" + k + "'");
    fixed[idx] = static_cast<std::size_t>(pos - dom.begin());
  }

  std::vector<double> mass(scm.variables()[target].domain.size(), 0.0);
  std::vector<std::size_t> values(nv, 0);
  for (std::size_t v = 0; v < nv; ++v) {
    if (fixed[v]) values[v] = *fixed[v];
  }
  std::vector<std::size_t> free_vars;
  for (std::size_t v = 0; v < nv; ++v) {
    if (!fixed[v]) free_vars.push_back(v);
  }
  // Odometer over the unfixed variables.
  while (true) {
    double p = 1.0;
    for (std::size_t v : scm.topological_order()) {
      p *= scm.cpt(v).rows[scm.row_index(v, values)][values[v]];
      if (p == 0.0) break;
    }
    mass[values[target]] += p;

    bool done = true;
    for (std::size_t k = free_vars.size(); k-- > 0;) {
      std::size_t v = free_vars[k];
      if (++values[v] < scm.variables()[v].domain.size()) {
        done = false;
        break;
      }
      values[v] = 0;
    }
    if (done) break;
  }
  double total = std::accumulate(mass.begin(), mass.end(), 0.0);
  if (total <= 0.0) throw ZeroProbabilityEvidence("conditioning event has probability zero");
  for (double& m : mass) m /= total;
  return Distribution(scm.variables()[target].domain, std::move(mass));
}

Distribution exact_do_distribution(const Scm& scm, const std::string& outcome, const Intervention& iv) {
  return exact_conditional(scm.intervene(iv), outcome, {});
}

Distribution exact_do_conditional(const Scm& scm, const std::string& outcome, const Intervention& iv,
                                  const Assignment& given) {
  return exact_conditional(scm.intervene(iv), outcome, given);
}

bool detect_rung_collapse(const Distribution& answer_source, const Distribution& l2_truth, double tol) {
  return total_variation(answer_source, l2_truth) > tol;
}

// ---------------------------------------------------------------------------
// JSON

Scm scm_from_json(const nlohmann::json& doc) {
  try {
    Scm::Builder b;
    for (const auto& v : doc.at("variables")) {
      std::vector<std::string> domain;
      for (const auto& d : v.at("domain")) domain.push_back(json_value_to_string(d));
      b.variable(v.at("name").get<std::string>(), std::move(domain));
    }
    if (doc.contains("edges")) {
      for (const auto& e : doc.at("edges")) {
        if (!e.is_array() || e.size() != 2) throw FormatError("edge must be a [parent, child] pair");
        b.edge(e[0].get<std::string>(), e[1].get<std::string>());
      }
    }
    for (const auto& [var, rows] : doc.at("cpts").items()) {
      for (const auto& r : rows) {
        Assignment given;
        if (r.contains("given")) {
          for (const auto& [k, val] : r.at("given").items()) given[k] = json_value_to_string(val);
        }
        std::map<std::string, double> dist;
        for (const auto& [k, p] : r.at("dist").items()) dist[k] = p.get<double>();
        b.row(var, given, dist);
      }
    }
    if (doc.contains("seed")) b.seed(doc.at("seed").get<std::uint64_t>());
    return b.build();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed SCM document: ") + e.what());
  }
}

nlohmann::json scm_to_json(const Scm& scm) {
  nlohmann::json doc;
  doc["variables"] = nlohmann::json::array();
  for (const auto& v : scm.variables()) doc["variables"].push_back({{"name", v.name}, {"domain", v.domain}});
  doc["edges"] = nlohmann::json::array();
  for (const auto& [p, c] : scm.edges()) doc["edges"].push_back({p, c});
  doc["cpts"] = nlohmann::json::object();
  for (std::size_t v = 0; v < scm.num_variables(); ++v) {
    const Cpt& cpt = scm.cpt(v);
    auto rows = nlohmann::json::array();
    for (std::size_t r = 0; r < cpt.rows.size(); ++r) {
      nlohmann::json given = nlohmann::json::object();
      std::size_t rem = r;
      for (std::size_t k = cpt.parents.size(); k-- > 0;) {
        const auto& pv = scm.variables()[cpt.parents[k]];
        given[pv.name] = pv.domain[rem % pv.domain.size()];
        rem /= pv.domain.size();
      }
      nlohmann::json dist = nlohmann::json::object();
      for (std::size_t k = 0; k < cpt.rows[r].size(); ++k) dist[scm.variables()[v].domain[k]] = cpt.rows[r][k];
      rows.push_back({{"given", given}, {"dist", dist}});
    }
    doc["cpts"][scm.variables()[v].name] = rows;
  }
  doc["seed"] = scm.seed();
  return doc;
}

Scm load_scm(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open '" + path + "'");
  try {
    return scm_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError("'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace erm
