#include "erm/agent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <regex>
#include <sstream>

#include "erm/prompts.hpp"

namespace erm {

namespace {

constexpr std::uint64_t kObservationalStream = 0x0b5;
constexpr std::uint64_t kExecutionStream = 0xe8ec;

std::string fixed2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::vector<std::string> outcome_domain(const Samples& evidence, const std::string& outcome) {
  for (const auto& v : evidence.variables()) {
    if (v.name == outcome) return v.domain;
  }
  throw UnknownVariable("evidence table has no variable '" + outcome + "'");
}

// Counts of the outcome under `iv` already in the log, per domain value.
std::vector<double> logged_counts(const CtlStore& log, const Subtask& s, const std::vector<std::string>& domain) {
  std::vector<double> counts(domain.size(), 0.0);
  try {
    auto est = log.empirical_do(s.outcome, s.intervention, domain);
    for (std::size_t i = 0; i < domain.size(); ++i) counts[i] = est.distribution.probs()[i] * static_cast<double>(est.n);
  } catch (const NoInterventionRecords&) {
  }
  for (double& c : counts) c = std::round(c);
  return counts;
}

Distribution normalized(const std::vector<std::string>& domain, std::vector<double> counts, double pseudo) {
  double total = 0.0;
  for (double& c : counts) {
    c += pseudo;
    total += c;
  }
  for (double& c : counts) c /= total;
  return Distribution(domain, std::move(counts));
}

}  // namespace

std::string subtask_claim(const Subtask& s) {
  return "Setting " + s.intervention.target + " to " + s.intervention.value + " changes " + s.outcome + ".";
}

ScriptedSource::ScriptedSource(std::vector<Hypothesis> script) : script_(std::move(script)) {
  if (script_.empty()) throw InvalidParameter("scripted source needs at least one hypothesis");
}

Hypothesis ScriptedSource::hypothesize(const Subtask&, const CausalGraph&, const std::vector<std::string>&) {
  Hypothesis h = script_[next_ % script_.size()];
  ++next_;
  return h;
}

Hypothesis GraphFaithfulSource::hypothesize(const Subtask& subtask, const CausalGraph& graph,
                                            const std::vector<std::string>&) {
  Hypothesis h;
  h.claims = believed_path(graph, subtask.intervention.target, subtask.outcome);
  if (!h.claims.empty()) {
    h.confidence = 1.0;
    for (const auto& c : h.claims) h.confidence = std::min(h.confidence, *graph.weight(c.from, c.to));
  }
  return h;
}

std::string render_prompt(const CausalGraph& graph, const std::vector<std::string>& guards, const Subtask& subtask) {
  std::ostringstream out;
  BeliefSet beliefs = belief_set(graph);
  if (!beliefs.claims.empty()) {
    out << "Causal context (believed edges):\n";
    for (const auto& c : beliefs.claims) out << "- " << c.from << " -> " << c.to << " (" << fixed2(*graph.weight(c.from, c.to)) << ")\n";
    out << "List the causal edges your answer relies on, one per line as \"CLAIM: A -> B\", "
           "and give \"CONFIDENCE: <0 to 1>\".\n\n";
  }
  if (!guards.empty()) {
    out << "Reasoning constraints:\n";
    for (const auto& g : guards) out << "- " << g << "\n";
    out << "\n";
  }
  out << detection_prompt(subtask.text, subtask_claim(subtask));
  return out.str();
}

Hypothesis parse_hypothesis(const std::string& response, const Subtask& subtask, const CausalGraph& graph) {
  static const std::regex claim_re(R"(CLAIM:\s*([A-Za-z0-9_]+)\s*(?:->|\xE2\x86\x92)\s*([A-Za-z0-9_]+))",
                                   std::regex::icase);
  static const std::regex conf_re(R"(CONFIDENCE:\s*([0-9]*\.?[0-9]+))", std::regex::icase);
  Hypothesis h;
  bool saw_claim_line = false;
  for (auto it = std::sregex_iterator(response.begin(), response.end(), claim_re); it != std::sregex_iterator(); ++it) {
    saw_claim_line = true;
    std::string from = (*it)[1].str(), to = (*it)[2].str();
    if (from == to || !graph.has_variable(from) || !graph.has_variable(to)) continue;
    CausalClaim c{from, to};
    if (std::find(h.claims.begin(), h.claims.end(), c) == h.claims.end()) h.claims.push_back(c);
  }
  if (!saw_claim_line && parse_verdict(response) == Verdict::Yes) {
    h.claims.emplace_back(subtask.intervention.target, subtask.outcome);
  }
  std::smatch m;
  if (std::regex_search(response, m, conf_re)) h.confidence = std::clamp(std::stod(m[1].str()), 0.0, 1.0);
  return h;
}

Hypothesis RemoteChatSource::hypothesize(const Subtask& subtask, const CausalGraph& graph,
                                         const std::vector<std::string>& guards) {
  last_prompt_ = render_prompt(graph, guards, subtask);
  return parse_hypothesis(model_.complete(last_prompt_), subtask, graph);
}

// ---------------------------------------------------------------------------

RoutingTable::RoutingTable(std::size_t window, double theta_route, std::string route_target)
    : window_(window), theta_route_(theta_route), default_target_(std::move(route_target)) {
  if (window_ == 0) throw InvalidParameter("routing window must be positive");
}

void RoutingTable::record(const std::string& task_class, double episode_regret) {
  auto& q = regrets_[task_class];
  q.push_back(episode_regret);
  while (q.size() > window_) q.pop_front();
}

double RoutingTable::residual_regret(const std::string& task_class) const {
  auto it = regrets_.find(task_class);
  if (it == regrets_.end() || it->second.empty()) throw NoEpisodes("no episodes for task class '" + task_class + "'");
  return std::accumulate(it->second.begin(), it->second.end(), 0.0) / static_cast<double>(it->second.size());
}

bool RoutingTable::should_route(const std::string& task_class) const {
  if (!regrets_.count(task_class)) return false;
  return residual_regret(task_class) > theta_route_;
}

std::string RoutingTable::route_target(const std::string& task_class) const {
  auto it = targets_.find(task_class);
  return it == targets_.end() ? default_target_ : it->second;
}

void RoutingTable::set_route_target(const std::string& task_class, std::string target) {
  targets_[task_class] = std::move(target);
}

nlohmann::json RoutingTable::to_json() const {
  nlohmann::json classes = nlohmann::json::object();
  for (const auto& [k, q] : regrets_) classes[k] = {{"regrets", std::vector<double>(q.begin(), q.end())}};
  for (const auto& [k, t] : targets_) classes[k]["target"] = t;
  return {{"window", window_}, {"theta_route", theta_route_}, {"default_target", default_target_}, {"classes", classes}};
}

RoutingTable RoutingTable::from_json(const nlohmann::json& doc) {
  try {
    RoutingTable table(doc.at("window").get<std::size_t>(), doc.at("theta_route").get<double>(),
                       doc.value("default_target", std::string("human")));
    const auto classes = doc.value("classes", nlohmann::json::object());
    for (const auto& [k, c] : classes.items()) {
      for (double r : c.value("regrets", std::vector<double>{})) table.regrets_[k].push_back(r);
      if (c.contains("target")) table.targets_[k] = c["target"].get<std::string>();
    }
    return table;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed routing table: ") + e.what());
  }
}

// ---------------------------------------------------------------------------

AgentState make_agent(const Scm& env, const CausalGraph& initial_graph, const AgentConfig& cfg) {
  cfg.erm.validate();
  AgentState state;
  state.graph = enforce_dag(initial_graph);
  state.graph.set_thresholds(cfg.erm.theta_min, cfg.erm.theta_max);
  state.registry = FailureRegistry(cfg.registry);
  state.routing = RoutingTable(cfg.route_window, cfg.theta_route, cfg.route_target);
  state.evidence = draw_observational(env, cfg.observational_samples, NoiseKey{cfg.seed, kObservationalStream, 0});
  return state;
}

Episode run_episode(const Scm& env, AgentState& state, HypothesisSource& source, const AgentConfig& cfg,
                    const std::vector<Subtask>& subtasks, const std::string& goal, HypothesisSource* alternate) {
  Episode ep;
  ep.goal = goal;
  ep.task_class = cfg.task_class;
  ep.subtasks = subtasks;
  HypothesisSource* active = &source;
  if (alternate && state.routing.should_route(cfg.task_class)) active = alternate;
  ep.source_id = active->id();

  std::map<std::string, std::optional<Distribution>> observational_cache;
  double regret_sum = 0.0;

  for (const auto& subtask : subtasks) {
    const auto domain = outcome_domain(state.evidence, subtask.outcome);
    const auto guards = state.registry.active_guards();

    Hypothesis h = active->hypothesize(subtask, state.graph, guards);
    bool first_attempt = state.attempted.insert(subtask.id).second;

    Distribution predicted;
    if (h.predicted) {
      predicted = *h.predicted;
    } else {
      CausalGraph own = graph_from_claims(state.graph.variables(), h.claims, cfg.erm.theta_min, cfg.erm.theta_max);
      predicted = predict_do(own, subtask.intervention, subtask.outcome, state.evidence, PredictOptions{true});
    }

    const std::uint64_t t = state.t + 1;
    Samples drawn = draw_interventional(env, subtask.intervention, 1, NoiseKey{cfg.seed, kExecutionStream, t});
    WorldState world = drawn.state(0);
    const std::string observed = world.at(subtask.outcome);

    auto counts = logged_counts(state.log, subtask, domain);
    counts[static_cast<std::size_t>(std::find(domain.begin(), domain.end(), observed) - domain.begin())] += 1.0;

    CtlEntry entry;
    entry.t = t;
    entry.state = world;
    entry.claims = h.claims;
    entry.action = subtask.intervention;
    entry.predicted = predicted;
    entry.observed = observed;
    entry.delta = cfg.delta_metric == DeltaMetric::PointMass ? point_mass_delta(predicted, observed)
                                                              : total_variation(predicted, normalized(domain, counts, 0.0));
    state.log.append(entry);
    state.t = t;

    Distribution observed_do = normalized(domain, counts, 0.5);
    double task = subtask.desired_outcome.empty() ? 0.0 : (observed == subtask.desired_outcome ? 0.0 : 1.0);

    StepRecord step;
    step.entry = entry;
    step.claims = h.claims;
    if (cfg.erm.lambda * entry.delta > cfg.erm.eps_err) {
      CausalGraph revised = erm_revise(state.graph, h.claims, state.log, cfg.erm);
      step.revised = !(revised == state.graph);
      state.graph = std::move(revised);

      auto key = subtask.intervention.target + "=" + subtask.intervention.value + "|" + subtask.outcome;
      if (!observational_cache.count(key)) {
        try {
          observational_cache[key] = exact_conditional(env, subtask.outcome, {{subtask.intervention.target, subtask.intervention.value}});
        } catch (const Error&) {
          observational_cache[key] = std::nullopt;
        }
      }
      FailureContext ctx;
      ctx.truth = &env;
      ctx.predicted = predicted;
      ctx.observational = observational_cache[key];
      ctx.confidence = h.confidence;
      ctx.first_attempt = first_attempt;
      ctx.tags = subtask.tags;
      step.failure = classify(h.claims, entry.delta, ctx, cfg.erm.eps_err);
      if (step.failure) {
        double regret = epistemic_regret(predicted, observed_do);
        if (auto g = state.registry.record_and_maybe_inject(*step.failure, regret, t)) ep.injected.push_back(*g);
      }
    }
    step.loss = total_loss(task, state.graph, predicted, observed_do, cfg.erm);
    regret_sum += step.loss.epistemic;
    ep.revisions += step.revised ? 1 : 0;
    ep.outcomes.push_back(entry);
    ep.losses.push_back(step.loss);
    ep.steps.push_back(std::move(step));
  }

  ep.mean_regret = subtasks.empty() ? 0.0 : regret_sum / static_cast<double>(subtasks.size());
  ep.retracted = state.registry.observe_episode(ep.mean_regret);
  state.routing.record(cfg.task_class, ep.mean_regret);
  ep.routed = state.routing.should_route(cfg.task_class);
  return ep;
}

double residual_regret(std::span<const Episode> episodes, const std::string& task_class, std::size_t window) {
  std::vector<double> xs;
  for (const auto& e : episodes) {
    if (e.task_class == task_class) xs.push_back(e.mean_regret);
  }
  if (xs.empty()) throw NoEpisodes("no episodes for task class '" + task_class + "'");
  std::size_t start = xs.size() > window ? xs.size() - window : 0;
  return std::accumulate(xs.begin() + static_cast<std::ptrdiff_t>(start), xs.end(), 0.0) /
         static_cast<double>(xs.size() - start);
}

// ---------------------------------------------------------------------------

nlohmann::json checkpoint_to_json(const AgentState& state) {
  return {{"t", state.t},
          {"graph", graph_to_json(state.graph)},
          {"registry", state.registry.to_json()},
          {"routing", state.routing.to_json()},
          {"attempted", state.attempted},
          {"ctl", state.log.path() ? nlohmann::json(*state.log.path()) : nlohmann::json(nullptr)}};
}

void restore_checkpoint(AgentState& state, const nlohmann::json& doc) {
  try {
    state.t = doc.at("t").get<std::uint64_t>();
    state.graph = graph_from_json(doc.at("graph"));
    state.registry = FailureRegistry::from_json(doc.at("registry"));
    state.routing = RoutingTable::from_json(doc.at("routing"));
    state.attempted = doc.value("attempted", std::set<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::string& path, const AgentState& state) {
  std::ofstream out(path);
  if (!out) throw PersistenceFailure("cannot write checkpoint '" + path + "'");
  out << checkpoint_to_json(state).dump(2) << "\n";
  if (!out) throw PersistenceFailure("write to checkpoint '" + path + "' failed");
}

void load_checkpoint(const std::string& path, AgentState& state) {
  std::ifstream in(path);
  if (!in) throw PersistenceFailure("cannot read checkpoint '" + path + "'");
  try {
    restore_checkpoint(state, nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

Subtask subtask_from_json(const nlohmann::json& j) {
  Subtask s;
  s.id = j.at("id").get<std::string>();
  s.text = j.value("text", "");
  s.intervention = {j.at("intervention").at("target").get<std::string>(),
                    j.at("intervention").at("value").get<std::string>()};
  s.outcome = j.at("outcome").get<std::string>();
  s.desired_outcome = j.value("desired_outcome", "");
  s.tags = j.value("tags", std::set<std::string>{});
  return s;
}

Hypothesis hypothesis_from_json(const nlohmann::json& j) {
  Hypothesis h;
  for (const auto& c : j.at("claims")) h.claims.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
  h.confidence = j.value("confidence", 0.5);
  if (j.contains("predicted")) {
    std::vector<std::string> values;
    std::vector<double> probs;
    for (const auto& [v, p] : j["predicted"].items()) {
      values.push_back(v);
      probs.push_back(p.get<double>());
    }
    h.predicted = Distribution(values, probs);
  }
  return h;
}

}  // namespace

Scenario scenario_from_json(const nlohmann::json& doc) {
  Scenario sc;
  sc.raw = doc;
  sc.scm = scm_from_json(doc);
  try {
    sc.name = doc.value("name", "scenario");
    sc.erm = doc.contains("erm") ? erm_config_from_json(doc["erm"]) : ErmConfig{};
    sc.agent.erm = sc.erm;
    sc.agent.seed = sc.scm.seed();
    std::vector<std::string> names;
    for (const auto& v : sc.scm.variables()) names.push_back(v.name);
    sc.initial_graph = CausalGraph(names, sc.erm.theta_min, sc.erm.theta_max);
    sc.source_spec = {{"type", "graph_faithful"}};
    if (doc.contains("agent")) {
      const auto& a = doc["agent"];
      sc.agent.task_class = a.value("task_class", sc.agent.task_class);
      sc.agent.observational_samples = a.value("observational_samples", sc.agent.observational_samples);
      if (a.contains("delta_metric")) sc.agent.delta_metric = delta_metric_from_string(a["delta_metric"]);
      sc.agent.theta_route = a.value("theta_route", sc.agent.theta_route);
      sc.agent.route_window = a.value("route_window", sc.agent.route_window);
      sc.agent.route_target = a.value("route_target", sc.agent.route_target);
      sc.agent.registry.freq_threshold = a.value("freq_threshold", sc.agent.registry.freq_threshold);
      sc.agent.registry.window = a.value("guard_window", sc.agent.registry.window);
      if (a.contains("initial_graph")) sc.initial_graph = graph_from_json(a["initial_graph"]);
      if (a.contains("source")) sc.source_spec = a["source"];
    }
    for (const auto& s : doc.value("subtasks", nlohmann::json::array())) sc.subtasks.push_back(subtask_from_json(s));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed scenario: ") + e.what());
  }
  for (const auto& s : sc.subtasks) {
    sc.scm.validate_intervention(s.intervention);
    if (!sc.scm.has_variable(s.outcome)) throw UnknownVariable("subtask outcome '" + s.outcome + "' is not a variable");
  }
  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot read scenario '" + path + "'");
  try {
    return scenario_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::unique_ptr<HypothesisSource> make_source(const nlohmann::json& spec, ChatModel* model) {
  std::string type = spec.value("type", "graph_faithful");
  if (type == "graph_faithful") return std::make_unique<GraphFaithfulSource>();
  if (type == "scripted") {
    std::vector<Hypothesis> script;
    try {
      for (const auto& h : spec.at("hypotheses")) script.push_back(hypothesis_from_json(h));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("malformed scripted source: ") + e.what());
    }
    return std::make_unique<ScriptedSource>(std::move(script));
  }
  if (type == "remote") {
    if (!model) throw SourceFailure("remote source needs a chat endpoint (set ERM_ENDPOINT and ERM_MODEL)");
    return std::make_unique<RemoteChatSource>(*model);
  }
  throw FormatError("unknown source type '" + type + "'");
}

}  // namespace erm
