// erm: command-line front end for the agent, oracle, swarm, transaction and
// evaluation tools.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <regex>
#include <sstream>

#include <CLI11.hpp>

#include "erm/agent.hpp"
#include "erm/chat.hpp"
#include "erm/consensus.hpp"
#include "erm/ctl.hpp"
#include "erm/errors.hpp"
#include "erm/eval.hpp"
#include "erm/scm.hpp"
#include "erm/txn.hpp"

using namespace erm;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitEnvironment = 2;

struct EnvironmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::isnan(x)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

std::string short_num(double x) {
  std::ostringstream os;
  os.precision(10);
  os << x;
  return os.str();
}

BeliefSet true_edges(const Scm& scm) {
  BeliefSet out;
  for (const auto& v : scm.variables())
    for (const auto& p : scm.parents(v.name)) out.claims.insert({p, v.name});
  return out;
}

std::unique_ptr<ChatModel> remote_model() {
  auto cfg = ChatConfig::from_env();
  if (!cfg) throw EnvironmentError("remote model needs ERM_ENDPOINT and ERM_MODEL");
  return std::make_unique<HttpChatModel>(*cfg);
}

// Keeps the chat model alive for as long as the source that uses it.
struct SourceBundle {
  std::unique_ptr<ChatModel> model;
  std::unique_ptr<HypothesisSource> source;
};

SourceBundle build_source(const nlohmann::json& spec) {
  SourceBundle b;
  if (spec.value("type", "") == "remote") b.model = remote_model();
  b.source = make_source(spec, b.model.get());
  return b;
}

// ---- run ----

struct RunArgs {
  std::string scenario;
  std::size_t episodes = 50;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  bool baseline = false;
  std::string checkpoint;
};

int cmd_run(const RunArgs& a) {
  Scenario sc = load_scenario(a.scenario);
  AgentConfig cfg = sc.agent;
  if (a.seed) cfg.seed = *a.seed;
  if (a.lambda) cfg.erm.lambda = *a.lambda;
  if (a.baseline) cfg.erm.lambda = 0.0;
  cfg.erm.validate();
  if (sc.subtasks.empty()) throw PreconditionViolation("scenario has no subtasks");
  Scm env = sc.scm.with_seed(cfg.seed);
  AgentState state = make_agent(env, sc.initial_graph, cfg);
  auto src = build_source(sc.source_spec);

  std::cout << "episode,task_loss,epistemic_regret,consistency_loss,total,belief_set_size,guards_active\n";
  for (std::size_t e = 1; e <= a.episodes; ++e) {
    Episode ep = run_episode(env, state, *src.source, cfg, sc.subtasks, sc.name);
    LossBreakdown mean;
    for (const auto& l : ep.losses) {
      mean.task += l.task;
      mean.epistemic += l.epistemic;
      mean.consistency += l.consistency;
      mean.total += l.total;
    }
    double k = static_cast<double>(std::max<std::size_t>(ep.losses.size(), 1));
    std::cout << e << ',' << num(mean.task / k) << ',' << num(mean.epistemic / k) << ','
              << num(mean.consistency / k) << ',' << num(mean.total / k) << ',' << belief_set(state.graph).size()
              << ',' << state.registry.active_guards().size() << '\n';
  }
  if (!a.checkpoint.empty()) save_checkpoint(a.checkpoint, state);
  return 0;
}

// ---- demo entrenchment ----

std::optional<std::size_t> episodes_to_contraction(const Scenario& sc, double lambda, std::uint64_t seed,
                                                   std::size_t limit) {
  AgentConfig cfg = sc.agent;
  cfg.erm.lambda = lambda;
  cfg.seed = seed;
  Scm env = sc.scm.with_seed(seed);
  BeliefSet truth = true_edges(env);
  std::vector<CausalClaim> wrong;
  for (const auto& c : belief_set(sc.initial_graph).claims)
    if (!truth.contains(c)) wrong.push_back(c);
  if (wrong.empty()) throw PreconditionViolation("initial graph holds no wrong edge to contract");

  AgentState state = make_agent(env, sc.initial_graph, cfg);
  auto src = build_source(sc.source_spec);
  for (std::size_t e = 1; e <= limit; ++e) {
    run_episode(env, state, *src.source, cfg, sc.subtasks, sc.name);
    BeliefSet now = belief_set(state.graph);
    bool gone = std::none_of(wrong.begin(), wrong.end(), [&](const CausalClaim& c) { return now.contains(c); });
    if (gone) return e;
  }
  return std::nullopt;
}

int cmd_demo(const std::string& scenario, std::size_t limit, std::uint64_t seed) {
  Scenario sc = load_scenario(scenario);
  std::cout << "lambda,episodes_to_contraction\n";
  for (double lambda : {0.0, 1.0}) {
    auto e = episodes_to_contraction(sc, lambda, seed, limit);
    std::cout << short_num(lambda) << ',' << (e ? std::to_string(*e) : std::string("inf")) << '\n';
  }
  return 0;
}

// ---- oracle ----

struct Query {
  std::string outcome;
  std::optional<std::string> value;
  std::optional<Intervention> iv;
  Assignment given;
};

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::pair<std::string, std::string> split_eq(const std::string& s) {
  auto at = s.find('=');
  if (at == std::string::npos) throw InvalidParameter("expected <var>=<val>, got '" + s + "'");
  auto k = trim(s.substr(0, at)), v = trim(s.substr(at + 1));
  if (k.empty() || v.empty()) throw InvalidParameter("expected <var>=<val>, got '" + s + "'");
  return {k, v};
}

Query parse_query(const std::string& text) {
  static const std::regex shape(R"(^\s*P\s*\((.*)\)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, shape)) throw InvalidParameter("query must look like P(Y=1|do(X=1))");
  std::string body = m[1].str();
  Query q;
  auto bar = body.find('|');
  std::string head = trim(body.substr(0, bar));
  if (head.find('=') != std::string::npos) {
    auto [k, v] = split_eq(head);
    q.outcome = k;
    q.value = v;
  } else {
    q.outcome = head;
  }
  if (q.outcome.empty()) throw InvalidParameter("query names no outcome variable");
  if (bar == std::string::npos) return q;

  std::string rest = body.substr(bar + 1);
  std::stringstream parts(rest);
  std::string part;
  bool first = true;
  while (std::getline(parts, part, ',')) {
    part = trim(part);
    if (part.empty()) {
      if (first && rest.find(',') == std::string::npos) break;
      throw InvalidParameter("empty term in query condition");
    }
    static const std::regex doterm(R"(^do\s*\((.*)\)$)");
    std::smatch dm;
    if (std::regex_match(part, dm, doterm)) {
      if (!first) throw InvalidParameter("do(...) must come first in the condition");
      auto [k, v] = split_eq(dm[1].str());
      q.iv = Intervention{k, v};
    } else {
      auto [k, v] = split_eq(part);
      q.given[k] = v;
    }
    first = false;
  }
  return q;
}

int cmd_oracle(const std::string& scenario, const std::string& query) {
  Scm scm = load_scm(scenario);
  Query q = parse_query(query);
  Distribution d = q.iv ? exact_do_conditional(scm, q.outcome, *q.iv, q.given) : exact_conditional(scm, q.outcome, q.given);
  const auto& dom = scm.variable(q.outcome).domain;
  if (q.value) {
    auto it = std::find(dom.begin(), dom.end(), *q.value);
    if (it == dom.end()) throw ValueOutOfDomain("'" + *q.value + "' is not a value of " + q.outcome);
    std::cout << short_num(d.prob(*it)) << '\n';
  } else {
    for (const auto& v : dom) std::cout << v << ',' << short_num(d.prob(v)) << '\n';
  }
  return 0;
}

// ---- swarm ----

struct SwarmArgs {
  std::string scenario;
  std::optional<std::size_t> agents;
  std::optional<double> quorum;
  std::optional<std::size_t> rounds;
  std::optional<double> drop;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
};

int cmd_swarm(const SwarmArgs& a) {
  Scenario sc = load_scenario(a.scenario);
  nlohmann::json block = sc.raw.value("swarm", nlohmann::json::object());
  SwarmConfig cfg = swarm_config_from_json(block);
  std::size_t rounds = block.value("rounds", std::size_t{20});
  if (a.agents) cfg.m = *a.agents;
  if (a.quorum) cfg.theta_q = *a.quorum;
  if (a.drop) cfg.drop_probability = *a.drop;
  if (a.rounds) rounds = *a.rounds;
  AgentConfig base = sc.agent;
  if (a.seed) base.seed = *a.seed;
  cfg.seed = base.seed;
  cfg.validate();
  if (sc.subtasks.empty()) throw PreconditionViolation("scenario has no subtasks");

  std::unique_ptr<ChatModel> model;
  if (sc.source_spec.value("type", "") == "remote") model = remote_model();
  SourceFactory factory = [&] { return make_source(sc.source_spec, model.get()); };
  if (!a.out_dir.empty()) std::filesystem::create_directories(a.out_dir);

  Scm env = sc.scm.with_seed(base.seed);
  auto on_round = [&](std::size_t r, const GlobalGraph& g) {
    nlohmann::json line = global_graph_to_json(g);
    line["round"] = r;
    std::cout << line.dump() << '\n';
    if (!a.out_dir.empty()) {
      char name[32];
      std::snprintf(name, sizeof name, "round_%03zu.json", r);
      std::ofstream out(std::filesystem::path(a.out_dir) / name);
      out << line.dump(2) << '\n';
      if (!out) throw PersistenceFailure("cannot write snapshot into " + a.out_dir);
    }
  };
  auto result = run_swarm(env, sc.initial_graph, base, sc.subtasks, factory, cfg, rounds, true_edges(env), on_round);
  std::cerr << "rounds_to_target="
            << (result.rounds_to_target ? std::to_string(*result.rounds_to_target) : std::string("none")) << '\n';
  return 0;
}

// ---- txn ----

int cmd_txn(const std::string& scenario, std::optional<std::size_t> fail_at, const std::string& name,
            std::optional<std::uint64_t> seed) {
  Scenario sc = load_scenario(scenario);
  auto txns = transactions_from_scenario(sc.raw);
  if (txns.empty()) throw PreconditionViolation("scenario declares no transactions");
  const PhysicalTransaction* txn = &txns.front();
  if (!name.empty()) {
    auto it = std::find_if(txns.begin(), txns.end(), [&](const auto& t) { return t.name == name; });
    if (it == txns.end()) throw InvalidParameter("no transaction named '" + name + "'");
    txn = &*it;
  }
  if (fail_at && (*fail_at < 1 || *fail_at > txn->steps.size()))
    throw InvalidParameter("--fail-at must be in 1.." + std::to_string(txn->steps.size()));
  ExecOptions opts;
  opts.fail_at = fail_at;
  opts.seed = seed.value_or(sc.scm.seed());
  TxnResult r = execute(*txn, sc.scm, opts);

  std::cout << "event,step,deviation,state\n";
  for (const auto& ev : r.trace) {
    std::string state;
    for (const auto& [k, v] : ev.state.assignment) state += (state.empty() ? "" : " ") + k + "=" + v;
    std::cout << (ev.kind == TraceEvent::Kind::Action ? "action" : "compensation") << ',' << ev.step << ','
              << num(ev.deviation) << ',' << state << '\n';
  }
  double measured = hamming_distance(r.state, txn->initial_state);
  std::cout << "\nstatus," << (r.status == TxnResult::Status::Committed ? "committed" : "rolled_back") << '\n';
  if (r.status == TxnResult::Status::RolledBack) {
    std::cout << "bound," << num(r.bound) << '\n'
              << "measured," << num(measured) << '\n'
              << "honoured," << (verify_recovery_bound(*txn, r) ? "yes" : "no") << '\n'
              << "compensation_cost," << num(r.compensation_cost) << '\n'
              << "compensation_time," << num(r.compensation_time) << '\n';
  }
  return 0;
}

// ---- eval ----

std::unique_ptr<ChatModel> eval_model(const std::string& kind, const std::vector<TrapCase>& cases) {
  if (kind == "mock") return std::make_unique<RefusalSensitiveModel>(cases);
  if (kind == "mock-yes") return std::make_unique<ConstantModel>("YES");
  if (kind == "mock-no") return std::make_unique<ConstantModel>("NO");
  if (kind == "mock-contrarian") return std::make_unique<ContrarianModel>(cases);
  if (kind == "remote") return remote_model();
  throw InvalidParameter("unknown model '" + kind + "'");
}

void rate_row(const std::string& condition, const RateEstimate& r) {
  std::cout << condition << ',' << r.n << ',' << r.successes << ',' << num(r.rate) << ',' << num(r.ci.lo) << ','
            << num(r.ci.hi) << '\n';
}

void append_trials(std::vector<TrialResult>& all, const std::vector<TrialResult>& more) {
  all.insert(all.end(), more.begin(), more.end());
}

int cmd_eval(const std::string& mode, const std::string& cases_path, const std::string& model_kind,
             std::size_t parallelism, const std::string& out) {
  auto cases = load_cases(cases_path);
  auto model = eval_model(model_kind, cases);
  EvalOptions opts;
  opts.parallelism = parallelism;
  std::vector<TrialResult> trials;

  std::cout << "condition,n,successes,rate,ci_lo,ci_hi\n";
  auto det = run_detection(cases, *model, opts);
  append_trials(trials, det.trials);
  rate_row("zero_shot", det.collapse);
  if (mode == "correct") {
    for (auto m : {CorrectionMode::Standard, CorrectionMode::Erm}) {
      std::string label = m == CorrectionMode::Erm ? "erm_correction" : "standard_correction";
      try {
        auto c = run_correction(det.failures, *model, m, opts);
        append_trials(trials, c.trials);
        rate_row(label, c.corrected);
      } catch (const NoFailures&) {
        std::cout << label << ",0,0,NA,NA,NA\n";
      }
    }
    if (det.correct.empty()) {
      std::cout << "bad_flip_control,0,0,NA,NA,NA\n";
    } else {
      auto bf = run_bad_flip_control(det.correct, *model, opts);
      append_trials(trials, bf.trials);
      rate_row("bad_flip_control", bf.flipped);
      if (bf.sycophantic) std::cerr << "warning: bad-flip rate above " << num(opts.bad_flip_threshold) << '\n';
    }
  }
  if (!out.empty()) write_trials(out, trials);
  return 0;
}

int cmd_bound(double epsilon, double delta, std::size_t domain) {
  std::cout << required_samples(epsilon, delta, domain) << '\n';
  return 0;
}

int classify_error(const Error& e) {
  static const std::set<std::string> environment = {"SourceFailure", "PersistenceFailure"};
  return environment.count(e.code()) ? kExitEnvironment : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Epistemic regret minimisation toolkit"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run the agent on a scenario and print per-episode CSV");
  run_cmd->add_option("scenario", run.scenario, "Scenario file")->required();
  run_cmd->add_option("--episodes", run.episodes, "Episode count");
  run_cmd->add_option("--seed", run.seed, "Seed (defaults to the scenario seed)");
  run_cmd->add_option("--lambda", run.lambda, "Weight of the epistemic term");
  run_cmd->add_flag("--baseline", run.baseline, "Outcome-only agent (lambda = 0)");
  run_cmd->add_option("--checkpoint", run.checkpoint, "Write the final agent state here");

  std::string demo_name, demo_scenario = std::string(ERM_DATA_DIR) + "/scenarios/dock.json";
  std::size_t demo_limit = 500;
  std::uint64_t demo_seed = 20260118;
  auto* demo_cmd = app.add_subcommand("demo", "Canned demonstrations");
  demo_cmd->add_option("name", demo_name, "Demo name")->required()->check(CLI::IsMember({"entrenchment"}));
  demo_cmd->add_option("--scenario", demo_scenario, "Scenario file");
  demo_cmd->add_option("--episodes", demo_limit, "Episode limit");
  demo_cmd->add_option("--seed", demo_seed, "Seed");

  std::string oracle_scenario, oracle_query;
  auto* oracle_cmd = app.add_subcommand("oracle", "Exact answers by enumeration");
  oracle_cmd->add_option("scenario", oracle_scenario, "Scenario file")->required();
  oracle_cmd->add_option("--query", oracle_query, "e.g. \"P(Y=1|do(X=1))\"")->required();

  SwarmArgs swarm;
  auto* swarm_cmd = app.add_subcommand("swarm", "Consensus run; prints one global-graph snapshot per round");
  swarm_cmd->add_option("scenario", swarm.scenario, "Scenario file")->required();
  swarm_cmd->add_option("--agents", swarm.agents, "Number of agents");
  swarm_cmd->add_option("--quorum", swarm.quorum, "Quorum fraction");
  swarm_cmd->add_option("--rounds", swarm.rounds, "Rounds");
  swarm_cmd->add_option("--drop", swarm.drop, "Ballot drop probability");
  swarm_cmd->add_option("--seed", swarm.seed, "Seed");
  swarm_cmd->add_option("--out-dir", swarm.out_dir, "Also write round_NNN.json snapshots here");

  std::string txn_scenario, txn_name;
  std::optional<std::size_t> txn_fail_at;
  std::optional<std::uint64_t> txn_seed;
  auto* txn_cmd = app.add_subcommand("txn", "Run a physical transaction and report the recovery bound");
  txn_cmd->add_option("scenario", txn_scenario, "Scenario file")->required();
  txn_cmd->add_option("--fail-at", txn_fail_at, "Fail after this step (1-based)");
  txn_cmd->add_option("--name", txn_name, "Transaction name (default: first)");
  txn_cmd->add_option("--seed", txn_seed, "Seed");

  std::string eval_mode, eval_cases, eval_model_kind = "mock", eval_out;
  std::size_t eval_parallel = 1;
  auto* eval_cmd = app.add_subcommand("eval", "Detection and correction runs with confidence intervals");
  eval_cmd->add_option("mode", eval_mode, "detect or correct")->required()->check(CLI::IsMember({"detect", "correct"}));
  eval_cmd->add_option("cases", eval_cases, "Cases file (JSONL)")->required();
  eval_cmd->add_option("--model", eval_model_kind, "mock, mock-yes, mock-no, mock-contrarian or remote");
  eval_cmd->add_option("--parallel", eval_parallel, "Concurrent requests");
  eval_cmd->add_option("--out", eval_out, "Write trial results (JSONL)");

  double bound_eps = 0.05, bound_delta = 0.05;
  std::size_t bound_k = 2;
  auto* bound_cmd = app.add_subcommand("bound", "Interventions needed for an epsilon-accurate estimate");
  bound_cmd->add_option("--epsilon", bound_eps, "Accuracy");
  bound_cmd->add_option("--delta", bound_delta, "Failure probability");
  bound_cmd->add_option("--domain", bound_k, "Outcome domain size");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*demo_cmd) return cmd_demo(demo_scenario, demo_limit, demo_seed);
    if (*oracle_cmd) return cmd_oracle(oracle_scenario, oracle_query);
    if (*swarm_cmd) return cmd_swarm(swarm);
    if (*txn_cmd) return cmd_txn(txn_scenario, txn_fail_at, txn_name, txn_seed);
    if (*eval_cmd) return cmd_eval(eval_mode, eval_cases, eval_model_kind, eval_parallel, eval_out);
    if (*bound_cmd) return cmd_bound(bound_eps, bound_delta, bound_k);
  } catch (const EnvironmentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitEnvironment;
  } catch (const Error& e) {
    std::cerr << "error [" << e.code() << "]: " << e.what() << '\n';
    return classify_error(e);
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitEnvironment;
  }
  return kExitValidation;
}
