#include "erm/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <thread>

#include <boost/math/distributions/normal.hpp>

#include "erm/errors.hpp"

namespace erm {

namespace {

std::string verdict_word(Verdict v) { return v == Verdict::Yes ? "YES" : "NO"; }

// Runs fn(0..n-1) on at most `parallelism` threads. Each index writes its
// own slot, so completion order does not matter.
void for_each_index(std::size_t n, std::size_t parallelism, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = std::min(std::max<std::size_t>(parallelism, 1), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

std::vector<ChatMessage> challenge(const AnsweredCase& a, const std::string& prompt) {
  return {{"user", detection_prompt(a.tcase.scenario, a.tcase.claim)},
          {"assistant", a.response},
          {"user", prompt}};
}

std::string first_user_scenario(const std::vector<ChatMessage>& messages) {
  for (const auto& m : messages)
    if (m.role == "user") return scenario_of_prompt(m.content);
  return "";
}

}  // namespace

TrapCase trap_case_from_json(const nlohmann::json& j) {
  TrapCase c;
  try {
    c.id = j.at("id").get<std::string>();
    c.domain = j.value("domain", "");
    c.scenario = j.at("scenario").get<std::string>();
    c.claim = j.at("claim").get<std::string>();
    c.ground_truth = verdict_from_string(j.at("ground_truth").get<std::string>());
    c.wise_refusal = j.at("wise_refusal").get<std::string>();
    c.trap_type = j.value("trap_type", "");
    if (j.contains("check")) c.check = j.at("check");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trap case: ") + e.what());
  }
  if (c.ground_truth == Verdict::Unparseable) throw FormatError("trap case " + c.id + ": ground truth must be YES or NO");
  if (c.wise_refusal.empty()) throw FormatError("trap case " + c.id + ": empty wise_refusal");
  return c;
}

nlohmann::json trap_case_to_json(const TrapCase& c) {
  nlohmann::json j{{"id", c.id},
                   {"domain", c.domain},
                   {"scenario", c.scenario},
                   {"claim", c.claim},
                   {"ground_truth", to_string(c.ground_truth)},
                   {"wise_refusal", c.wise_refusal},
                   {"trap_type", c.trap_type}};
  if (!c.check.is_null()) j["check"] = c.check;
  return j;
}

std::vector<TrapCase> load_cases(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open cases file " + path);
  std::vector<TrapCase> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(trap_case_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const FormatError& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string to_string(Condition c) {
  switch (c) {
    case Condition::ZeroShot: return "zero_shot";
    case Condition::StandardCorrection: return "standard_correction";
    case Condition::ErmCorrection: return "erm_correction";
    case Condition::BadFlipControl: return "bad_flip_control";
  }
  return "zero_shot";
}

Condition condition_from_string(const std::string& s) {
  for (auto c : {Condition::ZeroShot, Condition::StandardCorrection, Condition::ErmCorrection,
                 Condition::BadFlipControl})
    if (to_string(c) == s) return c;
  throw FormatError("unknown condition '" + s + "'");
}

nlohmann::json trial_to_json(const TrialResult& t) {
  return {{"case_id", t.case_id}, {"condition", to_string(t.condition)}, {"verdict", to_string(t.verdict)},
          {"raw", t.raw}};
}

TrialResult trial_from_json(const nlohmann::json& j) {
  try {
    return {j.at("case_id").get<std::string>(), condition_from_string(j.at("condition").get<std::string>()),
            verdict_from_string(j.at("verdict").get<std::string>()), j.at("raw").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("trial result: ") + e.what());
  }
}

void write_trials(const std::string& path, const std::vector<TrialResult>& trials) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PersistenceFailure("cannot write " + path);
  for (const auto& t : trials) out << trial_to_json(t).dump() << '\n';
  if (!out) throw PersistenceFailure("write failed for " + path);
}

Interval wilson_ci(std::size_t successes, std::size_t n, double level) {
  if (n == 0 || successes > n)
    throw InvalidCounts("need 0 <= successes <= n and n >= 1, got " + std::to_string(successes) + "/" +
                        std::to_string(n));
  if (!(level > 0.0 && level < 1.0)) throw InvalidParameter("confidence level must be in (0, 1)");
  double z = boost::math::quantile(boost::math::normal(), 1.0 - (1.0 - level) / 2.0);
  double nn = static_cast<double>(n);
  double p = static_cast<double>(successes) / nn;
  double z2 = z * z;
  double denom = 1.0 + z2 / nn;
  double centre = (p + z2 / (2.0 * nn)) / denom;
  double half = z / denom * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn));
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

RateEstimate estimate_rate(std::size_t successes, std::size_t n, double level) {
  Interval ci = wilson_ci(successes, n, level);
  return {successes, n, static_cast<double>(successes) / static_cast<double>(n), ci};
}

DetectionReport run_detection(const std::vector<TrapCase>& cases, ChatModel& model, const EvalOptions& opts) {
  if (cases.empty()) throw PreconditionViolation("no trap cases");
  DetectionReport rep;
  rep.trials.resize(cases.size());
  for_each_index(cases.size(), opts.parallelism, [&](std::size_t i) {
    std::string raw = model.complete(detection_prompt(cases[i].scenario, cases[i].claim));
    rep.trials[i] = {cases[i].id, Condition::ZeroShot, parse_verdict(raw), raw};
  });

  std::size_t negatives = 0, collapsed = 0, parsed_negatives = 0;
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const auto& t = rep.trials[i];
    if (t.verdict == Verdict::Unparseable) {
      ++rep.unparseable;
    } else if (t.verdict == cases[i].ground_truth) {
      rep.correct.push_back({cases[i], t.raw});
    }
    if (cases[i].ground_truth != Verdict::No) continue;
    ++negatives;
    if (t.verdict == Verdict::Unparseable) continue;
    ++parsed_negatives;
    if (t.verdict == Verdict::Yes) {
      ++collapsed;
      rep.failures.push_back({cases[i], t.raw});
    }
  }
  if (negatives == 0) throw PreconditionViolation("no cases with ground truth NO");
  if (parsed_negatives == 0) throw AllUnparseable("no parseable verdict on any ground-truth NO case");
  rep.collapse = estimate_rate(collapsed, parsed_negatives, opts.level);
  return rep;
}

CorrectionReport run_correction(const std::vector<AnsweredCase>& failed, ChatModel& model, CorrectionMode mode,
                                const EvalOptions& opts) {
  if (failed.empty()) throw NoFailures("no failed cases to correct");
  CorrectionReport rep;
  rep.trials.resize(failed.size());
  Condition cond = mode == CorrectionMode::Erm ? Condition::ErmCorrection : Condition::StandardCorrection;
  for_each_index(failed.size(), opts.parallelism, [&](std::size_t i) {
    const auto& a = failed[i];
    std::string prompt = mode == CorrectionMode::Erm ? erm_correction_prompt(a.tcase.wise_refusal)
                                                     : standard_correction_prompt(a.response);
    std::string raw = model.chat(challenge(a, prompt));
    rep.trials[i] = {a.tcase.id, cond, parse_verdict(raw), raw};
  });
  std::size_t flipped = 0, parsed = 0;
  for (const auto& t : rep.trials) {
    if (t.verdict == Verdict::Unparseable) {
      ++rep.unparseable;
      continue;
    }
    ++parsed;
    if (t.verdict == Verdict::No) ++flipped;
  }
  if (parsed == 0) throw AllUnparseable("no parseable verdict among correction trials");
  rep.corrected = estimate_rate(flipped, parsed, opts.level);
  return rep;
}

BadFlipReport run_bad_flip_control(const std::vector<AnsweredCase>& correct, ChatModel& model,
                                   const EvalOptions& opts) {
  if (correct.empty()) throw PreconditionViolation("no correctly answered cases for the bad-flip control");
  BadFlipReport rep;
  rep.trials.resize(correct.size());
  for_each_index(correct.size(), opts.parallelism, [&](std::size_t i) {
    const auto& a = correct[i];
    std::string raw = model.chat(challenge(a, standard_correction_prompt(a.response)));
    rep.trials[i] = {a.tcase.id, Condition::BadFlipControl, parse_verdict(raw), raw};
  });
  std::size_t flips = 0, parsed = 0;
  for (std::size_t i = 0; i < correct.size(); ++i) {
    const auto& t = rep.trials[i];
    if (t.verdict == Verdict::Unparseable) {
      ++rep.unparseable;
      continue;
    }
    ++parsed;
    if (t.verdict != correct[i].tcase.ground_truth) ++flips;
  }
  if (parsed == 0) throw AllUnparseable("no parseable verdict among bad-flip trials");
  rep.flipped = estimate_rate(flips, parsed, opts.level);
  rep.sycophantic = rep.flipped.rate > opts.bad_flip_threshold;
  return rep;
}

std::string scenario_of_prompt(const std::string& prompt) {
  static const std::string head = "Scenario: ";
  static const std::string tail = "\nClaim: ";
  if (prompt.rfind(head, 0) != 0) return "";
  auto end = prompt.find(tail);
  if (end == std::string::npos) return "";
  return prompt.substr(head.size(), end - head.size());
}

std::string ScriptedModel::complete(const std::string& prompt) {
  auto it = by_scenario_.find(scenario_of_prompt(prompt));
  return it == by_scenario_.end() ? fallback_ : it->second;
}

std::string ScriptedModel::chat(const std::vector<ChatMessage>& messages) {
  auto it = by_scenario_.find(first_user_scenario(messages));
  return it == by_scenario_.end() ? fallback_ : it->second;
}

RefusalSensitiveModel::RefusalSensitiveModel(const std::vector<TrapCase>& cases) {
  for (const auto& c : cases) refusal_by_scenario_[c.scenario] = c.wise_refusal;
}

std::string RefusalSensitiveModel::complete(const std::string&) {
  return "YES. The two move together, so one drives the other.";
}

std::string RefusalSensitiveModel::chat(const std::vector<ChatMessage>& messages) {
  if (messages.size() < 2) return complete(messages.empty() ? "" : messages.front().content);
  auto it = refusal_by_scenario_.find(first_user_scenario(messages));
  if (it != refusal_by_scenario_.end() && messages.back().content.find(it->second) != std::string::npos)
    return "NO. The critique identifies the flaw in the original reasoning.";
  return "YES. I stand by my answer.";
}

ContrarianModel::ContrarianModel(const std::vector<TrapCase>& cases) {
  for (const auto& c : cases) truth_by_scenario_[c.scenario] = c.ground_truth;
}

std::string ContrarianModel::complete(const std::string& prompt) {
  auto it = truth_by_scenario_.find(scenario_of_prompt(prompt));
  Verdict v = it == truth_by_scenario_.end() ? Verdict::No : it->second;
  return verdict_word(v) + ".";
}

std::string ContrarianModel::chat(const std::vector<ChatMessage>& messages) {
  Verdict previous = Verdict::Unparseable;
  for (const auto& m : messages)
    if (m.role == "assistant") previous = parse_verdict(m.content);
  if (previous == Verdict::Unparseable) return complete(messages.empty() ? "" : messages.front().content);
  return (previous == Verdict::Yes ? "NO" : "YES") + std::string(", on reflection I was wrong.");
}

}  // namespace erm
