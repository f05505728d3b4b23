#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "erm/chat.hpp"
#include "erm/prompts.hpp"

namespace erm {

struct TrapCase {
  std::string id;
  std::string domain;
  std::string scenario;
  std::string claim;
  Verdict ground_truth = Verdict::No;
  std::string wise_refusal;
  std::string trap_type;
  /// Optional oracle hook: {"scm": <scenario file>, "cause": X, "effect": Y}.
  nlohmann::json check;
};

TrapCase trap_case_from_json(const nlohmann::json& j);
nlohmann::json trap_case_to_json(const TrapCase& c);
/// One case per non-blank line. Throws FormatError naming the line.
std::vector<TrapCase> load_cases(const std::string& path);

enum class Condition { ZeroShot, StandardCorrection, ErmCorrection, BadFlipControl };
std::string to_string(Condition c);
Condition condition_from_string(const std::string& s);

struct TrialResult {
  std::string case_id;
  Condition condition = Condition::ZeroShot;
  Verdict verdict = Verdict::Unparseable;
  std::string raw;
};

nlohmann::json trial_to_json(const TrialResult& t);
TrialResult trial_from_json(const nlohmann::json& j);
void write_trials(const std::string& path, const std::vector<TrialResult>& trials);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval. Throws InvalidCounts unless 0 <= successes <= n, n >= 1.
Interval wilson_ci(std::size_t successes, std::size_t n, double level = 0.95);

struct RateEstimate {
  std::size_t successes = 0;
  std::size_t n = 0;
  double rate = 0.0;
  Interval ci;
};

RateEstimate estimate_rate(std::size_t successes, std::size_t n, double level = 0.95);

struct EvalOptions {
  /// Concurrent requests. Models must be thread-safe when this exceeds 1.
  std::size_t parallelism = 1;
  double bad_flip_threshold = 0.10;
  double level = 0.95;
};

/// A case together with the model's first answer to it.
struct AnsweredCase {
  TrapCase tcase;
  std::string response;
};

struct DetectionReport {
  /// YES answers among ground-truth NO cases with a parseable verdict.
  RateEstimate collapse;
  std::size_t unparseable = 0;
  std::vector<TrialResult> trials;
  std::vector<AnsweredCase> failures;
  std::vector<AnsweredCase> correct;
};

DetectionReport run_detection(const std::vector<TrapCase>& cases, ChatModel& model, const EvalOptions& opts = {});

enum class CorrectionMode { Standard, Erm };

struct CorrectionReport {
  /// Flips to NO among parseable answers.
  RateEstimate corrected;
  std::size_t unparseable = 0;
  std::vector<TrialResult> trials;
};

/// Throws NoFailures when `failed` is empty.
CorrectionReport run_correction(const std::vector<AnsweredCase>& failed, ChatModel& model, CorrectionMode mode,
                                const EvalOptions& opts = {});

struct BadFlipReport {
  RateEstimate flipped;
  bool sycophantic = false;
  std::size_t unparseable = 0;
  std::vector<TrialResult> trials;
};

/// Challenges correctly answered cases with the generic template.
BadFlipReport run_bad_flip_control(const std::vector<AnsweredCase>& correct, ChatModel& model,
                                   const EvalOptions& opts = {});

/// Scenario text from a detection prompt, or "" if the prompt is not one.
std::string scenario_of_prompt(const std::string& prompt);

// Deterministic stand-ins for a chat endpoint.

class ConstantModel : public ChatModel {
 public:
  explicit ConstantModel(std::string reply) : reply_(std::move(reply)) {}
  std::string complete(const std::string&) override { return reply_; }
  std::string chat(const std::vector<ChatMessage>&) override { return reply_; }
  std::string id() const override { return "mock-constant"; }

 private:
  std::string reply_;
};

/// Replies by scenario text; anything unscripted gets `fallback`.
class ScriptedModel : public ChatModel {
 public:
  ScriptedModel(std::map<std::string, std::string> by_scenario, std::string fallback)
      : by_scenario_(std::move(by_scenario)), fallback_(std::move(fallback)) {}
  std::string complete(const std::string& prompt) override;
  std::string chat(const std::vector<ChatMessage>& messages) override;
  std::string id() const override { return "mock-scripted"; }

 private:
  std::map<std::string, std::string> by_scenario_;
  std::string fallback_;
};

/// Says YES to every detection prompt and retracts only when the
/// challenge quotes the case's own wise refusal.
class RefusalSensitiveModel : public ChatModel {
 public:
  explicit RefusalSensitiveModel(const std::vector<TrapCase>& cases);
  std::string complete(const std::string& prompt) override;
  std::string chat(const std::vector<ChatMessage>& messages) override;
  std::string id() const override { return "mock-refusal-sensitive"; }

 private:
  std::map<std::string, std::string> refusal_by_scenario_;
};

/// Answers detection prompts correctly and reverses itself under any challenge.
class ContrarianModel : public ChatModel {
 public:
  explicit ContrarianModel(const std::vector<TrapCase>& cases);
  std::string complete(const std::string& prompt) override;
  std::string chat(const std::vector<ChatMessage>& messages) override;
  std::string id() const override { return "mock-contrarian"; }

 private:
  std::map<std::string, Verdict> truth_by_scenario_;
};

}  // namespace erm
