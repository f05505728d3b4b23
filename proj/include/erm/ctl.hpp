#pragma once

#include <cstdint>
#include <cstdio>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "erm/distribution.hpp"
#include "erm/graph.hpp"
#include "erm/scm.hpp"

namespace erm {

inline constexpr double kDefaultEpsErr = 0.1;

/// One logged interaction: timestamp, world state after the action, the
/// hypothesis (claims plus predicted outcome distribution), the action, the
/// observed outcome value and the step's epistemic error.
struct CtlEntry {
  std::uint64_t t = 0;
  WorldState state;
  std::vector<CausalClaim> claims;
  Intervention action;
  Distribution predicted;
  std::string observed;
  double delta = 0.0;
  /// Compensating actions are logged but never count as evidence.
  bool compensation = false;

  friend bool operator==(const CtlEntry&, const CtlEntry&) = default;
};

nlohmann::json entry_to_json(const CtlEntry& e);
CtlEntry entry_from_json(const nlohmann::json& doc);

/// How a step's delta is computed.
enum class DeltaMetric {
  /// TV between the prediction and a point mass on the observed value.
  PointMass,
  /// TV between the prediction and the log's empirical P(outcome | do(action))
  /// including the new observation.
  EmpiricalDo,
};

DeltaMetric delta_metric_from_string(const std::string& s);
std::string to_string(DeltaMetric m);

double point_mass_delta(const Distribution& predicted, const std::string& observed);

struct Evidence {
  std::size_t support = 0;
  std::size_t refute = 0;
};

struct EmpiricalDo {
  Distribution distribution;
  std::size_t n = 0;
};

/// Append-only causal transaction log. Optionally backed by a JSONL file
/// that receives one flushed line per append.
class CtlStore {
 public:
  CtlStore() = default;
  /// Opens (creating if needed) a JSONL log and loads the existing entries.
  static CtlStore open(const std::string& path);
  /// Reads a closed JSONL log without attaching a writer.
  static CtlStore load(const std::string& path);

  CtlStore(CtlStore&&) noexcept = default;
  CtlStore& operator=(CtlStore&&) noexcept = default;
  CtlStore(const CtlStore& other);
  CtlStore& operator=(const CtlStore& other);

  void append(CtlEntry entry);

  std::span<const CtlEntry> entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  std::uint64_t last_timestamp() const { return entries_.empty() ? 0 : entries_.back().t; }
  const std::optional<std::string>& path() const { return path_; }

  /// Entries whose hypothesis carries `claim` and whose delta is at most
  /// eps_err. Compensation entries are skipped.
  std::size_t support(const CausalClaim& claim, double eps_err = kDefaultEpsErr) const;
  /// As support(), with delta above eps_err.
  std::size_t refute(const CausalClaim& claim, double eps_err = kDefaultEpsErr) const;
  Evidence evidence(const CausalClaim& claim, double eps_err = kDefaultEpsErr) const;

  /// Ratio-of-indicators estimate of P(outcome | do(iv)) over the
  /// non-compensation entries whose action equals iv. Throws
  /// NoInterventionRecords when there are none.
  EmpiricalDo empirical_do(const std::string& outcome, const Intervention& iv,
                           const std::vector<std::string>& domain) const;

  /// Serializes every entry as JSONL.
  std::string to_jsonl() const;

 private:
  struct FileCloser {
    void operator()(std::FILE* f) const {
      if (f) std::fclose(f);
    }
  };

  std::vector<CtlEntry> entries_;
  std::optional<std::string> path_;
  std::unique_ptr<std::FILE, FileCloser> file_;
};

/// TV between `predicted` and the log's empirical do-distribution (the entry
/// being scored must already be in the log).
double empirical_do_delta(const Distribution& predicted, const CtlStore& log, const std::string& outcome,
                          const Intervention& iv);

/// Hoeffding sample size (1 / (2 eps^2)) ln(2 k / delta), before rounding up.
double required_samples_exact(double epsilon, double delta, std::size_t domain_size);
/// Interventions sufficient for eps-accurate recovery with probability
/// 1 - delta over a k-valued outcome.
std::uint64_t required_samples(double epsilon, double delta, std::size_t domain_size);

}  // namespace erm
