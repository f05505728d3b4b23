#include "erm/ctl.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace erm {

namespace {

nlohmann::json distribution_to_json(const Distribution& d) {
  auto arr = nlohmann::json::array();
  for (std::size_t i = 0; i < d.size(); ++i) arr.push_back({d.values()[i], d.probs()[i]});
  return arr;
}

Distribution distribution_from_json(const nlohmann::json& doc) {
  std::vector<std::string> values;
  std::vector<double> probs;
  for (const auto& pair : doc) {
    values.push_back(pair.at(0).get<std::string>());
    probs.push_back(pair.at(1).get<double>());
  }
  return Distribution(std::move(values), std::move(probs));
}

}  // namespace

nlohmann::json entry_to_json(const CtlEntry& e) {
  nlohmann::json doc;
  doc["t"] = e.t;
  doc["state"] = e.state.assignment;
  auto claims = nlohmann::json::array();
  for (const auto& c : e.claims) claims.push_back({c.from, c.to});
  doc["claims"] = claims;
  doc["action"] = {{"target", e.action.target}, {"value", e.action.value}};
  doc["predicted"] = distribution_to_json(e.predicted);
  doc["observed"] = e.observed;
  doc["delta"] = e.delta;
  if (e.compensation) doc["compensation"] = true;
  return doc;
}

CtlEntry entry_from_json(const nlohmann::json& doc) {
  try {
    CtlEntry e;
    e.t = doc.at("t").get<std::uint64_t>();
    e.state.assignment = doc.at("state").get<Assignment>();
    for (const auto& c : doc.at("claims")) e.claims.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
    e.action = Intervention{doc.at("action").at("target").get<std::string>(),
                            doc.at("action").at("value").get<std::string>()};
    e.predicted = distribution_from_json(doc.at("predicted"));
    e.observed = doc.at("observed").get<std::string>();
    e.delta = doc.at("delta").get<double>();
    e.compensation = doc.value("compensation", false);
    return e;
  } catch (const nlohmann::json::exception& ex) {
    throw FormatError(std::string("malformed CTL entry: ") + ex.what());
  }
}

DeltaMetric delta_metric_from_string(const std::string& s) {
  if (s == "point_mass") return DeltaMetric::PointMass;
  if (s == "empirical_do") return DeltaMetric::EmpiricalDo;
  throw FormatError("unknown delta metric '" + s + "'");
}

std::string to_string(DeltaMetric m) {
  return m == DeltaMetric::PointMass ? "point_mass" : "empirical_do";
}

double point_mass_delta(const Distribution& predicted, const std::string& observed) {
  return total_variation(predicted, Distribution::point_mass(predicted.values(), observed));
}

// ---------------------------------------------------------------------------

CtlStore::CtlStore(const CtlStore& other) : entries_(other.entries_) {}

CtlStore& CtlStore::operator=(const CtlStore& other) {
  if (this != &other) {
    entries_ = other.entries_;
    path_.reset();
    file_.reset();
  }
  return *this;
}

CtlStore CtlStore::load(const std::string& path) {
  CtlStore store;
  std::ifstream in(path);
  if (!in) throw PersistenceFailure("cannot read CTL file '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
    store.append(entry_from_json(doc));
  }
  return store;
}

CtlStore CtlStore::open(const std::string& path) {
  CtlStore store;
  if (std::ifstream probe(path); probe.good()) store = load(path);
  store.path_ = path;
  store.file_.reset(std::fopen(path.c_str(), "a"));
  if (!store.file_) throw PersistenceFailure("cannot open CTL file '" + path + "' for appending");
  return store;
}

void CtlStore::append(CtlEntry entry) {
  if (!entries_.empty() && entry.t <= entries_.back().t) {
    throw NonMonotonicTimestamp("timestamp " + std::to_string(entry.t) + " does not follow " +
                                std::to_string(entries_.back().t));
  }
  if (!(entry.delta >= 0.0)) throw InvalidParameter("delta must be nonnegative");
  if (!entry.predicted.has_value(entry.observed)) {
    throw ValueOutOfDomain("observed value '" + entry.observed + "' is outside the predicted domain");
  }
  if (file_) {
    std::string line = entry_to_json(entry).dump() + "\n";
    if (std::fwrite(line.data(), 1, line.size(), file_.get()) != line.size() || std::fflush(file_.get()) != 0) {
      throw PersistenceFailure("write to CTL file '" + path_.value_or("") + "' failed");
    }
  }
  entries_.push_back(std::move(entry));
}

Evidence CtlStore::evidence(const CausalClaim& claim, double eps_err) const {
  Evidence ev;
  for (const auto& e : entries_) {
    if (e.compensation) continue;
    if (std::find(e.claims.begin(), e.claims.end(), claim) == e.claims.end()) continue;
    if (e.delta <= eps_err) {
      ++ev.support;
    } else {
      ++ev.refute;
    }
  }
  return ev;
}

std::size_t CtlStore::support(const CausalClaim& claim, double eps_err) const {
  return evidence(claim, eps_err).support;
}

std::size_t CtlStore::refute(const CausalClaim& claim, double eps_err) const {
  return evidence(claim, eps_err).refute;
}

EmpiricalDo CtlStore::empirical_do(const std::string& outcome, const Intervention& iv,
                                   const std::vector<std::string>& domain) const {
  std::vector<double> counts(domain.size(), 0.0);
  std::size_t n = 0;
  for (const auto& e : entries_) {
    if (e.compensation || e.action != iv) continue;
    auto it = e.state.assignment.find(outcome);
    if (it == e.state.assignment.end()) continue;
    auto pos = std::find(domain.begin(), domain.end(), it->second);
    if (pos == domain.end()) throw ValueOutOfDomain("logged value '" + it->second + "' is outside the outcome domain");
    counts[static_cast<std::size_t>(pos - domain.begin())] += 1.0;
    ++n;
  }
  if (n == 0) throw NoInterventionRecords("no CTL entries under " + to_string(iv) + " observe '" + outcome + "'");
  for (double& c : counts) c /= static_cast<double>(n);
  return EmpiricalDo{Distribution(domain, std::move(counts)), n};
}

std::string CtlStore::to_jsonl() const {
  std::string out;
  for (const auto& e : entries_) out += entry_to_json(e).dump() + "\n";
  return out;
}

double empirical_do_delta(const Distribution& predicted, const CtlStore& log, const std::string& outcome,
                          const Intervention& iv) {
  return total_variation(predicted, log.empirical_do(outcome, iv, predicted.values()).distribution);
}

double required_samples_exact(double epsilon, double delta, std::size_t domain_size) {
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw InvalidParameter("epsilon must lie in (0,1)");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidParameter("delta must lie in (0,1)");
  if (domain_size < 2) throw InvalidParameter("outcome domain needs at least 2 values");
  return std::log(2.0 * static_cast<double>(domain_size) / delta) / (2.0 * epsilon * epsilon);
}

std::uint64_t required_samples(double epsilon, double delta, std::size_t domain_size) {
  return static_cast<std::uint64_t>(std::ceil(required_samples_exact(epsilon, delta, domain_size)));
}

}  // namespace erm
