#pragma once

#include <string>
#include <vector>

#include "erm/errors.hpp"

namespace erm {

/// A finite categorical distribution over an ordered list of string values.
/// The value order is the variable's declared domain order.
class Distribution {
 public:
  Distribution() = default;
  Distribution(std::vector<std::string> values, std::vector<double> probs);

  /// Point mass on `value` within `domain`.
  static Distribution point_mass(const std::vector<std::string>& domain,
                                 const std::string& value);
  static Distribution uniform(const std::vector<std::string>& domain);
  /// Binary helper: domain {"0","1"} with P("1") = p.
  static Distribution bernoulli(double p);

  const std::vector<std::string>& values() const { return values_; }
  const std::vector<double>& probs() const { return probs_; }
  std::size_t size() const { return values_.size(); }

  double prob(const std::string& value) const;
  std::size_t index_of(const std::string& value) const;
  bool has_value(const std::string& value) const;

  /// Most probable value; ties resolved by domain order.
  const std::string& mode() const;

  bool same_domain(const Distribution& other) const {
    return values_ == other.values_;
  }

  friend bool operator==(const Distribution&, const Distribution&) = default;

 private:
  std::vector<std::string> values_;
  std::vector<double> probs_;
};

/// Total-variation distance. Throws DomainMismatch on differing supports.
double total_variation(const Distribution& a, const Distribution& b);

/// Max absolute difference of probabilities.
double sup_norm(const Distribution& a, const Distribution& b);

}  // namespace erm
