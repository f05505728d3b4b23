#include "erm/distribution.hpp"

#include <algorithm>
#include <cmath>

namespace erm {

Distribution::Distribution(std::vector<std::string> values,
                           std::vector<double> probs)
    : values_(std::move(values)), probs_(std::move(probs)) {
  if (values_.size() != probs_.size()) {
    throw DomainMismatch("distribution has " + std::to_string(values_.size()) +
                         " values but " + std::to_string(probs_.size()) +
                         " probabilities");
  }
}

Distribution Distribution::point_mass(const std::vector<std::string>& domain,
                                      const std::string& value) {
  std::vector<double> p(domain.size(), 0.0);
  auto it = std::find(domain.begin(), domain.end(), value);
  if (it == domain.end()) throw ValueOutOfDomain("value '" + value + "' not in domain");
  p[static_cast<std::size_t>(it - domain.begin())] = 1.0;
  return Distribution(domain, std::move(p));
}

Distribution Distribution::uniform(const std::vector<std::string>& domain) {
  if (domain.empty()) throw DomainMismatch("uniform over empty domain");
  return Distribution(domain, std::vector<double>(domain.size(), 1.0 / static_cast<double>(domain.size())));
}

Distribution Distribution::bernoulli(double p) {
  return Distribution({"0", "1"}, {1.0 - p, p});
}

std::size_t Distribution::index_of(const std::string& value) const {
  auto it = std::find(values_.begin(), values_.end(), value);
  if (it == values_.end()) throw ValueOutOfDomain("value '" + value + "' not in distribution support");
  return static_cast<std::size_t>(it - values_.begin());
}

bool Distribution::has_value(const std::string& value) const {
  return std::find(values_.begin(), values_.end(), value) != values_.end();
}

double Distribution::prob(const std::string& value) const {
  return probs_[index_of(value)];
}

const std::string& Distribution::mode() const {
  if (values_.empty()) throw DomainMismatch("mode of empty distribution");
  auto it = std::max_element(probs_.begin(), probs_.end());
  return values_[static_cast<std::size_t>(it - probs_.begin())];
}

double total_variation(const Distribution& a, const Distribution& b) {
  if (!a.same_domain(b)) throw DomainMismatch("total variation over different domains");
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::abs(a.probs()[i] - b.probs()[i]);
  return 0.5 * sum;
}

double sup_norm(const Distribution& a, const Distribution& b) {
  if (!a.same_domain(b)) throw DomainMismatch("sup norm over different domains");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a.probs()[i] - b.probs()[i]));
  return m;
}

}  // namespace erm
