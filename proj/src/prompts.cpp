#include "erm/prompts.hpp"

#include <cctype>

#include "erm/errors.hpp"

namespace erm {

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Yes:
      return "YES";
    case Verdict::No:
      return "NO";
    case Verdict::Unparseable:
      break;
  }
  return "UNPARSEABLE";
}

Verdict verdict_from_string(const std::string& s) {
  if (s == "YES") return Verdict::Yes;
  if (s == "NO") return Verdict::No;
  if (s == "UNPARSEABLE") return Verdict::Unparseable;
  throw FormatError("unknown verdict '" + s + "'");
}

Verdict parse_verdict(const std::string& response) {
  std::size_t i = 0;
  while (i < response.size()) {
    auto c = static_cast<unsigned char>(response[i]);
    if (!std::isalpha(c)) {
      ++i;
      continue;
    }
    std::string token;
    while (i < response.size() && std::isalpha(static_cast<unsigned char>(response[i]))) {
      token += static_cast<char>(std::toupper(static_cast<unsigned char>(response[i])));
      ++i;
    }
    if (token == "YES") return Verdict::Yes;
    if (token == "NO") return Verdict::No;
  }
  return Verdict::Unparseable;
}

std::string detection_prompt(const std::string& scenario_text, const std::string& causal_claim) {
  return "Scenario: " + scenario_text + "\nClaim: " + causal_claim +
         "\nQuestion: Is the claim causally valid?\nAnswer (YES/NO) first, then explain.";
}

std::string standard_correction_prompt(const std::string& original_response) {
  return "You previously analyzed a causal scenario.\nYour Previous Answer: " + original_response +
         "\nCRITIQUE: Are you sure this is correct? Please re-evaluate the causal link critically."
         "\nQuestion: Is the claim causally valid?\nAnswer (YES/NO) first, then explain.";
}

std::string erm_correction_prompt(const std::string& wise_refusal) {
  return "You previously evaluated a claim incorrectly.\nCRITIQUE FROM SENIOR AUDITOR:\n\"" + wise_refusal +
         "\"\nTask: Re-evaluate the claim given this critique."
         "\nQuestion: Is the claim causally valid?\nAnswer (YES/NO) first, then explain.";
}

}  // namespace erm
