#pragma once

#include <string>

namespace erm {

enum class Verdict { Yes, No, Unparseable };

std::string to_string(Verdict v);
Verdict verdict_from_string(const std::string& s);

/// The first standalone YES or NO token (case-insensitive) decides the
/// verdict. Never throws.
Verdict parse_verdict(const std::string& response);

/// Zero-shot detection prompt.
std::string detection_prompt(const std::string& scenario_text, const std::string& causal_claim);
/// Generic outcome-level challenge.
std::string standard_correction_prompt(const std::string& original_response);
/// Challenge carrying the case's wise refusal.
std::string erm_correction_prompt(const std::string& wise_refusal);

}  // namespace erm
