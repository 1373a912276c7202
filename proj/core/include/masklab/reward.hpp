#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace masklab::reward {

// Tag strings are exact and case-sensitive.
inline constexpr std::string_view kThinkOpen = "<think>";
inline constexpr std::string_view kThinkClose = "</think>";
inline constexpr std::string_view kAnswerOpen = "<answer>";
inline constexpr std::string_view kAnswerClose = "</answer>";

/// A raw model output split into think / answer segments.
///
/// format_ok is true iff the text is exactly one <think>...</think> followed
/// by exactly one <answer>...</answer> with only whitespace between and
/// around them. On format failure the whole trimmed text becomes the answer
/// (fallback rule) so accuracy credit is still assignable.
struct StructuredResponse {
  std::string raw_text;
  std::string think_text;
  std::string answer_text;
  bool format_ok = false;
};

struct RewardBreakdown {
  double r_fmt = 0.0;    // {0,1}
  double r_exact = 0.0;  // {0,1}
  double r_sim = 0.0;    // [0,1]
  double total = 0.0;    // r_fmt + r_exact + r_sim at unit weights
};

/// Per-term weights; equal unit weights reproduce the canonical total.
struct RewardWeights {
  double fmt = 1.0;
  double exact = 1.0;
  double sim = 1.0;
};

StructuredResponse parse_response(std::string_view raw);

/// Unit-cost edit distance over normalized text (lowercased, trimmed,
/// whitespace collapsed).
size_t levenshtein_distance(std::string_view a, std::string_view b);

/// r_sim = 1 - d / max(|a|,|o|) over normalized strings; empty answer with
/// nonempty gold scores 0. Empty gold (after normalization) is an input error.
RewardBreakdown compute_reward(const StructuredResponse& response, std::string_view gold);
RewardBreakdown compute_reward(const StructuredResponse& response, std::string_view gold,
                               const RewardWeights& weights);

}  // namespace masklab::reward
