#include "masklab/reward.hpp"

#include <algorithm>
#include <vector>

#include "masklab/common.hpp"
#include "masklab/text.hpp"

namespace masklab::reward {

namespace {

bool whitespace_only(std::string_view s) {
  return s.find_first_not_of(" \t\n\r\f\v") == std::string_view::npos;
}

// Position of the only occurrence of `tag`, or npos if absent or repeated.
size_t find_unique(std::string_view s, std::string_view tag) {
  size_t first = s.find(tag);
  if (first == std::string_view::npos) return std::string_view::npos;
  if (s.find(tag, first + tag.size()) != std::string_view::npos)
    return std::string_view::npos;
  return first;
}

}  // namespace

StructuredResponse parse_response(std::string_view raw) {
  StructuredResponse out;
  out.raw_text = std::string(raw);

  size_t to = find_unique(raw, kThinkOpen);
  size_t tc = find_unique(raw, kThinkClose);
  size_t ao = find_unique(raw, kAnswerOpen);
  size_t ac = find_unique(raw, kAnswerClose);

  // "</think>" contains no "<think>" substring hazard, but "<think>" IS a
  // substring of no other tag; the four searches are independent.
  bool ok = to != std::string_view::npos && tc != std::string_view::npos &&
            ao != std::string_view::npos && ac != std::string_view::npos &&
            to < tc && tc < ao && ao < ac &&
            whitespace_only(raw.substr(0, to)) &&
            whitespace_only(raw.substr(tc + kThinkClose.size(),
                                       ao - (tc + kThinkClose.size()))) &&
            whitespace_only(raw.substr(ac + kAnswerClose.size()));

  if (ok) {
    out.format_ok = true;
    out.think_text =
        text::trim(raw.substr(to + kThinkOpen.size(), tc - (to + kThinkOpen.size())));
    out.answer_text =
        text::trim(raw.substr(ao + kAnswerOpen.size(), ac - (ao + kAnswerOpen.size())));
  } else {
    out.format_ok = false;
    out.think_text.clear();
    out.answer_text = text::trim(raw);
  }
  return out;
}

size_t levenshtein_distance(std::string_view a, std::string_view b) {
  const std::string na = text::normalize(a);
  const std::string nb = text::normalize(b);
  const size_t m = na.size(), n = nb.size();
  if (m == 0) return n;
  if (n == 0) return m;

  std::vector<size_t> prev(n + 1), cur(n + 1);
  for (size_t j = 0; j <= n; ++j) prev[j] = j;
  for (size_t i = 1; i <= m; ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= n; ++j) {
      size_t sub = prev[j - 1] + (na[i - 1] == nb[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[n];
}

RewardBreakdown compute_reward(const StructuredResponse& response, std::string_view gold) {
  return compute_reward(response, gold, RewardWeights{});
}

RewardBreakdown compute_reward(const StructuredResponse& response, std::string_view gold,
                               const RewardWeights& weights) {
  const std::string ngold = text::normalize(gold);
  if (ngold.empty()) throw InputError("compute_reward: gold is empty after normalization");
  const std::string nans = text::normalize(response.answer_text);

  RewardBreakdown out;
  out.r_fmt = response.format_ok ? 1.0 : 0.0;
  out.r_exact = (nans == ngold) ? 1.0 : 0.0;
  if (nans.empty()) {
    out.r_sim = 0.0;
  } else {
    size_t d = levenshtein_distance(nans, ngold);
    size_t denom = std::max(nans.size(), ngold.size());
    out.r_sim = 1.0 - static_cast<double>(d) / static_cast<double>(denom);
  }
  out.total = weights.fmt * out.r_fmt + weights.exact * out.r_exact + weights.sim * out.r_sim;
  return out;
}

}  // namespace masklab::reward
