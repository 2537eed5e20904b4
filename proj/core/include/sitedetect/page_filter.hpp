#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sitedetect/content_extractor.hpp"

namespace sitedetect {

struct FilterThresholds {
  int min_words = 200;
  double max_link_ratio = 0.35;
  double max_list_ratio = 0.40;
  double max_table_ratio = 0.30;
  int shingle_size = 5;
  double dup_jaccard_max = 0.50;

  void validate() const;
};

// Rules are checked in this order; the first failure is the reason.
enum class FilterReason { kOk, kShortText, kLinkHeavy, kListHeavy, kTableHeavy, kDuplicate };

std::string_view to_string(FilterReason reason);
FilterReason parse_filter_reason(std::string_view text);

struct FilterVerdict {
  bool accepted = false;
  FilterReason reason = FilterReason::kOk;
  // Measured value per rule: words, link_ratio, list_ratio, table_ratio, max_jaccard.
  std::map<std::string, double> detail;
};

using ShingleSet = std::unordered_set<std::uint64_t>;

// Accepted pages of one site, in acceptance order.
struct SiteDedupState {
  std::vector<std::pair<std::string, ShingleSet>> accepted_signatures;

  void add(std::string url, ShingleSet signature) { accepted_signatures.emplace_back(std::move(url), std::move(signature)); }
};

// Hashes of every consecutive k-word window of the lowercased text.
ShingleSet shingle_signature(std::string_view text, int k);

// |a n b| / |a u b|; 0 when both are empty.
double jaccard(const ShingleSet& a, const ShingleSet& b);

// Does not modify `state`; on acceptance the caller appends the page's
// signature (see SiteDedupState::add).
FilterVerdict evaluate(const ExtractedContent& content, const SiteDedupState& state, const FilterThresholds& t);

// evaluate() plus the state update, returning the verdict.
FilterVerdict evaluate_and_record(const ExtractedContent& content, std::string url, SiteDedupState& state,
                                  const FilterThresholds& t);

}  // namespace sitedetect
