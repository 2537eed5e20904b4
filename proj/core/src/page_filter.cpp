#include "sitedetect/page_filter.hpp"

#include <algorithm>

#include "sitedetect/errors.hpp"
#include "sitedetect/hashing.hpp"
#include "sitedetect/text.hpp"

namespace sitedetect {

namespace {
constexpr std::uint64_t kShingleSeed = 0x5eed0f5b1ef00dULL;
}  // namespace

void FilterThresholds::validate() const {
  auto ratio_ok = [](double r) { return r >= 0.0 && r <= 1.0; };
  if (min_words < 1) throw Error(ErrorCode::kInvalidArgument, "min_words must be >= 1");
  if (!ratio_ok(max_link_ratio) || !ratio_ok(max_list_ratio) || !ratio_ok(max_table_ratio)) {
    throw Error(ErrorCode::kInvalidArgument, "ratio thresholds must lie in [0,1]");
  }
  if (shingle_size < 2) throw Error(ErrorCode::kInvalidArgument, "shingle_size must be >= 2");
  if (!ratio_ok(dup_jaccard_max)) throw Error(ErrorCode::kInvalidArgument, "dup_jaccard_max must lie in [0,1]");
}

std::string_view to_string(FilterReason reason) {
  switch (reason) {
    case FilterReason::kOk: return "ok";
    case FilterReason::kShortText: return "short_text";
    case FilterReason::kLinkHeavy: return "link_heavy";
    case FilterReason::kListHeavy: return "list_heavy";
    case FilterReason::kTableHeavy: return "table_heavy";
    case FilterReason::kDuplicate: return "duplicate";
  }
  return "ok";
}

FilterReason parse_filter_reason(std::string_view text) {
  for (auto r : {FilterReason::kOk, FilterReason::kShortText, FilterReason::kLinkHeavy, FilterReason::kListHeavy,
                 FilterReason::kTableHeavy, FilterReason::kDuplicate}) {
    if (to_string(r) == text) return r;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown filter reason '" + std::string(text) + "'");
}

ShingleSet shingle_signature(std::string_view text, int k) {
  if (k < 2) throw Error(ErrorCode::kInvalidArgument, "shingle size must be >= 2");
  std::string lowered = to_lower(text);
  std::u32string chars = utf8_to_u32(lowered);
  std::vector<std::string> words;
  std::u32string current;
  for (char32_t c : chars) {
    if (is_unicode_space(c)) {
      if (!current.empty()) words.push_back(u32_to_utf8(current));
      current.clear();
    } else {
      current.push_back(c);
    }
  }
  if (!current.empty()) words.push_back(u32_to_utf8(current));

  ShingleSet out;
  auto size = static_cast<std::size_t>(k);
  if (words.size() < size) return out;
  out.reserve(words.size() - size + 1);
  for (std::size_t i = 0; i + size <= words.size(); ++i) {
    std::string window = words[i];
    for (std::size_t j = 1; j < size; ++j) {
      window += ' ';
      window += words[i + j];
    }
    out.insert(hash64(window, kShingleSeed));
  }
  return out;
}

double jaccard(const ShingleSet& a, const ShingleSet& b) {
  if (a.empty() && b.empty()) return 0.0;
  const ShingleSet& small = a.size() <= b.size() ? a : b;
  const ShingleSet& large = a.size() <= b.size() ? b : a;
  std::size_t common = 0;
  for (auto h : small) common += large.count(h);
  std::size_t uni = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(uni);
}

namespace {

FilterVerdict judge(const ExtractedContent& content, const ShingleSet& signature, const SiteDedupState& state,
                    const FilterThresholds& t) {
  t.validate();
  StructureRatios r = ratios(content);
  double max_similarity = 0.0;
  for (const auto& [url, other] : state.accepted_signatures) max_similarity = std::max(max_similarity, jaccard(signature, other));

  FilterVerdict v;
  v.detail = {
      {"words", static_cast<double>(content.word_count)},
      {"link_ratio", r.link},
      {"list_ratio", r.list},
      {"table_ratio", r.table},
      {"max_jaccard", max_similarity},
  };
  if (content.word_count < static_cast<std::size_t>(t.min_words)) {
    v.reason = FilterReason::kShortText;
  } else if (r.link > t.max_link_ratio) {
    v.reason = FilterReason::kLinkHeavy;
  } else if (r.list > t.max_list_ratio) {
    v.reason = FilterReason::kListHeavy;
  } else if (r.table > t.max_table_ratio) {
    v.reason = FilterReason::kTableHeavy;
  } else if (!state.accepted_signatures.empty() && !signature.empty() && max_similarity >= t.dup_jaccard_max) {
    v.reason = FilterReason::kDuplicate;
  } else {
    v.reason = FilterReason::kOk;
  }
  v.accepted = v.reason == FilterReason::kOk;
  return v;
}

}  // namespace

FilterVerdict evaluate(const ExtractedContent& content, const SiteDedupState& state, const FilterThresholds& t) {
  return judge(content, shingle_signature(content.main_text, t.shingle_size), state, t);
}

FilterVerdict evaluate_and_record(const ExtractedContent& content, std::string url, SiteDedupState& state,
                                  const FilterThresholds& t) {
  ShingleSet signature = shingle_signature(content.main_text, t.shingle_size);
  FilterVerdict v = judge(content, signature, state, t);
  if (v.accepted) state.add(std::move(url), std::move(signature));
  return v;
}

}  // namespace sitedetect
