#include <gtest/gtest.h>

#include <random>
#include <set>

#include "golden.hpp"
#include "sitedetect/errors.hpp"
#include "sitedetect/hashing.hpp"
#include "sitedetect/page_filter.hpp"

namespace sitedetect {
namespace {

ExtractedContent content_of(std::size_t words, std::size_t total, std::size_t link = 0, std::size_t list = 0,
                            std::size_t table = 0, std::string text = {}) {
  ExtractedContent c;
  c.word_count = words;
  c.total_chars = total;
  c.link_chars = link;
  c.list_chars = list;
  c.table_chars = table;
  c.main_text = std::move(text);
  return c;
}

std::string words_text(std::mt19937_64& rng, int n) {
  std::string s;
  for (int i = 0; i < n; ++i) {
    if (i) s += ' ';
    for (int k = 0; k < 6; ++k) s += static_cast<char>('a' + rng() % 26);
  }
  return s;
}

TEST(PageFilter, ShortText) {
  SiteDedupState state;
  auto v = evaluate(content_of(50, 300), state, FilterThresholds{});
  EXPECT_FALSE(v.accepted);
  EXPECT_EQ(v.reason, FilterReason::kShortText);
  EXPECT_EQ(v.detail.at("words"), 50.0);
}

TEST(PageFilter, PureLinkListingIsLinkHeavy) {
  SiteDedupState state;
  auto v = evaluate(content_of(300, 1500, 1500, 1500), state, FilterThresholds{});
  EXPECT_EQ(v.reason, FilterReason::kLinkHeavy);
  EXPECT_EQ(v.detail.at("link_ratio"), 1.0);
}

TEST(PageFilter, RuleOrderFirstFailureWins) {
  SiteDedupState state;
  FilterThresholds t;
  EXPECT_EQ(evaluate(content_of(10, 100, 100, 100, 100), state, t).reason, FilterReason::kShortText);
  EXPECT_EQ(evaluate(content_of(300, 1000, 400, 900, 900), state, t).reason, FilterReason::kLinkHeavy);
  EXPECT_EQ(evaluate(content_of(300, 1000, 300, 900, 900), state, t).reason, FilterReason::kListHeavy);
  EXPECT_EQ(evaluate(content_of(300, 1000, 300, 400, 900), state, t).reason, FilterReason::kTableHeavy);
  EXPECT_EQ(evaluate(content_of(300, 1000, 350, 400, 300), state, t).reason, FilterReason::kOk);
}

TEST(PageFilter, BoundaryValuesAreAccepted) {
  SiteDedupState state;
  FilterThresholds t;
  std::mt19937_64 rng(1);
  auto v = evaluate(content_of(200, 1000, 350, 400, 300, words_text(rng, 200)), state, t);
  EXPECT_TRUE(v.accepted);
  EXPECT_EQ(v.reason, FilterReason::kOk);
  EXPECT_EQ(evaluate(content_of(199, 1000), state, t).reason, FilterReason::kShortText);
}

TEST(PageFilter, IdenticalPagesSecondIsDuplicate) {
  std::mt19937_64 rng(5);
  std::string text = words_text(rng, 500);
  auto c = content_of(500, text.size(), 0, 0, 0, text);
  SiteDedupState state;
  FilterThresholds t;
  auto first = evaluate_and_record(c, "https://ex.com/1", state, t);
  EXPECT_TRUE(first.accepted);
  ASSERT_EQ(state.accepted_signatures.size(), 1u);
  auto second = evaluate_and_record(c, "https://ex.com/2", state, t);
  EXPECT_FALSE(second.accepted);
  EXPECT_EQ(second.reason, FilterReason::kDuplicate);
  EXPECT_DOUBLE_EQ(second.detail.at("max_jaccard"), 1.0);
  EXPECT_EQ(state.accepted_signatures.size(), 1u);
}

TEST(PageFilter, EvaluateDoesNotTouchState) {
  std::mt19937_64 rng(6);
  std::string text = words_text(rng, 250);
  SiteDedupState state;
  evaluate(content_of(250, text.size(), 0, 0, 0, text), state, FilterThresholds{});
  EXPECT_TRUE(state.accepted_signatures.empty());
}

TEST(PageFilter, RejectedPagesAreNotRecorded) {
  SiteDedupState state;
  evaluate_and_record(content_of(5, 20, 0, 0, 0, "a b c d e"), "u", state, FilterThresholds{});
  EXPECT_TRUE(state.accepted_signatures.empty());
}

TEST(PageFilter, ThresholdValidation) {
  FilterThresholds t;
  EXPECT_NO_THROW(t.validate());
  t.min_words = 0;
  EXPECT_THROW(t.validate(), Error);
  t = {};
  t.max_link_ratio = 1.5;
  EXPECT_THROW(t.validate(), Error);
  t = {};
  t.shingle_size = 0;
  EXPECT_THROW(t.validate(), Error);
  t = {};
  t.dup_jaccard_max = -0.1;
  EXPECT_THROW(t.validate(), Error);
}

TEST(PageFilter, ReasonNames) {
  for (auto r : {FilterReason::kOk, FilterReason::kShortText, FilterReason::kLinkHeavy, FilterReason::kListHeavy,
                 FilterReason::kTableHeavy, FilterReason::kDuplicate}) {
    EXPECT_EQ(parse_filter_reason(to_string(r)), r);
  }
  EXPECT_EQ(to_string(FilterReason::kShortText), "short_text");
  EXPECT_THROW(parse_filter_reason("nope"), Error);
}

TEST(Shingles, WindowCount) {
  auto s = shingle_signature("a b c d", 3);
  EXPECT_EQ(s.size(), 2u);
  EXPECT_TRUE(shingle_signature("a b", 3).empty());
  EXPECT_EQ(shingle_signature("x y z w", 3), shingle_signature("x y z w", 3));
  EXPECT_EQ(shingle_signature("A  B\nC", 3), shingle_signature("a b c", 3));
  EXPECT_NE(shingle_signature("a b c", 3), shingle_signature("a c b", 3));
}

TEST(Shingles, CountMatchesDistinctWindows) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    int n = static_cast<int>(rng() % 60);
    int k = 2 + static_cast<int>(rng() % 5);
    std::vector<std::string> ws;
    std::string text;
    for (int i = 0; i < n; ++i) {
      ws.push_back(std::string(1, static_cast<char>('a' + rng() % 4)));
      text += (i ? " " : "") + ws.back();
    }
    std::set<std::vector<std::string>> windows;
    for (int i = 0; i + k <= n; ++i) windows.insert({ws.begin() + i, ws.begin() + i + k});
    EXPECT_EQ(shingle_signature(text, k).size(), windows.size());
  }
}

TEST(Jaccard, Definitions) {
  ShingleSet a{1, 2, 3}, b{2, 3, 4}, c{7, 8};
  EXPECT_DOUBLE_EQ(jaccard(a, a), 1.0);
  EXPECT_DOUBLE_EQ(jaccard(a, c), 0.0);
  EXPECT_DOUBLE_EQ(jaccard(a, b), 0.5);
  EXPECT_DOUBLE_EQ(jaccard({}, {}), 0.0);
  EXPECT_DOUBLE_EQ(jaccard(a, b), jaccard(b, a));
}

TEST(FilterCorpus, EveryReasonAppearsAndAcceptedPagesMeetThresholds) {
  auto entries = testing::run_filter_corpus();
  ASSERT_EQ(entries.size(), 25u);
  std::set<FilterReason> seen;
  FilterThresholds t;
  for (const auto& e : entries) {
    EXPECT_EQ(to_string(e.verdict.reason), e.expected_reason) << e.file;
    EXPECT_EQ(e.words, e.expected_words) << e.file;
    seen.insert(e.verdict.reason);
    if (e.verdict.accepted) {
      EXPECT_GE(e.verdict.detail.at("words"), t.min_words) << e.file;
      EXPECT_LE(e.verdict.detail.at("link_ratio"), t.max_link_ratio) << e.file;
      EXPECT_LE(e.verdict.detail.at("list_ratio"), t.max_list_ratio) << e.file;
      EXPECT_LE(e.verdict.detail.at("table_ratio"), t.max_table_ratio) << e.file;
      EXPECT_LT(e.verdict.detail.at("max_jaccard"), t.dup_jaccard_max) << e.file;
    }
  }
  EXPECT_EQ(seen.size(), 6u);
}

}  // namespace
}  // namespace sitedetect
