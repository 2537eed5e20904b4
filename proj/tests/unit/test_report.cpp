#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "golden.hpp"
#include "oracles.hpp"
#include "sitedetect/errors.hpp"
#include "sitedetect/report.hpp"

using namespace sitedetect;
using namespace sitedetect::testing;

namespace {

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

SiteResult scored_site(const std::string& id, SiteLabel predicted, std::vector<double> scores,
                       std::optional<int> rank = {}) {
  SiteResult r;
  r.site_id = id;
  r.status = SiteStatus::kClassified;
  r.search_rank = rank;
  for (std::size_t i = 0; i < scores.size(); ++i) r.page_scores.push_back({id + "/" + std::to_string(i), scores[i], 100, "stub@v1"});
  r.verdict = SiteVerdict{id, predicted, predicted == SiteLabel::kLlm ? -1.0 : 1.0, {}};
  r.pages_accepted = static_cast<int>(scores.size());
  return r;
}

}  // namespace

TEST(Percent, HalfEvenAtTwoDecimals) {
  EXPECT_DOUBLE_EQ(percent_half_even(1019, 10232), 9.96);
  EXPECT_DOUBLE_EQ(percent_half_even(451, 10479), 4.30);
  EXPECT_DOUBLE_EQ(percent_half_even(358, 4938), 7.25);
  EXPECT_DOUBLE_EQ(percent_half_even(77, 764), 10.08);
  EXPECT_DOUBLE_EQ(percent_half_even(16, 1315), 1.22);
  EXPECT_DOUBLE_EQ(percent_half_even(0, 500), 0.0);
  EXPECT_DOUBLE_EQ(percent_half_even(0, 0), 0.0);
  EXPECT_DOUBLE_EQ(percent_half_even(7, 7), 100.0);
  // Exact ties: 1/800 = 0.125% -> 0.12, 3/800 = 0.375% -> 0.38, 5/800 = 0.625% -> 0.62.
  EXPECT_DOUBLE_EQ(percent_half_even(1, 800), 0.12);
  EXPECT_DOUBLE_EQ(percent_half_even(3, 800), 0.38);
  EXPECT_DOUBLE_EQ(percent_half_even(5, 800), 0.62);
  EXPECT_DOUBLE_EQ(percent_half_even(7, 800), 0.88);
}

TEST(Percent, MatchesRationalOracleOnRandomCounts) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20000; ++i) {
    std::int64_t total = 1 + static_cast<std::int64_t>(rng() % 100000);
    std::int64_t count = static_cast<std::int64_t>(rng() % (total + 1));
    // Oracle: hundredths = round-half-even(10000 * count / total) by long division.
    std::int64_t num = 10000 * count;
    std::int64_t q = num / total, r = num % total;
    if (2 * r > total || (2 * r == total && q % 2 == 1)) ++q;
    EXPECT_DOUBLE_EQ(percent_half_even(count, total), static_cast<double>(q) / 100.0) << count << "/" << total;
  }
}

TEST(Prevalence, HeadlineCounts) {
  auto log = verdict_log("w", 10232, 1019);
  PrevalenceReport rep = prevalence_report(log);
  EXPECT_EQ(rep.total_classified, 10232);
  EXPECT_EQ(rep.llm_count, 1019);
  EXPECT_DOUBLE_EQ(rep.llm_pct, 9.96);
  EXPECT_NO_THROW(check_report_consistency(rep));
}

TEST(Prevalence, CohortsFromTags) {
  auto log = verdict_log("cc", 10479, 451, {"crawl:all"});
  auto post = verdict_log("post", 4938, 358, {"era:post-chatgpt"});
  auto recent = verdict_log("recent", 764, 77, {"era:2024-2025"});
  auto pre = verdict_log("pre", 1315, 16, {"era:pre-chatgpt"});
  std::vector<SiteResult> all;
  for (auto* part : {&post, &recent, &pre}) all.insert(all.end(), part->begin(), part->end());

  PrevalenceReport cc = prevalence_report(log);
  EXPECT_DOUBLE_EQ(cc.llm_pct, 4.30);

  PrevalenceReport rep = prevalence_report(all, "era:");
  ASSERT_EQ(rep.cohorts.size(), 3u);
  std::map<std::string, CohortStats> by_tag;
  for (const auto& c : rep.cohorts) by_tag[c.tag] = c;
  EXPECT_DOUBLE_EQ(by_tag.at("era:post-chatgpt").llm_pct, 7.25);
  EXPECT_EQ(by_tag.at("era:post-chatgpt").total, 4938);
  EXPECT_DOUBLE_EQ(by_tag.at("era:2024-2025").llm_pct, 10.08);
  EXPECT_DOUBLE_EQ(by_tag.at("era:pre-chatgpt").llm_pct, 1.22);
  EXPECT_EQ(rep.total_classified, 4938 + 764 + 1315);
  std::int64_t sum_total = 0, sum_llm = 0;
  for (const auto& c : rep.cohorts) {
    sum_total += c.total;
    sum_llm += c.llm_count;
  }
  EXPECT_EQ(sum_total, rep.total_classified);
  EXPECT_EQ(sum_llm, rep.llm_count);
  EXPECT_NO_THROW(check_report_consistency(rep));
  EXPECT_TRUE(std::is_sorted(rep.cohorts.begin(), rep.cohorts.end(),
                             [](const CohortStats& a, const CohortStats& b) { return a.tag < b.tag; }));
}

TEST(Prevalence, ZeroLlm) {
  PrevalenceReport rep = prevalence_report(verdict_log("z", 37, 0));
  EXPECT_DOUBLE_EQ(rep.llm_pct, 0.0);
  EXPECT_EQ(rep.llm_count, 0);
  PrevalenceReport empty = prevalence_report(std::vector<SiteResult>{});
  EXPECT_EQ(empty.total_classified, 0);
  EXPECT_DOUBLE_EQ(empty.llm_pct, 0.0);
}

TEST(Prevalence, OnlyClassifiedSitesCount) {
  auto log = verdict_log("c", 10, 3);
  SiteResult skipped;
  skipped.site_id = "thin";
  skipped.status = SiteStatus::kInsufficientPages;
  SiteResult gone;
  gone.site_id = "gone";
  gone.status = SiteStatus::kUnreachable;
  log.push_back(skipped);
  log.push_back(gone);
  log[0].borderline = true;
  PrevalenceReport rep = prevalence_report(log);
  EXPECT_EQ(rep.total_classified, 10);
  EXPECT_EQ(rep.llm_count, 3);
  EXPECT_DOUBLE_EQ(rep.llm_pct, 30.0);
  EXPECT_EQ(rep.borderline_count, 1);
  EXPECT_EQ(rep.status_counts.at("classified"), 10);
  EXPECT_EQ(rep.status_counts.at("insufficient_pages"), 1);
  EXPECT_EQ(rep.status_counts.at("unreachable"), 1);
  auto j = report_to_json(rep);
  EXPECT_EQ(j["total_classified"], 10);
  EXPECT_DOUBLE_EQ(j["llm_pct"].get<double>(), 30.0);
}

TEST(Prevalence, ConsistencyCheckCatchesTampering) {
  PrevalenceReport rep = prevalence_report(verdict_log("t", 10232, 1019));
  rep.llm_pct = 9.84;
  EXPECT_THROW(check_report_consistency(rep), Error);
  rep = prevalence_report(verdict_log("t", 100, 5, {"k"}));
  rep.cohorts[0].llm_count = 6;
  EXPECT_THROW(check_report_consistency(rep), Error);
}

TEST(RankTest, SmallSeparatedGroups) {
  std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  RankTestResult r = rank_significance_test(a, b);
  EXPECT_DOUBLE_EQ(r.u, 0.0);
  EXPECT_TRUE(r.exact);
  EXPECT_NEAR(r.p_two_sided, 0.1, 1e-12);
  RankTestResult swapped = rank_significance_test(b, a);
  EXPECT_DOUBLE_EQ(swapped.u, 9.0);
  EXPECT_NEAR(swapped.p_two_sided, r.p_two_sided, 1e-12);
}

TEST(RankTest, IdenticalListsGiveCentralU) {
  std::vector<double> a{3, 8, 1, 20, 7, 7};
  RankTestResult r = rank_significance_test(a, a);
  EXPECT_DOUBLE_EQ(r.u, 18.0);
  EXPECT_NEAR(r.p_two_sided, 1.0, 1e-12);
  RankTestResult n = rank_significance_test(a, a, RankTestMethod::kNormal);
  EXPECT_NEAR(n.p_two_sided, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(n.z, 0.0);
}

TEST(RankTest, EmptyGroupThrows) {
  std::vector<double> a{1, 2}, none;
  try {
    rank_significance_test(a, none);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kEmptyGroup);
  }
  EXPECT_THROW(rank_significance_test(none, a), Error);
}

TEST(RankTest, ExactMatchesEnumerationForAllSmallSizes) {
  std::mt19937_64 rng(17);
  for (std::size_t n1 = 1; n1 <= 6; ++n1) {
    for (std::size_t n2 = 1; n2 <= 6; ++n2) {
      for (int trial = 0; trial < 6; ++trial) {
        std::uniform_int_distribution<int> value(1, trial % 2 == 0 ? 6 : 1000);  // ties on even trials
        std::vector<double> a(n1), b(n2);
        for (auto& v : a) v = value(rng);
        for (auto& v : b) v = value(rng);
        auto oracle = enumerate_rank_test(a, b);
        auto r = rank_significance_test(a, b, RankTestMethod::kExact);
        EXPECT_DOUBLE_EQ(r.u, oracle.u) << n1 << "x" << n2;
        EXPECT_NEAR(r.p_two_sided, oracle.p_two_sided, 1e-12) << n1 << "x" << n2 << " trial " << trial;
        auto s = rank_significance_test(b, a, RankTestMethod::kExact);
        EXPECT_DOUBLE_EQ(s.u, static_cast<double>(n1 * n2) - r.u);
        EXPECT_NEAR(s.p_two_sided, r.p_two_sided, 1e-12);
      }
    }
  }
}

TEST(RankTest, NormalApproximationAgainstHandComputation) {
  // No ties: n1 = 4, n2 = 5, ranks of the first group {1, 2, 4, 7} -> R1 = 14, U = 4.
  std::vector<double> a{10, 20, 40, 70}, b{30, 50, 60, 80, 90};
  RankTestResult r = rank_significance_test(a, b, RankTestMethod::kNormal);
  EXPECT_DOUBLE_EQ(r.u, 4.0);
  const double mu = 10.0, sigma = std::sqrt(4.0 * 5.0 * 10.0 / 12.0);
  const double z = -(std::abs(4.0 - mu) - 0.5) / sigma;
  EXPECT_NEAR(r.z, z, 1e-12);
  EXPECT_NEAR(r.p_two_sided, std::erfc(std::abs(z) / std::sqrt(2.0)), 1e-12);
  EXPECT_FALSE(r.exact);
}

TEST(RankTest, AutoSwitchesToNormalForLargeGroups) {
  std::vector<double> a(40), b(40);
  std::iota(a.begin(), a.end(), 1.0);
  std::iota(b.begin(), b.end(), 20.0);
  EXPECT_FALSE(rank_significance_test(a, b).exact);
  std::vector<double> c(5, 1.0), d(5, 2.0);
  EXPECT_TRUE(rank_significance_test(c, d).exact);
}

TEST(RankTest, MonteCarloCalibration) {
  // 10,000 null trials: the rejection rate at 0.05 should sit within about
  // four standard errors (0.9 points) of the nominal level.
  int rejected = 0;
  const int trials = 10000;
  for (int trial = 0; trial < trials; ++trial) {
    std::mt19937_64 rng(900000 + static_cast<std::uint64_t>(trial));
    std::uniform_int_distribution<int> rank(1, trial % 2 == 0 ? 50 : 1000);
    std::vector<double> a(200), b(200);
    for (auto& v : a) v = rank(rng);
    for (auto& v : b) v = rank(rng);
    auto r = rank_significance_test(a, b);
    ASSERT_GE(r.p_two_sided, 0.0);
    ASSERT_LE(r.p_two_sided, 1.0);
    if (r.p_two_sided <= 0.05) ++rejected;
  }
  double rate = static_cast<double>(rejected) / trials;
  EXPECT_GT(rate, 0.041);
  EXPECT_LT(rate, 0.059);
}

TEST(RankTest, GroupsUseBestRankAndPredictedLabel) {
  std::vector<SiteResult> results{scored_site("a", SiteLabel::kLlm, {0.7}, 3),
                                  scored_site("b", SiteLabel::kHuman, {0.9}, 1),
                                  scored_site("c", SiteLabel::kHuman, {0.9}),
                                  scored_site("d", SiteLabel::kLlm, {0.7}, 9)};
  RankGroups g = rank_groups(results);
  EXPECT_EQ(g.llm, (std::vector<double>{3, 9}));
  EXPECT_EQ(g.human, (std::vector<double>{1}));
}

TEST(Cdf, TwoPointSite) {
  std::vector<double> s{0.9, 0.7};
  auto rows = empirical_cdf(s);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_DOUBLE_EQ(rows[0].score, 0.7);
  EXPECT_DOUBLE_EQ(rows[0].fraction, 0.5);
  EXPECT_DOUBLE_EQ(rows[1].score, 0.9);
  EXPECT_DOUBLE_EQ(rows[1].fraction, 1.0);
}

TEST(Cdf, RandomScoresEndAtOneAndAreMonotone) {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.4, 1.4);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> s(15);
    for (auto& v : s) v = u(rng);
    auto rows = empirical_cdf(s);
    ASSERT_EQ(rows.size(), 15u);
    EXPECT_EQ(rows.back().fraction, 1.0);
    for (std::size_t i = 1; i < rows.size(); ++i) {
      EXPECT_LE(rows[i - 1].score, rows[i].score);
      EXPECT_LT(rows[i - 1].fraction, rows[i].fraction);
    }
  }
}

TEST(Cdf, ExportWritesHeaderOnlyForEmptyGroups) {
  TempDir dir;
  std::vector<SiteResult> results{scored_site("one", SiteLabel::kHuman, {0.7, 0.9})};
  auto files = cdf_export(results, CdfGrouping::kLabel, dir.path());
  ASSERT_EQ(files.size(), 2u);
  auto llm = lines_of(dir.path() / "cdf_label_llm.csv");
  auto human = lines_of(dir.path() / "cdf_label_human.csv");
  EXPECT_EQ(llm, std::vector<std::string>{"score,cumulative_fraction"});
  ASSERT_EQ(human.size(), 3u);
  EXPECT_EQ(human[1], "0.69999999999999996,0.5");
  EXPECT_EQ(human[2], "0.90000000000000002,1");
}

TEST(Cdf, GroupsBySiteAndFallsBackToManifestLabel) {
  SiteResult unclassified;
  unclassified.site_id = "x/y";
  unclassified.status = SiteStatus::kInsufficientPages;
  unclassified.truth_label = SiteLabel::kLlm;
  unclassified.page_scores = {{"p", 0.5, 10, "stub@v1"}};
  std::vector<SiteResult> results{scored_site("h", SiteLabel::kHuman, {0.9}), unclassified};
  auto by_label = cdf_groups(results, CdfGrouping::kLabel);
  EXPECT_EQ(by_label.at("llm"), std::vector<double>{0.5});
  EXPECT_EQ(by_label.at("human"), std::vector<double>{0.9});
  auto by_site = cdf_groups(results, CdfGrouping::kSite);
  EXPECT_EQ(by_site.size(), 2u);
  TempDir dir;
  auto files = cdf_export(results, CdfGrouping::kSite, dir.path());
  EXPECT_TRUE(std::filesystem::exists(dir.path() / "cdf_site_x_y.csv"));
  EXPECT_EQ(files.size(), 2u);
}
