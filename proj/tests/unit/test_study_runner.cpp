#include <gtest/gtest.h>

#include <atomic>
#include <fstream>
#include <random>

#include "fixture_sites.hpp"
#include "fixture_web.hpp"
#include "golden.hpp"
#include "sitedetect/errors.hpp"
#include "sitedetect/study_runner.hpp"
#include "sitedetect/transport.hpp"
#include "synthetic.hpp"

using namespace sitedetect;
using namespace sitedetect::testing;
using json = nlohmann::json;

namespace {

std::unique_ptr<Fetcher> fixture_fetcher(const RunConfig& config) {
  return std::make_unique<Fetcher>(config.fetch, make_http_transport());
}

std::vector<std::string> lines_of(const std::filesystem::path& p) {
  std::vector<std::string> out;
  std::ifstream in(p);
  std::string line;
  while (std::getline(in, line)) out.push_back(line);
  return out;
}

// site_id -> sites.jsonl line with the fields that must not depend on scheduling.
std::map<std::string, json> verdict_lines(const std::filesystem::path& sites_path) {
  std::map<std::string, json> out;
  for (const auto& line : lines_of(sites_path)) {
    json j = json::parse(line);
    out[j.at("site_id").get<std::string>()] = j;
  }
  return out;
}

std::map<std::string, json> result_map(const std::vector<SiteResult>& results) {
  std::map<std::string, json> out;
  for (const auto& r : results) out[r.site_id] = site_result_to_json(r);
  return out;
}

class CountingScorer : public Scorer {
 public:
  ScoreBatch score_texts(std::span<const std::string> texts) override {
    ++calls;
    return stub.score_texts(texts);
  }
  bool healthy() override { return true; }
  StubScorer stub;
  std::atomic<int> calls{0};
};

}  // namespace

TEST(SiteStatus, NamesRoundTrip) {
  for (auto s : {SiteStatus::kClassified, SiteStatus::kScored, SiteStatus::kInsufficientPages,
                 SiteStatus::kUnreachable, SiteStatus::kFailed}) {
    EXPECT_EQ(parse_site_status(to_string(s)), s);
  }
  EXPECT_EQ(to_string(SiteStatus::kInsufficientPages), "insufficient_pages");
  EXPECT_THROW(parse_site_status("done"), Error);
}

TEST(SiteResult, VerdictPresentExactlyWhenClassified) {
  SiteResult r;
  r.status = SiteStatus::kClassified;
  r.pages_accepted = 15;
  EXPECT_THROW(r.validate(15), Error);
  r.verdict = SiteVerdict{};
  EXPECT_NO_THROW(r.validate(15));
  r.pages_accepted = 14;
  EXPECT_THROW(r.validate(15), Error);
  r.status = SiteStatus::kInsufficientPages;
  EXPECT_THROW(r.validate(15), Error);
  r.verdict.reset();
  EXPECT_NO_THROW(r.validate(15));
}

TEST(SiteResult, JsonRoundTrip) {
  SiteResult r;
  r.site_id = "s";
  r.status = SiteStatus::kClassified;
  r.truth_label = SiteLabel::kHuman;
  r.cohort_tags = {"a", "b"};
  r.search_rank = 4;
  std::vector<PageScore> scores;
  for (int i = 0; i < 15; ++i) scores.push_back({"u" + std::to_string(i), 0.8 + 0.01 * i, 100 + i, "stub@v1"});
  r.features = make_site_features("s", scores, 15);
  r.verdict = SiteVerdict{"s", SiteLabel::kLlm, -0.3, *r.features};
  r.borderline = false;
  r.pages_sampled = 20;
  r.pages_accepted = 15;
  r.pages_rejected = 5;
  r.rejections = {{"short_text", 3}, {"duplicate", 2}};
  r.near_empty_pages = 1;
  r.page_scores = scores;
  json j = site_result_to_json(r);
  SiteResult back = site_result_from_json(j);
  EXPECT_EQ(site_result_to_json(back), j);
  EXPECT_EQ(back.verdict->label, SiteLabel::kLlm);
  EXPECT_EQ(back.features->deciles, r.features->deciles);
  EXPECT_EQ(back.rejections, r.rejections);

  PageRecord p{"s", "http://x/1", true, "ok", {{"words", 300}}, 0.9, 120};
  EXPECT_EQ(page_record_to_json(page_record_from_json(page_record_to_json(p))), page_record_to_json(p));
}

TEST(RunSite, CleanProseSiteIsClassified) {
  FixtureWeb web;
  serve_prose_site(web, 1, 30, Band::kHigh, 7);
  RunConfig config = fixture_run_config();
  auto fetcher = fixture_fetcher(config);
  StubScorer scorer;
  RunContext ctx{*fetcher, scorer, &stub_model()};
  SiteSpec site{"prose", web.host(1), SiteLabel::kHuman, {}, 1, {}};
  std::vector<PageRecord> records;
  SiteResult r = run_site(site, config, ctx, [&](const PageRecord& p) { records.push_back(p); });
  EXPECT_EQ(r.status, SiteStatus::kClassified) << r.error;
  EXPECT_GE(r.pages_accepted, 15);
  EXPECT_EQ(r.pages_accepted, 15);
  EXPECT_EQ(r.pages_sampled, 15);
  ASSERT_TRUE(r.verdict);
  EXPECT_EQ(r.verdict->label, SiteLabel::kHuman);
  EXPECT_EQ(r.page_scores.size(), 15u);
  ASSERT_EQ(records.size(), 15u);
  for (const auto& p : records) {
    EXPECT_TRUE(p.accepted);
    EXPECT_EQ(p.reason, "ok");
    EXPECT_TRUE(p.score.has_value());
    EXPECT_GT(p.measurements.at("total_chars"), 0.0);
  }
  EXPECT_NO_THROW(r.validate(config.min_pages));
}

TEST(RunSite, LowBandSiteIsLlm) {
  FixtureWeb web;
  serve_prose_site(web, 1, 20, Band::kLow, 8);
  RunConfig config = fixture_run_config();
  auto fetcher = fixture_fetcher(config);
  StubScorer scorer;
  RunContext ctx{*fetcher, scorer, &stub_model()};
  SiteResult r = run_site(SiteSpec{"low", web.host(1), SiteLabel::kLlm, {}, {}, {}}, config, ctx);
  ASSERT_EQ(r.status, SiteStatus::kClassified) << r.error;
  EXPECT_EQ(r.verdict->label, SiteLabel::kLlm);
  EXPECT_LT(r.verdict->margin, 0.0);
}

TEST(RunSite, WithoutModelSiteIsScoredOnly) {
  FixtureWeb web;
  serve_prose_site(web, 1, 16, Band::kHigh, 9);
  RunConfig config = fixture_run_config();
  auto fetcher = fixture_fetcher(config);
  StubScorer scorer;
  RunContext ctx{*fetcher, scorer, nullptr};
  SiteResult r = run_site(SiteSpec{"nomodel", web.host(1), SiteLabel::kUnknown, {}, {}, {}}, config, ctx);
  EXPECT_EQ(r.status, SiteStatus::kScored);
  EXPECT_TRUE(r.features.has_value());
  EXPECT_FALSE(r.verdict.has_value());
}

TEST(RunSite, LinkListingSiteHasInsufficientPages) {
  FixtureWeb web;
  serve_link_site(web, 1, 10, 11);
  RunConfig config = fixture_run_config();
  auto fetcher = fixture_fetcher(config);
  CountingScorer scorer;
  RunContext ctx{*fetcher, scorer, &stub_model()};
  std::vector<PageRecord> records;
  SiteResult r = run_site(SiteSpec{"links", web.host(1), SiteLabel::kUnknown, {}, {}, {}}, config, ctx,
                          [&](const PageRecord& p) { records.push_back(p); });
  EXPECT_EQ(r.status, SiteStatus::kInsufficientPages);
  EXPECT_EQ(r.rejections, (std::map<std::string, int>{{"link_heavy", 10}}));
  EXPECT_EQ(r.pages_sampled, 10);
  EXPECT_EQ(r.pages_rejected, 10);
  EXPECT_EQ(r.pages_accepted, 0);
  EXPECT_FALSE(r.verdict.has_value());
  EXPECT_EQ(records.size(), 10u);
  EXPECT_EQ(scorer.calls.load(), 0);
}

TEST(RunSite, UnreachableHost) {
  RunConfig config = fixture_run_config();
  auto fetcher = fixture_fetcher(config);
  StubScorer scorer;
  RunContext ctx{*fetcher, scorer, &stub_model()};
  SiteResult r = run_site(SiteSpec{"gone", "no-such-site.invalid", SiteLabel::kUnknown, {}, {}, {}}, config, ctx);
  EXPECT_EQ(r.status, SiteStatus::kUnreachable);
  EXPECT_FALSE(r.error.empty());
}

TEST(RunSite, ManifestPagesOnDeadPortAreUnreachable) {
  FixtureWeb web;
  RunConfig config = fixture_run_config();
  auto fetcher = fixture_fetcher(config);
  StubScorer scorer;
  RunContext ctx{*fetcher, scorer, &stub_model()};
  SiteSpec s{"dead", "127.0.0.1:1", SiteLabel::kUnknown, {}, {}, {"http://127.0.0.1:1/a", "http://127.0.0.1:1/b"}};
  SiteResult r = run_site(s, config, ctx);
  EXPECT_EQ(r.status, SiteStatus::kUnreachable);
  EXPECT_EQ(r.rejections.at("fetch_error"), 2);
}

TEST(RunSite, HttpErrorsAndNonHtmlAreRecorded) {
  FixtureWeb web;
  std::mt19937_64 rng(3);
  std::vector<std::string> pages;
  for (int i = 0; i < 3; ++i) {
    web.put_html(web.host(), "/ok" + std::to_string(i), prose_page_html(rng, Band::kHigh, "t"));
    pages.push_back(web.origin() + "/ok" + std::to_string(i));
  }
  web.put(web.host(), "/pdf", CannedResponse{200, "application/pdf", "%PDF-1.4", {}, {}});
  pages.push_back(web.origin() + "/pdf");
  pages.push_back(web.origin() + "/missing");
  RunConfig config = fixture_run_config();
  config.min_pages = 3;
  config.sampling.target_accepted = 5;
  config.sampling.max_attempts = 10;
  auto fetcher = fixture_fetcher(config);
  StubScorer scorer;
  RunContext ctx{*fetcher, scorer, nullptr};
  SiteResult r = run_site(SiteSpec{"mixed", web.host(), SiteLabel::kUnknown, {}, {}, pages}, config, ctx);
  EXPECT_EQ(r.status, SiteStatus::kScored);
  EXPECT_EQ(r.pages_accepted, 3);
  EXPECT_EQ(r.rejections.at("not_html"), 1);
  EXPECT_EQ(r.rejections.at("http_error"), 1);
}

TEST(RunSite, ScorerFailureMarksSiteFailed) {
  class BrokenScorer : public Scorer {
   public:
    ScoreBatch score_texts(std::span<const std::string>) override {
      throw Error(ErrorCode::kScorerUnavailable, "down");
    }
    bool healthy() override { return false; }
  };
  FixtureWeb web;
  serve_prose_site(web, 1, 15, Band::kHigh, 12);
  RunConfig config = fixture_run_config();
  auto fetcher = fixture_fetcher(config);
  BrokenScorer scorer;
  RunContext ctx{*fetcher, scorer, &stub_model()};
  SiteResult r = run_site(SiteSpec{"s", web.host(1), SiteLabel::kUnknown, {}, {}, {}}, config, ctx);
  EXPECT_EQ(r.status, SiteStatus::kFailed);
  EXPECT_NE(r.error.find("down"), std::string::npos);
}

TEST(RunBatch, EmptyManifestGivesEmptyResults) {
  TempDir dir;
  RunConfig config = fixture_run_config();
  auto fetcher = fixture_fetcher(config);
  StubScorer scorer;
  RunContext ctx{*fetcher, scorer, &stub_model()};
  RunManifest m;
  m.run_id = "empty";
  m.config = config;
  EXPECT_TRUE(run_batch(m, dir.path(), ctx).empty());
  EXPECT_TRUE(std::filesystem::exists(RunFiles{dir.path()}.manifest()));
}

TEST(RunBatch, RefusesParallelismBelowOneAndForeignRunDirectory) {
  TempDir dir;
  RunConfig config = fixture_run_config();
  auto fetcher = fixture_fetcher(config);
  StubScorer scorer;
  RunContext ctx{*fetcher, scorer, nullptr};
  RunManifest m;
  m.run_id = "a";
  m.config = config;
  EXPECT_THROW(run_batch(m, dir.path(), ctx, BatchOptions{0, {}}), Error);
  run_batch(m, dir.path(), ctx);
  m.run_id = "b";
  try {
    run_batch(m, dir.path(), ctx);
    FAIL() << "expected a config error";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfigError);
  }
}

TEST(RunBatch, ParallelismDoesNotChangeVerdicts) {
  FixtureWeb web;
  RunManifest m = fixture_manifest(web, "det", 10);
  StubScorer scorer;
  TempDir one, eight;
  std::vector<SiteResult> r1, r8;
  {
    auto fetcher = fixture_fetcher(m.config);
    RunContext ctx{*fetcher, scorer, &stub_model()};
    r1 = run_batch(m, one.path(), ctx, BatchOptions{1, {}});
  }
  {
    auto fetcher = fixture_fetcher(m.config);
    RunContext ctx{*fetcher, scorer, &stub_model()};
    r8 = run_batch(m, eight.path(), ctx, BatchOptions{8, {}});
  }
  ASSERT_EQ(r1.size(), 10u);
  ASSERT_EQ(r8.size(), 10u);
  for (std::size_t i = 0; i < r1.size(); ++i) {
    EXPECT_EQ(r1[i].site_id, m.sites[i].site_id);
    EXPECT_EQ(r1[i].status, SiteStatus::kClassified) << r1[i].site_id << " " << r1[i].error;
    EXPECT_EQ(r1[i].verdict->label, m.sites[i].label) << r1[i].site_id;
  }
  EXPECT_EQ(verdict_lines(RunFiles{one.path()}.sites()), verdict_lines(RunFiles{eight.path()}.sites()));
  EXPECT_EQ(result_map(r1), result_map(r8));
}

TEST(RunBatch, ResumeAfterInterruptionMatchesUninterruptedRun) {
  FixtureWeb web;
  RunManifest m = fixture_manifest(web, "resume", 10);
  StubScorer scorer;
  TempDir full, cut;
  std::vector<SiteResult> reference;
  {
    auto fetcher = fixture_fetcher(m.config);
    RunContext ctx{*fetcher, scorer, &stub_model()};
    reference = run_batch(m, full.path(), ctx);
  }
  RunFiles files{cut.path()};
  {
    auto fetcher = fixture_fetcher(m.config);
    RunContext ctx{*fetcher, scorer, &stub_model()};
    auto partial = run_batch(m, cut.path(), ctx, BatchOptions{1, 5});
    EXPECT_EQ(partial.size(), 5u);
  }
  ASSERT_EQ(lines_of(files.results()).size(), 5u);
  // An append cut short by the kill, plus page records of a site that never committed.
  {
    std::ofstream(files.results(), std::ios::app) << R"({"site_id": "fixture-6", "status": "classi)";
    std::ofstream(files.pages(), std::ios::app)
        << page_record_to_json(PageRecord{"fixture-6", "http://x/orphan", false, "short_text", {}, {}, {}}).dump()
        << '\n';
  }
  web.clear_requests();
  std::vector<SiteResult> resumed;
  {
    auto fetcher = fixture_fetcher(m.config);
    RunContext ctx{*fetcher, scorer, &stub_model()};
    resumed = run_batch(m, cut.path(), ctx, BatchOptions{3, {}});
  }
  ASSERT_EQ(resumed.size(), 10u);
  EXPECT_EQ(result_map(resumed), result_map(reference));
  for (const auto& req : web.requests()) {
    for (int i = 1; i <= 5; ++i) EXPECT_NE(req.host, web.host(i)) << "site " << i << " was re-fetched";
  }
  EXPECT_EQ(lines_of(files.results()).size(), 10u);
  EXPECT_EQ(verdict_lines(files.sites()), verdict_lines(RunFiles{full.path()}.sites()));
  for (const auto& line : lines_of(files.pages())) EXPECT_EQ(line.find("orphan"), std::string::npos);
  EXPECT_EQ(lines_of(files.pages()).size(), lines_of(RunFiles{full.path()}.pages()).size());
  EXPECT_EQ(read_results_log(files.results()).size(), 10u);
}

TEST(RunBatch, CompletedRunIsNotRepeated) {
  FixtureWeb web;
  RunManifest m = fixture_manifest(web, "again", 2);
  StubScorer scorer;
  TempDir dir;
  auto fetcher = fixture_fetcher(m.config);
  RunContext ctx{*fetcher, scorer, &stub_model()};
  auto first = run_batch(m, dir.path(), ctx);
  web.clear_requests();
  auto second = run_batch(m, dir.path(), ctx);
  EXPECT_EQ(web.request_count(), 0u);
  EXPECT_EQ(result_map(first), result_map(second));
}

TEST(RunBatch, SiteFailuresDoNotAbortTheBatch) {
  FixtureWeb web;
  RunManifest m = fixture_manifest(web, "mixed", 2);
  m.sites.push_back(SiteSpec{"gone", "no-such-site.invalid", SiteLabel::kUnknown, {}, {}, {}});
  StubScorer scorer;
  TempDir dir;
  auto fetcher = fixture_fetcher(m.config);
  RunContext ctx{*fetcher, scorer, &stub_model()};
  auto results = run_batch(m, dir.path(), ctx, BatchOptions{2, {}});
  ASSERT_EQ(results.size(), 3u);
  EXPECT_EQ(results[0].status, SiteStatus::kClassified);
  EXPECT_EQ(results[1].status, SiteStatus::kClassified);
  EXPECT_EQ(results[2].status, SiteStatus::kUnreachable);
}

TEST(ResultsLog, TornFinalLineIsIgnored) {
  TempDir dir;
  SiteResult r;
  r.site_id = "a";
  r.status = SiteStatus::kInsufficientPages;
  auto path = dir.path() / "results.jsonl";
  std::ofstream(path) << site_result_to_json(r).dump() << "\n{\"site_id\": \"b\", \"sta";
  auto log = read_results_log(path);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].site_id, "a");
  EXPECT_TRUE(read_results_log(dir.path() / "absent.jsonl").empty());
}
