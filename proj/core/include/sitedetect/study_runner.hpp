#pragma once

#include <atomic>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitedetect/page_fetcher.hpp"
#include "sitedetect/page_filter.hpp"
#include "sitedetect/run_config.hpp"
#include "sitedetect/score_client.hpp"
#include "sitedetect/site_classifier.hpp"

namespace sitedetect {

// kScored: features were computed but no model was supplied.
// kFailed: an unexpected error (for example the scorer gave up) stopped the site.
enum class SiteStatus { kClassified, kScored, kInsufficientPages, kUnreachable, kFailed };

std::string_view to_string(SiteStatus status);
SiteStatus parse_site_status(std::string_view text);

inline constexpr std::size_t kNearEmptyChars = 50;

// One page attempt of a site, as written to pages.jsonl.
struct PageRecord {
  std::string site_id;
  std::string url;
  bool accepted = false;
  std::string reason;  // a FilterReason name, or fetch_error / http_error / not_html / encoding_error
  std::map<std::string, double> measurements;
  std::optional<double> score;
  std::optional<int> token_count;
};

struct SiteResult {
  std::string site_id;
  SiteStatus status = SiteStatus::kUnreachable;
  SiteLabel truth_label = SiteLabel::kUnknown;
  std::vector<std::string> cohort_tags;
  std::optional<int> search_rank;
  std::optional<SiteFeatures> features;
  std::optional<SiteVerdict> verdict;
  bool borderline = false;  // |margin| below the configured band
  int pages_sampled = 0;
  int pages_accepted = 0;
  int pages_rejected = 0;
  std::map<std::string, int> rejections;
  // HTML pages answering 200 whose extracted text is nearly empty; a high
  // count suggests content rendered by scripts.
  int near_empty_pages = 0;
  std::vector<PageScore> page_scores;
  std::string error;

  void validate(int min_pages) const;
};

nlohmann::json page_record_to_json(const PageRecord& r);
PageRecord page_record_from_json(const nlohmann::json& j);
nlohmann::json site_result_to_json(const SiteResult& r);
SiteResult site_result_from_json(const nlohmann::json& j);
nlohmann::json features_to_json(const SiteFeatures& f);
SiteFeatures features_from_json(const nlohmann::json& j);
// The sites.jsonl line for a result: features, truth label and verdict.
nlohmann::json site_line(const SiteResult& r);

// Shared services for a run.
struct RunContext {
  Fetcher& fetcher;
  Scorer& scorer;
  const LinearModel* model = nullptr;
};

// Plan, fetch, extract and filter until target_accepted pages pass or the
// plan is exhausted; then score, build features and classify. Page records
// are handed to `page_sink` in attempt order.
SiteResult run_site(const SiteSpec& site, const RunConfig& config, RunContext& context,
                    const std::function<void(const PageRecord&)>& page_sink = {});

struct BatchOptions {
  int parallelism = 1;
  // Stop picking up new sites after this many complete in this invocation;
  // simulates an interrupted run.
  std::optional<std::size_t> stop_after;
};

// Run directory layout.
struct RunFiles {
  std::filesystem::path dir;
  std::filesystem::path manifest() const { return dir / "manifest.json"; }
  std::filesystem::path pages() const { return dir / "pages.jsonl"; }
  std::filesystem::path sites() const { return dir / "sites.jsonl"; }
  std::filesystem::path results() const { return dir / "results.jsonl"; }
  std::filesystem::path report() const { return dir / "report.json"; }
};

// Reads the committed results of a run directory. A torn final line (an
// interrupted append) is ignored.
std::vector<SiteResult> read_results_log(const std::filesystem::path& results_path);

// Runs every site of the manifest that has no committed result yet in
// `out_dir`, with at most `parallelism` site workers. Per site, the page
// records and the sites.jsonl line are appended before the results.jsonl
// line, which commits the site. On resume, pages.jsonl and sites.jsonl are
// first compacted to committed sites. Returns all results in manifest order.
std::vector<SiteResult> run_batch(const RunManifest& manifest, const std::filesystem::path& out_dir,
                                  RunContext& context, const BatchOptions& options = {});

}  // namespace sitedetect
