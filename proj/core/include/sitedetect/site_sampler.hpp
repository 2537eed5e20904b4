#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sitedetect/page_fetcher.hpp"

namespace sitedetect {

enum class SiteLabel { kLlm, kHuman, kUnknown };

std::string_view to_string(SiteLabel label);
SiteLabel parse_site_label(std::string_view text);

struct SiteSpec {
  std::string site_id;
  std::string host;  // registrable domain, lowercase; "host:port" accepted for local fixtures
  SiteLabel label = SiteLabel::kUnknown;
  std::vector<std::string> cohort_tags;
  // Best search-result rank, carried through to the rank analysis.
  std::optional<int> search_rank;
  // Explicit page URLs; when present they replace sitemap/CDX discovery.
  std::vector<std::string> pages;

  void validate() const;
};

enum class CandidateSource { kSitemap, kCdx, kManifest };

std::string_view to_string(CandidateSource source);

struct PageCandidate {
  std::string url;
  CandidateSource source = CandidateSource::kSitemap;
  std::optional<std::string> capture_timestamp;  // present iff source == kCdx
  std::optional<std::string> mime;
  std::optional<int> status;

  friend bool operator==(const PageCandidate&, const PageCandidate&) = default;
};

struct SamplingConfig {
  int target_accepted = 15;
  int oversample_factor = 4;
  int max_attempts = 100;
  std::uint64_t seed = 0;
  std::string scheme = "https";
  std::string cdx_endpoint = "https://web.archive.org/cdx/search/cdx";
  int cdx_limit = 1000;
  // Fetch CDX-sourced candidates from their archived capture instead of live.
  bool fetch_cdx_from_archive = false;

  void validate() const;
};

struct SamplingPlan {
  SiteSpec site;
  std::vector<PageCandidate> ordered_candidates;
  int target_accepted = 15;
  int max_attempts = 100;
  std::uint64_t seed = 0;
};

inline constexpr int kMaxSitemapDepth = 3;
inline constexpr std::size_t kMaxSitemapUrls = 50'000;

// -- sitemap discovery -------------------------------------------------------

// Sitemap URLs from robots.txt `Sitemap:` lines (file order) plus
// /sitemap.xml when it answers 200 with XML. A robots.txt that cannot be
// fetched counts as absent; a host that does not resolve raises SiteUnreachable.
std::vector<std::string> discover_sitemaps(std::string_view host, Fetcher& fetcher, std::string_view scheme = "https");

struct SitemapContents {
  bool is_index = false;
  std::vector<PageCandidate> pages;          // <urlset> entries
  std::vector<std::string> child_sitemaps;   // <sitemapindex> entries, fetched by the caller
};

// Parses one sitemap document (gzip accepted). Relative <loc> values resolve
// against `base_url` when given. Throws SitemapParseError or RecursionLimit.
SitemapContents parse_sitemap(std::string_view bytes, int depth, std::string_view base_url = {});

// Fetches the given sitemaps and recursively their children, returning the
// canonical, de-duplicated page candidates in discovery order.
std::vector<PageCandidate> collect_sitemap_pages(std::span<const std::string> sitemap_urls, Fetcher& fetcher);

// -- CDX index ---------------------------------------------------------------

struct CdxFilters {
  std::optional<int> status = 200;
  std::optional<std::string> mime = "text/html";
  bool collapse_urlkey = true;
};

struct CdxResult {
  std::vector<PageCandidate> candidates;
  std::size_t skipped_lines = 0;   // unparseable
  std::size_t filtered_lines = 0;  // parseable but failing a requested filter
};

std::string cdx_query_string(std::string_view host, const CdxFilters& filters, int limit);

// Parses a CDX text response (Wayback space-separated fields or the Common
// Crawl "urlkey timestamp {json}" form). Keeps the first `limit` distinct
// url keys in response order, each at its newest capture.
CdxResult parse_cdx_response(std::string_view body, const CdxFilters& filters, int limit);

// Throws IndexUnavailable on a non-200 answer.
CdxResult query_cdx(std::string_view endpoint, std::string_view host, const CdxFilters& filters, int limit,
                    Fetcher& fetcher);

// -- sampling ----------------------------------------------------------------

// Partial Fisher-Yates over a mt19937_64 stream: uniform without replacement,
// output in draw order, identical for identical seeds.
std::vector<PageCandidate> sample_candidates(std::span<const PageCandidate> candidates, std::size_t n,
                                             std::uint64_t seed);

// Per-site seed derived from the run seed and the site id.
std::uint64_t site_seed(std::uint64_t run_seed, std::string_view site_id);

// Builds a plan from already-discovered pools. Sitemap candidates win outright
// when non-empty; otherwise CDX candidates are used, newest first.
SamplingPlan plan_from_pools(const SiteSpec& site, std::span<const PageCandidate> sitemap_pool,
                             std::span<const PageCandidate> cdx_pool, const SamplingConfig& config);

// Discovery plus planning. Throws NoCandidates when neither source yields pages.
SamplingPlan plan_site_sampling(const SiteSpec& site, const SamplingConfig& config, Fetcher& fetcher);

}  // namespace sitedetect
