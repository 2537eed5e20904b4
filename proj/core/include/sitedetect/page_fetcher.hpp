#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include "sitedetect/robots.hpp"
#include "sitedetect/transport.hpp"

namespace sitedetect {

struct FetchPolicy {
  std::chrono::milliseconds per_host_min_delay{2'000};
  std::chrono::milliseconds timeout{30'000};
  int max_redirects = 5;
  std::size_t max_body_bytes = 5 * 1024 * 1024;
  std::string user_agent = "sitedetect/0.3 (+research crawler; prose-sampling site classifier)";
  bool respect_robots = true;

  void validate() const;
};

struct FetchedPage {
  std::string request_url;
  std::string final_url;
  int status = 0;
  std::string content_type;
  std::string body;
  std::chrono::system_clock::time_point fetched_at{};
  bool from_cache = false;
  bool truncated = false;
  // 14-digit capture timestamp when the page came from an archive snapshot.
  std::optional<std::string> capture_timestamp;

  bool is_html() const;
};

// True for exactly 14 ASCII digits.
bool valid_capture_timestamp(std::string_view ts);

// On-disk cache keyed by (canonical URL, optional capture timestamp). Entries
// live at {root}/{h[0:2]}/{h[2:4]}/{h}.bin with h the SHA-256 hex of the key.
// Stores are write-then-rename, so concurrent writers leave one whole entry.
class PageCache {
 public:
  explicit PageCache(std::filesystem::path root);

  static std::string key_hex(std::string_view url, const std::optional<std::string>& ts);
  std::filesystem::path entry_path(std::string_view url, const std::optional<std::string>& ts) const;

  std::optional<FetchedPage> lookup(std::string_view url, const std::optional<std::string>& ts) const;
  void store(const FetchedPage& page) const;

  const std::filesystem::path& root() const { return root_; }

 private:
  std::filesystem::path root_;
};

// Extension point for a browser-backed renderer. The shipped fetcher only
// performs static HTTP fetches; a renderer receives the static response and
// may return a rendered replacement.
class Renderer {
 public:
  virtual ~Renderer() = default;
  virtual FetchedPage render(FetchedPage page) = 0;
};

struct FetcherOptions {
  std::string archive_base = "https://web.archive.org";
  std::optional<std::filesystem::path> cache_dir;
  std::shared_ptr<Renderer> renderer;
};

// Polite fetcher shared across worker threads. Request start times to one host
// are spaced by at least FetchPolicy::per_host_min_delay.
class Fetcher {
 public:
  Fetcher(FetchPolicy policy, std::shared_ptr<Transport> transport, FetcherOptions options = {});

  FetchedPage fetch(std::string_view url);
  FetchedPage fetch_archived(std::string_view url, std::string_view ts);
  // Polite, uncached fetch that skips the robots check; used for robots.txt,
  // sitemaps and index queries.
  FetchedPage fetch_resource(std::string_view url);

  // Snapshot URL for an archived capture, `id_` requesting the raw bytes.
  std::string snapshot_url(std::string_view url, std::string_view ts) const;

  const FetchPolicy& policy() const { return policy_; }
  const PageCache* cache() const { return cache_ ? &*cache_ : nullptr; }

 private:
  HttpResponse polite_get(const Url& url);
  FetchedPage follow(const Url& start, bool check_robots);
  bool robots_allow(const Url& url);

  FetchPolicy policy_;
  std::shared_ptr<Transport> transport_;
  FetcherOptions options_;
  std::optional<PageCache> cache_;

  struct HostGate {
    std::mutex turn;
    std::optional<std::chrono::steady_clock::time_point> last_finish;
  };
  HostGate& gate_for(const std::string& host);
  std::mutex clock_mutex_;
  std::map<std::string, std::unique_ptr<HostGate>> gates_;

  std::mutex robots_mutex_;
  std::map<std::string, std::shared_ptr<const RobotsTxt>> robots_;
};

}  // namespace sitedetect
