#include "sitedetect/page_fetcher.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <atomic>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>
#include <thread>

#include "sitedetect/errors.hpp"

namespace sitedetect {
namespace fs = std::filesystem;
using json = nlohmann::json;

void FetchPolicy::validate() const {
  if (per_host_min_delay.count() < 0) throw Error(ErrorCode::kInvalidArgument, "per_host_min_delay < 0");
  if (max_redirects < 0) throw Error(ErrorCode::kInvalidArgument, "max_redirects < 0");
  if (timeout.count() <= 0) throw Error(ErrorCode::kInvalidArgument, "timeout must be positive");
  if (max_body_bytes == 0) throw Error(ErrorCode::kInvalidArgument, "max_body_bytes must be positive");
}

bool FetchedPage::is_html() const {
  if (content_type.empty()) return true;
  return content_type.find("html") != std::string::npos;
}

bool valid_capture_timestamp(std::string_view ts) {
  if (ts.size() != 14) return false;
  for (char c : ts) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// PageCache

namespace {

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::int64_t to_epoch_ms(std::chrono::system_clock::time_point t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

}  // namespace

PageCache::PageCache(fs::path root) : root_(std::move(root)) {}

std::string PageCache::key_hex(std::string_view url, const std::optional<std::string>& ts) {
  std::string canonical = canonicalize_url(url).value_or(std::string(url));
  std::string key = canonical;
  key += '\n';
  if (ts) key += *ts;
  return sha256_hex(key);
}

fs::path PageCache::entry_path(std::string_view url, const std::optional<std::string>& ts) const {
  std::string h = key_hex(url, ts);
  return root_ / h.substr(0, 2) / h.substr(2, 2) / (h + ".bin");
}

std::optional<FetchedPage> PageCache::lookup(std::string_view url, const std::optional<std::string>& ts) const {
  fs::path path = entry_path(url, ts);
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;

  auto evict = [&]() -> std::optional<FetchedPage> {
    in.close();
    std::error_code ec;
    fs::remove(path, ec);
    return std::nullopt;
  };

  std::string header;
  if (!std::getline(in, header)) return evict();
  std::string body((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    json meta = json::parse(header);
    if (meta.at("body_size").get<std::size_t>() != body.size()) return evict();
    if (meta.at("key").get<std::string>() != key_hex(url, ts)) return evict();
    FetchedPage page;
    page.request_url = meta.at("request_url").get<std::string>();
    page.final_url = meta.at("final_url").get<std::string>();
    page.status = meta.at("status").get<int>();
    page.content_type = meta.at("content_type").get<std::string>();
    page.fetched_at = std::chrono::system_clock::time_point(
        std::chrono::milliseconds(meta.at("fetched_at_ms").get<std::int64_t>()));
    page.truncated = meta.at("truncated").get<bool>();
    if (meta.contains("capture_timestamp") && !meta["capture_timestamp"].is_null()) {
      page.capture_timestamp = meta["capture_timestamp"].get<std::string>();
    }
    page.body = std::move(body);
    page.from_cache = true;
    return page;
  } catch (const std::exception&) {
    return evict();
  }
}

void PageCache::store(const FetchedPage& page) const {
  fs::path path = entry_path(page.request_url, page.capture_timestamp);
  fs::create_directories(path.parent_path());

  json meta = {
      {"key", key_hex(page.request_url, page.capture_timestamp)},
      {"request_url", page.request_url},
      {"final_url", page.final_url},
      {"status", page.status},
      {"content_type", page.content_type},
      {"fetched_at_ms", to_epoch_ms(page.fetched_at)},
      {"truncated", page.truncated},
      {"capture_timestamp", page.capture_timestamp ? json(*page.capture_timestamp) : json(nullptr)},
      {"body_size", page.body.size()},
  };

  static std::atomic<std::uint64_t> counter{0};
  std::ostringstream tmp_name;
  tmp_name << path.filename().string() << ".tmp." << ::getpid() << '.'
           << std::hash<std::thread::id>{}(std::this_thread::get_id()) << '.' << counter++;
  fs::path tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write cache entry " + tmp.string());
    out << meta.dump() << '\n';
    out.write(page.body.data(), static_cast<std::streamsize>(page.body.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw Error(ErrorCode::kIoError, "short write to cache entry " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw Error(ErrorCode::kIoError, "cannot publish cache entry " + path.string());
  }
}

// ---------------------------------------------------------------------------
// Fetcher

Fetcher::Fetcher(FetchPolicy policy, std::shared_ptr<Transport> transport, FetcherOptions options)
    : policy_(std::move(policy)), transport_(std::move(transport)), options_(std::move(options)) {
  policy_.validate();
  if (!transport_) throw Error(ErrorCode::kInvalidArgument, "fetcher needs a transport");
  if (options_.cache_dir) cache_.emplace(*options_.cache_dir);
  while (!options_.archive_base.empty() && options_.archive_base.back() == '/') options_.archive_base.pop_back();
}

Fetcher::HostGate& Fetcher::gate_for(const std::string& host) {
  std::lock_guard lock(clock_mutex_);
  auto& slot = gates_[host];
  if (!slot) slot = std::make_unique<HostGate>();
  return *slot;
}

// Requests to one host run one at a time; each starts no sooner than
// per_host_min_delay after the previous one finished.
HttpResponse Fetcher::polite_get(const Url& url) {
  HostGate& gate = gate_for(url.host);
  std::lock_guard turn(gate.turn);
  if (gate.last_finish) std::this_thread::sleep_until(*gate.last_finish + policy_.per_host_min_delay);
  struct MarkFinish {
    HostGate& gate;
    ~MarkFinish() { gate.last_finish = std::chrono::steady_clock::now(); }
  } mark{gate};
  HttpRequestOptions options{policy_.timeout, policy_.user_agent, policy_.max_body_bytes};
  return transport_->get(url, options);
}

FetchedPage Fetcher::follow(const Url& start, bool check_robots) {
  Url current = start;
  std::set<std::string> seen{current.str()};
  for (int hop = 0;; ++hop) {
    if (check_robots && !robots_allow(current)) {
      throw Error(ErrorCode::kRobotsDenied, current.str());
    }
    HttpResponse response = polite_get(current);
    bool redirect = response.status >= 300 && response.status < 400 && !response.location.empty();
    if (redirect) {
      if (hop >= policy_.max_redirects) throw Error(ErrorCode::kTooManyRedirects, start.str());
      auto next = resolve_url(current, response.location);
      if (!next) throw Error(ErrorCode::kFetchTransport, "bad redirect target " + response.location);
      if (!seen.insert(next->str()).second) throw Error(ErrorCode::kTooManyRedirects, "redirect loop at " + next->str());
      current = *next;
      continue;
    }
    FetchedPage page;
    page.request_url = start.str();
    page.final_url = current.str();
    page.status = response.status;
    page.content_type = std::move(response.content_type);
    page.body = std::move(response.body);
    page.truncated = response.truncated;
    page.fetched_at = std::chrono::system_clock::now();
    if (page.body.size() > policy_.max_body_bytes) {
      page.body.resize(policy_.max_body_bytes);
      page.truncated = true;
    }
    return page;
  }
}

bool Fetcher::robots_allow(const Url& url) {
  std::string origin = url.scheme + "://" + url.authority();
  std::shared_ptr<const RobotsTxt> robots;
  {
    std::lock_guard lock(robots_mutex_);
    if (auto it = robots_.find(origin); it != robots_.end()) robots = it->second;
  }
  if (!robots) {
    RobotsTxt parsed;
    try {
      Url robots_url = url;
      robots_url.path = "/robots.txt";
      robots_url.query.clear();
      FetchedPage page = follow(robots_url, false);
      if (page.status >= 200 && page.status < 300) {
        parsed = RobotsTxt::parse(page.body);
      } else if (page.status >= 500) {
        parsed = RobotsTxt::parse("User-agent: *\nDisallow: /\n");
      }
    } catch (const Error&) {
      // Unreachable robots.txt: the page fetch itself reports the transport problem.
    }
    robots = std::make_shared<const RobotsTxt>(std::move(parsed));
    std::lock_guard lock(robots_mutex_);
    robots_.emplace(origin, robots);
  }
  return robots->allowed(policy_.user_agent, url.target());
}

FetchedPage Fetcher::fetch(std::string_view url_text) {
  auto url = parse_url(url_text);
  if (!url) throw Error(ErrorCode::kInvalidArgument, "not an absolute http(s) URL: " + std::string(url_text));
  std::string canonical = url->str();
  if (cache_) {
    if (auto hit = cache_->lookup(canonical, std::nullopt)) return *hit;
  }
  FetchedPage page = follow(*url, policy_.respect_robots);
  if (options_.renderer) page = options_.renderer->render(std::move(page));
  if (cache_ && page.status == 200) cache_->store(page);
  return page;
}

FetchedPage Fetcher::fetch_resource(std::string_view url_text) {
  auto url = parse_url(url_text);
  if (!url) throw Error(ErrorCode::kInvalidArgument, "not an absolute http(s) URL: " + std::string(url_text));
  return follow(*url, false);
}

std::string Fetcher::snapshot_url(std::string_view url, std::string_view ts) const {
  return options_.archive_base + "/web/" + std::string(ts) + "id_/" + std::string(url);
}

FetchedPage Fetcher::fetch_archived(std::string_view url_text, std::string_view ts) {
  if (!valid_capture_timestamp(ts)) {
    throw Error(ErrorCode::kInvalidArgument, "capture timestamp must be 14 digits: " + std::string(ts));
  }
  auto url = parse_url(url_text);
  if (!url) throw Error(ErrorCode::kInvalidArgument, "not an absolute http(s) URL: " + std::string(url_text));
  std::string canonical = url->str();
  std::optional<std::string> stamp{std::string(ts)};
  if (cache_) {
    if (auto hit = cache_->lookup(canonical, stamp)) return *hit;
  }
  auto snapshot = parse_url(snapshot_url(canonical, ts));
  if (!snapshot) throw Error(ErrorCode::kInvalidArgument, "bad archive base " + options_.archive_base);
  FetchedPage page = follow(*snapshot, false);
  if (page.status == 404) throw Error(ErrorCode::kSnapshotMissing, canonical + " @ " + std::string(ts));
  page.request_url = canonical;
  page.capture_timestamp = stamp;
  if (options_.renderer) page = options_.renderer->render(std::move(page));
  if (cache_ && page.status == 200) cache_->store(page);
  return page;
}

}  // namespace sitedetect
