#include "sitedetect/site_sampler.hpp"

#include <expat.h>
#include <spdlog/spdlog.h>
#include <zlib.h>

#include <algorithm>
#include <cctype>
#include <map>
#include <memory>
#include <nlohmann/json.hpp>
#include <random>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "sitedetect/errors.hpp"
#include "sitedetect/hashing.hpp"

namespace sitedetect {

std::string_view to_string(SiteLabel label) {
  switch (label) {
    case SiteLabel::kLlm: return "llm";
    case SiteLabel::kHuman: return "human";
    case SiteLabel::kUnknown: return "unknown";
  }
  return "unknown";
}

SiteLabel parse_site_label(std::string_view text) {
  std::string lower(text);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "llm") return SiteLabel::kLlm;
  if (lower == "human") return SiteLabel::kHuman;
  if (lower == "unknown" || lower.empty()) return SiteLabel::kUnknown;
  throw Error(ErrorCode::kInvalidArgument, "unknown site label '" + std::string(text) + "'");
}

std::string_view to_string(CandidateSource source) {
  switch (source) {
    case CandidateSource::kSitemap: return "sitemap";
    case CandidateSource::kCdx: return "cdx";
    case CandidateSource::kManifest: return "manifest";
  }
  return "sitemap";
}

void SiteSpec::validate() const {
  if (site_id.empty()) throw Error(ErrorCode::kInvalidArgument, "site_id is empty");
  if (host.empty()) throw Error(ErrorCode::kInvalidArgument, "site " + site_id + ": host is empty");
  for (char c : host) {
    if (std::isupper(static_cast<unsigned char>(c)) || c == '/' || std::isspace(static_cast<unsigned char>(c))) {
      throw Error(ErrorCode::kInvalidArgument, "site " + site_id + ": host must be a bare lowercase domain: " + host);
    }
  }
}

void SamplingConfig::validate() const {
  if (target_accepted < 1) throw Error(ErrorCode::kInvalidArgument, "target_accepted must be >= 1");
  if (max_attempts < target_accepted) throw Error(ErrorCode::kInvalidArgument, "max_attempts must be >= target_accepted");
  if (oversample_factor < 1) throw Error(ErrorCode::kInvalidArgument, "oversample_factor must be >= 1");
  if (cdx_limit < 1) throw Error(ErrorCode::kInvalidArgument, "cdx_limit must be >= 1");
  if (scheme != "http" && scheme != "https") throw Error(ErrorCode::kInvalidArgument, "scheme must be http or https");
}

namespace {

std::string host_name(std::string_view host) {
  auto colon = host.rfind(':');
  if (colon != std::string_view::npos && host.find(']') == std::string_view::npos) return std::string(host.substr(0, colon));
  return std::string(host);
}

bool same_site(const Url& url, std::string_view site_host) {
  std::string name = host_name(site_host);
  if (url.host == name) return true;
  return url.host.size() > name.size() && url.host.ends_with(name) &&
         url.host[url.host.size() - name.size() - 1] == '.';
}

bool looks_like_xml(std::string_view body, std::string_view content_type) {
  if (content_type.find("xml") != std::string_view::npos) return true;
  if (body.size() >= 2 && static_cast<unsigned char>(body[0]) == 0x1f && static_cast<unsigned char>(body[1]) == 0x8b) {
    return true;
  }
  if (content_type.find("html") != std::string_view::npos) return false;
  auto first = body.find_first_not_of(" \t\r\n\xEF\xBB\xBF");
  if (first == std::string_view::npos) return false;
  std::string_view rest = body.substr(first);
  return rest.starts_with("<?xml") || rest.starts_with("<urlset") || rest.starts_with("<sitemapindex");
}

std::string gunzip(std::string_view bytes) {
  z_stream stream{};
  if (inflateInit2(&stream, 16 + MAX_WBITS) != Z_OK) throw Error(ErrorCode::kSitemapParseError, "inflateInit failed");
  std::unique_ptr<z_stream, int (*)(z_stream*)> guard(&stream, inflateEnd);
  stream.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(bytes.data()));
  stream.avail_in = static_cast<uInt>(bytes.size());
  std::string out;
  char buffer[1 << 15];
  // 50k entries of a few hundred bytes each stay well under this cap.
  constexpr std::size_t kMaxInflated = 64u * 1024 * 1024;
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    stream.next_out = reinterpret_cast<Bytef*>(buffer);
    stream.avail_out = sizeof(buffer);
    rc = inflate(&stream, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) throw Error(ErrorCode::kSitemapParseError, "corrupt gzip payload");
    out.append(buffer, sizeof(buffer) - stream.avail_out);
    if (out.size() > kMaxInflated) throw Error(ErrorCode::kSitemapParseError, "inflated sitemap too large");
    if (rc == Z_OK && stream.avail_in == 0 && stream.avail_out != 0) {
      throw Error(ErrorCode::kSitemapParseError, "truncated gzip payload");
    }
  }
  return out;
}

std::string_view local_name(const XML_Char* name) {
  std::string_view n(name);
  if (auto colon = n.rfind(':'); colon != std::string_view::npos) n.remove_prefix(colon + 1);
  return n;
}

struct SitemapSax {
  std::vector<std::string> stack;
  std::string root;
  std::string text;
  bool in_loc = false;
  std::vector<std::string> locs;
  std::size_t seen_locs = 0;

  static void on_start(void* data, const XML_Char* name, const XML_Char**) {
    auto* self = static_cast<SitemapSax*>(data);
    std::string n(local_name(name));
    if (self->stack.empty()) self->root = n;
    if (n == "loc" && self->stack.size() == 2 && (self->stack[1] == "url" || self->stack[1] == "sitemap")) {
      self->in_loc = true;
      self->text.clear();
    }
    self->stack.push_back(std::move(n));
  }

  static void on_end(void* data, const XML_Char*) {
    auto* self = static_cast<SitemapSax*>(data);
    if (self->in_loc && self->stack.size() == 3) {
      self->in_loc = false;
      ++self->seen_locs;
      if (self->locs.size() < kMaxSitemapUrls) self->locs.push_back(self->text);
    }
    self->stack.pop_back();
  }

  static void on_text(void* data, const XML_Char* s, int len) {
    auto* self = static_cast<SitemapSax*>(data);
    if (self->in_loc) self->text.append(s, static_cast<std::size_t>(len));
  }
};

std::string trim_copy(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

std::vector<std::string> discover_sitemaps(std::string_view host, Fetcher& fetcher, std::string_view scheme) {
  std::string origin = std::string(scheme) + "://" + std::string(host);
  std::vector<std::string> found;
  std::set<std::string> seen;

  auto add = [&](const std::string& raw) {
    auto url = parse_url(raw);
    if (!url) return;
    if (seen.insert(url->str()).second) found.push_back(url->str());
  };

  try {
    FetchedPage robots = fetcher.fetch_resource(origin + "/robots.txt");
    if (robots.status == 200) {
      RobotsTxt parsed = RobotsTxt::parse(robots.body);
      for (const auto& s : parsed.sitemaps()) add(s);
    }
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kDnsFailure) throw Error(ErrorCode::kSiteUnreachable, std::string(host));
    spdlog::debug("robots.txt for {} unavailable: {}", host, e.what());
  }

  std::string well_known = origin + "/sitemap.xml";
  if (auto canonical = canonicalize_url(well_known); canonical && !seen.contains(*canonical)) {
    try {
      FetchedPage page = fetcher.fetch_resource(well_known);
      if (page.status == 200 && looks_like_xml(page.body, page.content_type)) add(well_known);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kDnsFailure) throw Error(ErrorCode::kSiteUnreachable, std::string(host));
      spdlog::debug("{} unavailable: {}", well_known, e.what());
    }
  }
  return found;
}

SitemapContents parse_sitemap(std::string_view bytes, int depth, std::string_view base_url) {
  if (depth > kMaxSitemapDepth) {
    throw Error(ErrorCode::kRecursionLimit, "sitemap depth " + std::to_string(depth) + " exceeds " +
                                                std::to_string(kMaxSitemapDepth));
  }
  std::string inflated;
  if (bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f && static_cast<unsigned char>(bytes[1]) == 0x8b) {
    inflated = gunzip(bytes);
    bytes = inflated;
  }

  SitemapSax sax;
  std::unique_ptr<XML_ParserStruct, void (*)(XML_Parser)> parser(XML_ParserCreate(nullptr), XML_ParserFree);
  XML_SetUserData(parser.get(), &sax);
  XML_SetElementHandler(parser.get(), &SitemapSax::on_start, &SitemapSax::on_end);
  XML_SetCharacterDataHandler(parser.get(), &SitemapSax::on_text);
  if (XML_Parse(parser.get(), bytes.data(), static_cast<int>(bytes.size()), XML_TRUE) == XML_STATUS_ERROR) {
    throw Error(ErrorCode::kSitemapParseError,
                std::string(XML_ErrorString(XML_GetErrorCode(parser.get()))) + " at line " +
                    std::to_string(XML_GetCurrentLineNumber(parser.get())));
  }
  if (sax.root != "urlset" && sax.root != "sitemapindex") {
    throw Error(ErrorCode::kSitemapParseError, "root element <" + sax.root + "> is not urlset or sitemapindex");
  }
  if (sax.seen_locs > kMaxSitemapUrls) {
    spdlog::warn("sitemap lists {} URLs; reading the first {}", sax.seen_locs, kMaxSitemapUrls);
  }

  std::optional<Url> base = base_url.empty() ? std::nullopt : parse_url(base_url);
  SitemapContents out;
  out.is_index = sax.root == "sitemapindex";
  for (const auto& raw : sax.locs) {
    std::string loc = trim_copy(raw);
    std::optional<Url> url = base ? resolve_url(*base, loc) : parse_url(loc);
    if (!url) continue;
    if (out.is_index) {
      out.child_sitemaps.push_back(url->str());
    } else {
      out.pages.push_back(PageCandidate{url->str(), CandidateSource::kSitemap, std::nullopt, std::nullopt, std::nullopt});
    }
  }
  return out;
}

std::vector<PageCandidate> collect_sitemap_pages(std::span<const std::string> sitemap_urls, Fetcher& fetcher) {
  std::vector<PageCandidate> pages;
  std::unordered_set<std::string> seen_pages;
  std::set<std::string> visited;

  struct Pending {
    std::string url;
    int depth;
  };
  std::vector<Pending> queue;
  for (const auto& u : sitemap_urls) queue.push_back({u, 0});

  for (std::size_t i = 0; i < queue.size() && pages.size() < kMaxSitemapUrls; ++i) {
    Pending item = queue[i];
    if (!visited.insert(item.url).second) continue;
    try {
      FetchedPage page = fetcher.fetch_resource(item.url);
      if (page.status != 200) {
        spdlog::debug("sitemap {} answered {}", item.url, page.status);
        continue;
      }
      SitemapContents contents = parse_sitemap(page.body, item.depth, page.final_url);
      for (auto& child : contents.child_sitemaps) queue.push_back({std::move(child), item.depth + 1});
      for (auto& candidate : contents.pages) {
        if (pages.size() >= kMaxSitemapUrls) break;
        if (seen_pages.insert(candidate.url).second) pages.push_back(std::move(candidate));
      }
    } catch (const Error& e) {
      spdlog::warn("skipping sitemap {}: {}", item.url, e.what());
    }
  }
  return pages;
}

std::string cdx_query_string(std::string_view host, const CdxFilters& filters, int limit) {
  std::string q = "?url=" + std::string(host) + "/*&output=text";
  if (filters.status) q += "&filter=statuscode:" + std::to_string(*filters.status);
  if (filters.mime) q += "&filter=mimetype:" + *filters.mime;
  if (filters.collapse_urlkey) q += "&collapse=urlkey";
  q += "&limit=" + std::to_string(limit);
  return q;
}

CdxResult parse_cdx_response(std::string_view body, const CdxFilters& filters, int limit) {
  CdxResult result;
  std::unordered_map<std::string, std::size_t> by_key;
  std::size_t pos = 0;
  while (pos < body.size()) {
    auto end = body.find('\n', pos);
    if (end == std::string_view::npos) end = body.size();
    std::string_view line = body.substr(pos, end - pos);
    pos = end + 1;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t p = 0;
    // Split off the first two fields; the remainder is either more
    // space-separated fields or a JSON object.
    while (p < line.size() && fields.size() < 2) {
      auto sp = line.find(' ', p);
      if (sp == std::string_view::npos) sp = line.size();
      if (sp > p) fields.push_back(line.substr(p, sp - p));
      p = sp + 1;
    }
    std::string_view rest = p < line.size() ? line.substr(p) : std::string_view{};

    std::string urlkey, timestamp, original, mime, status;
    bool ok = fields.size() == 2 && !rest.empty();
    if (ok) {
      urlkey = fields[0];
      timestamp = fields[1];
      if (rest.front() == '{') {
        try {
          auto j = nlohmann::json::parse(rest);
          original = j.at("url").get<std::string>();
          mime = j.value("mime", "");
          status = j.value("status", "");
        } catch (const std::exception&) {
          ok = false;
        }
      } else {
        std::vector<std::string_view> more;
        std::size_t q = 0;
        while (q < rest.size()) {
          auto sp = rest.find(' ', q);
          if (sp == std::string_view::npos) sp = rest.size();
          if (sp > q) more.push_back(rest.substr(q, sp - q));
          q = sp + 1;
        }
        ok = more.size() >= 3;
        if (ok) {
          original = more[0];
          mime = more[1];
          status = more[2];
        }
      }
    }
    std::optional<Url> url = ok ? parse_url(original) : std::nullopt;
    if (!ok || !valid_capture_timestamp(timestamp) || !url) {
      ++result.skipped_lines;
      continue;
    }
    std::optional<int> status_code;
    if (!status.empty() && std::all_of(status.begin(), status.end(), [](unsigned char c) { return std::isdigit(c); })) {
      status_code = std::stoi(status);
    }
    if ((filters.status && status_code != filters.status) || (filters.mime && mime != *filters.mime)) {
      ++result.filtered_lines;
      continue;
    }

    std::string key = filters.collapse_urlkey ? urlkey : urlkey + " " + timestamp;
    if (auto it = by_key.find(key); it != by_key.end()) {
      auto& existing = result.candidates[it->second];
      if (timestamp > *existing.capture_timestamp) {
        existing.capture_timestamp = timestamp;
        existing.url = url->str();
      }
      continue;
    }
    if (result.candidates.size() >= static_cast<std::size_t>(limit)) continue;
    by_key.emplace(key, result.candidates.size());
    result.candidates.push_back(PageCandidate{url->str(), CandidateSource::kCdx, timestamp,
                                              mime.empty() ? std::nullopt : std::optional<std::string>(mime),
                                              status_code});
  }
  if (result.skipped_lines > 0) spdlog::warn("CDX response: skipped {} unparseable line(s)", result.skipped_lines);
  return result;
}

CdxResult query_cdx(std::string_view endpoint, std::string_view host, const CdxFilters& filters, int limit,
                    Fetcher& fetcher) {
  if (limit < 1) throw Error(ErrorCode::kInvalidArgument, "CDX limit must be >= 1");
  std::string url = std::string(endpoint) + cdx_query_string(host, filters, limit);
  FetchedPage page;
  try {
    page = fetcher.fetch_resource(url);
  } catch (const Error& e) {
    throw Error(ErrorCode::kIndexUnavailable, e.what());
  }
  if (page.status != 200) {
    throw Error(ErrorCode::kIndexUnavailable, url + " answered " + std::to_string(page.status));
  }
  return parse_cdx_response(page.body, filters, limit);
}

std::vector<PageCandidate> sample_candidates(std::span<const PageCandidate> candidates, std::size_t n,
                                             std::uint64_t seed) {
  std::vector<std::size_t> order(candidates.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::size_t take = std::min(n, candidates.size());
  std::mt19937_64 rng(seed);
  std::vector<PageCandidate> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, order.size() - i));
    std::swap(order[i], order[j]);
    out.push_back(candidates[order[i]]);
  }
  return out;
}

std::uint64_t site_seed(std::uint64_t run_seed, std::string_view site_id) {
  return splitmix64(run_seed ^ hash64(site_id, 0x5173));
}

SamplingPlan plan_from_pools(const SiteSpec& site, std::span<const PageCandidate> sitemap_pool,
                             std::span<const PageCandidate> cdx_pool, const SamplingConfig& config) {
  config.validate();
  std::vector<PageCandidate> pool;
  std::unordered_set<std::string> seen;
  auto take_unique = [&](std::span<const PageCandidate> source) {
    for (const auto& c : source) {
      auto canonical = canonicalize_url(c.url);
      if (!canonical || !seen.insert(*canonical).second) continue;
      PageCandidate copy = c;
      copy.url = *canonical;
      pool.push_back(std::move(copy));
    }
  };
  if (!sitemap_pool.empty()) {
    take_unique(sitemap_pool);
  } else {
    std::vector<PageCandidate> recent(cdx_pool.begin(), cdx_pool.end());
    std::stable_sort(recent.begin(), recent.end(), [](const PageCandidate& a, const PageCandidate& b) {
      return a.capture_timestamp.value_or("") > b.capture_timestamp.value_or("");
    });
    take_unique(recent);
  }
  if (pool.empty()) throw Error(ErrorCode::kNoCandidates, "site " + site.site_id + " has no candidate pages");

  std::size_t wanted = static_cast<std::size_t>(config.oversample_factor) * static_cast<std::size_t>(config.target_accepted);
  wanted = std::min(wanted, static_cast<std::size_t>(config.max_attempts));

  SamplingPlan plan;
  plan.site = site;
  plan.target_accepted = config.target_accepted;
  plan.max_attempts = config.max_attempts;
  plan.seed = site_seed(config.seed, site.site_id);
  plan.ordered_candidates = sample_candidates(pool, wanted, plan.seed);
  return plan;
}

SamplingPlan plan_site_sampling(const SiteSpec& site, const SamplingConfig& config, Fetcher& fetcher) {
  site.validate();
  config.validate();

  if (!site.pages.empty()) {
    std::vector<PageCandidate> listed;
    for (const auto& u : site.pages) {
      listed.push_back(PageCandidate{u, CandidateSource::kManifest, std::nullopt, std::nullopt, std::nullopt});
    }
    return plan_from_pools(site, listed, {}, config);
  }

  std::vector<std::string> sitemaps = discover_sitemaps(site.host, fetcher, config.scheme);
  std::vector<PageCandidate> sitemap_pool;
  for (auto& c : collect_sitemap_pages(sitemaps, fetcher)) {
    auto url = parse_url(c.url);
    if (url && same_site(*url, site.host)) sitemap_pool.push_back(std::move(c));
  }

  std::vector<PageCandidate> cdx_pool;
  if (sitemap_pool.empty() && !config.cdx_endpoint.empty()) {
    try {
      cdx_pool = query_cdx(config.cdx_endpoint, host_name(site.host), CdxFilters{}, config.cdx_limit, fetcher).candidates;
    } catch (const Error& e) {
      spdlog::warn("site {}: CDX lookup failed: {}", site.site_id, e.what());
    }
  }
  return plan_from_pools(site, sitemap_pool, cdx_pool, config);
}

}  // namespace sitedetect
