#include "sitedetect/study_runner.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "sitedetect/content_extractor.hpp"
#include "sitedetect/errors.hpp"
#include "sitedetect/site_sampler.hpp"

namespace sitedetect {
using json = nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(SiteStatus status) {
  switch (status) {
    case SiteStatus::kClassified: return "classified";
    case SiteStatus::kScored: return "scored";
    case SiteStatus::kInsufficientPages: return "insufficient_pages";
    case SiteStatus::kUnreachable: return "unreachable";
    case SiteStatus::kFailed: return "failed";
  }
  return "failed";
}

SiteStatus parse_site_status(std::string_view text) {
  for (auto s : {SiteStatus::kClassified, SiteStatus::kScored, SiteStatus::kInsufficientPages, SiteStatus::kUnreachable,
                 SiteStatus::kFailed}) {
    if (to_string(s) == text) return s;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown site status '" + std::string(text) + "'");
}

void SiteResult::validate(int min_pages) const {
  if (verdict.has_value() != (status == SiteStatus::kClassified)) {
    throw Error(ErrorCode::kInvalidArgument, "site " + site_id + ": verdict must be present exactly when classified");
  }
  if (status == SiteStatus::kClassified && pages_accepted < min_pages) {
    throw Error(ErrorCode::kInvalidArgument, "site " + site_id + ": classified with too few pages");
  }
}

// -- serialization -----------------------------------------------------------

json page_record_to_json(const PageRecord& r) {
  json j = {{"site_id", r.site_id}, {"url", r.url}, {"accepted", r.accepted}, {"reason", r.reason},
            {"measurements", r.measurements}};
  if (r.score) j["score"] = *r.score;
  if (r.token_count) j["token_count"] = *r.token_count;
  return j;
}

PageRecord page_record_from_json(const json& j) {
  PageRecord r;
  r.site_id = j.at("site_id").get<std::string>();
  r.url = j.at("url").get<std::string>();
  r.accepted = j.at("accepted").get<bool>();
  r.reason = j.at("reason").get<std::string>();
  r.measurements = j.value("measurements", std::map<std::string, double>{});
  if (j.contains("score")) r.score = j["score"].get<double>();
  if (j.contains("token_count")) r.token_count = j["token_count"].get<int>();
  return r;
}

json features_to_json(const SiteFeatures& f) {
  return {{"site_id", f.site_id}, {"deciles", f.deciles}, {"n_pages", f.n_pages}, {"scorer_id", f.scorer_id}};
}

SiteFeatures features_from_json(const json& j) {
  SiteFeatures f;
  f.site_id = j.at("site_id").get<std::string>();
  const json& d = j.at("deciles");
  if (!d.is_array() || d.size() != kNumDeciles) throw Error(ErrorCode::kInvalidFeature, "deciles must hold 9 numbers");
  for (std::size_t i = 0; i < kNumDeciles; ++i) f.deciles[i] = d[i].get<double>();
  f.n_pages = j.at("n_pages").get<int>();
  f.scorer_id = j.value("scorer_id", std::string());
  return f;
}

json site_result_to_json(const SiteResult& r) {
  json scores = json::array();
  for (const auto& s : r.page_scores) {
    scores.push_back({{"url", s.url}, {"score", s.score}, {"token_count", s.token_count}, {"scorer_id", s.scorer_id}});
  }
  json j = {{"site_id", r.site_id},
            {"status", std::string(to_string(r.status))},
            {"truth_label", std::string(to_string(r.truth_label))},
            {"cohort_tags", r.cohort_tags},
            {"search_rank", r.search_rank ? json(*r.search_rank) : json(nullptr)},
            {"pages_sampled", r.pages_sampled},
            {"pages_accepted", r.pages_accepted},
            {"pages_rejected", r.pages_rejected},
            {"rejections", r.rejections},
            {"page_scores", scores},
            {"borderline", r.borderline},
            {"near_empty_pages", r.near_empty_pages}};
  j["features"] = r.features ? features_to_json(*r.features) : json(nullptr);
  j["verdict"] = r.verdict ? json{{"label", std::string(to_string(r.verdict->label))}, {"margin", r.verdict->margin}}
                           : json(nullptr);
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

SiteResult site_result_from_json(const json& j) {
  SiteResult r;
  r.site_id = j.at("site_id").get<std::string>();
  r.status = parse_site_status(j.at("status").get<std::string>());
  r.truth_label = parse_site_label(j.value("truth_label", std::string("unknown")));
  r.cohort_tags = j.value("cohort_tags", std::vector<std::string>{});
  if (j.contains("search_rank") && !j["search_rank"].is_null()) r.search_rank = j["search_rank"].get<int>();
  r.pages_sampled = j.value("pages_sampled", 0);
  r.pages_accepted = j.value("pages_accepted", 0);
  r.pages_rejected = j.value("pages_rejected", 0);
  r.rejections = j.value("rejections", std::map<std::string, int>{});
  r.borderline = j.value("borderline", false);
  r.near_empty_pages = j.value("near_empty_pages", 0);
  r.error = j.value("error", std::string());
  if (j.contains("page_scores")) {
    for (const auto& s : j["page_scores"]) {
      r.page_scores.push_back(PageScore{s.at("url").get<std::string>(), s.at("score").get<double>(),
                                        s.at("token_count").get<int>(), s.value("scorer_id", std::string())});
    }
  }
  if (j.contains("features") && !j["features"].is_null()) r.features = features_from_json(j["features"]);
  if (j.contains("verdict") && !j["verdict"].is_null()) {
    SiteVerdict v;
    v.site_id = r.site_id;
    v.label = parse_site_label(j["verdict"].at("label").get<std::string>());
    v.margin = j["verdict"].at("margin").get<double>();
    if (r.features) v.features = *r.features;
    r.verdict = std::move(v);
  }
  return r;
}

json site_line(const SiteResult& r) {
  json j = {{"site_id", r.site_id},
            {"status", std::string(to_string(r.status))},
            {"label", std::string(to_string(r.truth_label))},
            {"cohort_tags", r.cohort_tags},
            {"search_rank", r.search_rank ? json(*r.search_rank) : json(nullptr)}};
  j["features"] = r.features ? features_to_json(*r.features) : json(nullptr);
  j["verdict"] = r.verdict ? json{{"label", std::string(to_string(r.verdict->label))},
                                  {"margin", r.verdict->margin},
                                  {"borderline", r.borderline}}
                           : json(nullptr);
  return j;
}

// -- one site ----------------------------------------------------------------

namespace {

bool is_unreachable_code(ErrorCode code) {
  return code == ErrorCode::kNoCandidates || code == ErrorCode::kSiteUnreachable ||
         code == ErrorCode::kIndexUnavailable || code == ErrorCode::kDnsFailure;
}

bool is_transport_code(ErrorCode code) {
  return code == ErrorCode::kDnsFailure || code == ErrorCode::kFetchTransport || code == ErrorCode::kFetchTimeout;
}

}  // namespace

SiteResult run_site(const SiteSpec& site, const RunConfig& config, RunContext& context,
                    const std::function<void(const PageRecord&)>& page_sink) {
  SiteResult result;
  result.site_id = site.site_id;
  result.truth_label = site.label;
  result.cohort_tags = site.cohort_tags;
  result.search_rank = site.search_rank;

  SamplingPlan plan;
  try {
    plan = plan_site_sampling(site, config.sampling, context.fetcher);
  } catch (const Error& e) {
    result.status = is_unreachable_code(e.code()) ? SiteStatus::kUnreachable : SiteStatus::kFailed;
    result.error = e.what();
    return result;
  }

  SiteDedupState dedup;
  std::vector<PageRecord> records;
  std::vector<std::size_t> accepted_records;
  std::vector<std::string> urls, texts;
  int transport_failures = 0;

  for (const auto& candidate : plan.ordered_candidates) {
    if (result.pages_accepted >= plan.target_accepted || result.pages_sampled >= plan.max_attempts) break;
    ++result.pages_sampled;
    PageRecord rec;
    rec.site_id = site.site_id;
    rec.url = candidate.url;
    auto reject = [&](std::string reason) {
      rec.reason = std::move(reason);
      ++result.pages_rejected;
      ++result.rejections[rec.reason];
      records.push_back(rec);
    };

    FetchedPage page;
    try {
      bool archived = candidate.source == CandidateSource::kCdx && config.sampling.fetch_cdx_from_archive &&
                      candidate.capture_timestamp.has_value();
      page = archived ? context.fetcher.fetch_archived(candidate.url, *candidate.capture_timestamp)
                      : context.fetcher.fetch(candidate.url);
    } catch (const Error& e) {
      if (is_transport_code(e.code())) ++transport_failures;
      spdlog::debug("site {}: {} failed: {}", site.site_id, candidate.url, e.what());
      reject("fetch_error");
      continue;
    }
    if (page.status != 200) {
      reject("http_error");
      continue;
    }
    if (!page.is_html()) {
      reject("not_html");
      continue;
    }
    ExtractedContent content;
    try {
      content = extract(page.body, charset_from_content_type(page.content_type).value_or(""));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kEncodingError) throw;
      reject("encoding_error");
      continue;
    }
    if (content.total_chars < kNearEmptyChars) ++result.near_empty_pages;
    FilterVerdict verdict = evaluate_and_record(content, candidate.url, dedup, config.filter);
    rec.reason = std::string(to_string(verdict.reason));
    rec.measurements = verdict.detail;
    rec.measurements["total_chars"] = static_cast<double>(content.total_chars);
    rec.measurements["link_chars"] = static_cast<double>(content.link_chars);
    rec.measurements["list_chars"] = static_cast<double>(content.list_chars);
    rec.measurements["table_chars"] = static_cast<double>(content.table_chars);
    rec.accepted = verdict.accepted;
    if (!verdict.accepted) {
      ++result.pages_rejected;
      ++result.rejections[rec.reason];
      records.push_back(rec);
      continue;
    }
    ++result.pages_accepted;
    accepted_records.push_back(records.size());
    records.push_back(rec);
    urls.push_back(candidate.url);
    texts.push_back(truncate_for_scoring(content.main_text));
  }

  auto flush_records = [&] {
    if (page_sink) {
      for (const auto& r : records) page_sink(r);
    }
  };

  if (result.pages_sampled > 0 && transport_failures == result.pages_sampled) {
    result.status = SiteStatus::kUnreachable;
    result.error = "every page fetch failed at the transport level";
    flush_records();
    return result;
  }
  if (result.pages_accepted < config.min_pages) {
    result.status = SiteStatus::kInsufficientPages;
    flush_records();
    return result;
  }

  try {
    result.page_scores = score_pages(context.scorer, urls, texts);
  } catch (const Error& e) {
    result.status = SiteStatus::kFailed;
    result.error = e.what();
    flush_records();
    return result;
  }
  for (std::size_t i = 0; i < accepted_records.size(); ++i) {
    records[accepted_records[i]].score = result.page_scores[i].score;
    records[accepted_records[i]].token_count = result.page_scores[i].token_count;
  }
  flush_records();

  result.features = make_site_features(site.site_id, result.page_scores, config.min_pages);
  if (context.model) {
    result.verdict = predict(*context.model, *result.features);
    result.borderline = std::abs(result.verdict->margin) < config.borderline_band;
    result.status = SiteStatus::kClassified;
  } else {
    result.status = SiteStatus::kScored;
  }
  return result;
}

// -- batch -------------------------------------------------------------------

namespace {

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> lines;
  std::ifstream in(path, std::ios::binary);
  if (!in) return lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

// Keeps lines that parse and whose site_id satisfies `keep`.
void compact_jsonl(const fs::path& path, const std::function<bool(const std::string&)>& keep) {
  if (!fs::exists(path)) return;
  auto lines = read_lines(path);
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + tmp.string());
    for (const auto& line : lines) {
      try {
        json j = json::parse(line);
        if (keep(j.at("site_id").get<std::string>())) out << line << '\n';
      } catch (const json::exception&) {
      }
    }
  }
  fs::rename(tmp, path);
}

}  // namespace

std::vector<SiteResult> read_results_log(const fs::path& results_path) {
  std::vector<SiteResult> out;
  for (const auto& line : read_lines(results_path)) {
    if (line.empty()) continue;
    try {
      out.push_back(site_result_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      spdlog::warn("ignoring unreadable results line: {}", e.what());
    }
  }
  return out;
}

std::vector<SiteResult> run_batch(const RunManifest& manifest, const fs::path& out_dir, RunContext& context,
                                  const BatchOptions& options) {
  if (options.parallelism < 1) throw Error(ErrorCode::kInvalidArgument, "parallelism must be >= 1");
  manifest.validate();
  manifest.config.validate();
  RunFiles files{out_dir};
  fs::create_directories(out_dir);

  if (fs::exists(files.manifest())) {
    RunManifest previous = load_manifest(files.manifest());
    if (previous.run_id != manifest.run_id) {
      throw Error(ErrorCode::kConfigError, "run directory belongs to run '" + previous.run_id + "', not '" +
                                               manifest.run_id + "'");
    }
  } else {
    std::ofstream out(files.manifest(), std::ios::binary | std::ios::trunc);
    out << manifest_to_json(manifest).dump(2) << '\n';
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + files.manifest().string());
  }

  std::set<std::string> in_manifest;
  for (const auto& s : manifest.sites) in_manifest.insert(s.site_id);
  std::map<std::string, SiteResult> done;
  for (auto& r : read_results_log(files.results())) {
    if (in_manifest.count(r.site_id)) done.insert_or_assign(r.site_id, std::move(r));
  }
  auto committed = [&](const std::string& id) { return done.count(id) > 0; };
  compact_jsonl(files.results(), committed);
  compact_jsonl(files.pages(), committed);
  compact_jsonl(files.sites(), committed);
  if (!done.empty()) spdlog::info("resuming run {}: {} sites already complete", manifest.run_id, done.size());

  std::vector<const SiteSpec*> pending;
  for (const auto& s : manifest.sites) {
    if (!committed(s.site_id)) pending.push_back(&s);
  }

  std::ofstream pages_out(files.pages(), std::ios::binary | std::ios::app);
  std::ofstream sites_out(files.sites(), std::ios::binary | std::ios::app);
  std::ofstream results_out(files.results(), std::ios::binary | std::ios::app);
  if (!pages_out || !sites_out || !results_out) throw Error(ErrorCode::kIoError, "cannot open run logs in " + out_dir.string());

  std::mutex log_mutex;
  std::exception_ptr fatal;
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> finished{0};

  auto worker = [&] {
    for (;;) {
      if (options.stop_after && finished.load() >= *options.stop_after) return;
      std::size_t i = next.fetch_add(1);
      if (i >= pending.size()) return;
      const SiteSpec& site = *pending[i];
      std::vector<PageRecord> records;
      SiteResult result;
      try {
        result = run_site(site, manifest.config, context, [&](const PageRecord& r) { records.push_back(r); });
      } catch (const std::exception& e) {
        result = SiteResult{};
        result.site_id = site.site_id;
        result.truth_label = site.label;
        result.cohort_tags = site.cohort_tags;
        result.search_rank = site.search_rank;
        result.status = SiteStatus::kFailed;
        result.error = e.what();
      }
      spdlog::info("site {}: {} ({} accepted of {} sampled)", site.site_id, to_string(result.status),
                   result.pages_accepted, result.pages_sampled);
      std::lock_guard lock(log_mutex);
      if (options.stop_after && finished.load() >= *options.stop_after) return;
      for (const auto& r : records) pages_out << page_record_to_json(r).dump() << '\n';
      pages_out.flush();
      sites_out << site_line(result).dump() << '\n';
      sites_out.flush();
      results_out << site_result_to_json(result).dump() << '\n';
      results_out.flush();
      if (!pages_out || !sites_out || !results_out) {
        fatal = std::make_exception_ptr(Error(ErrorCode::kIoError, "write to run logs failed"));
        next.store(pending.size());
        return;
      }
      done.insert_or_assign(result.site_id, std::move(result));
      ++finished;
    }
  };

  std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(options.parallelism), pending.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < workers; ++t) threads.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);

  std::vector<SiteResult> out;
  for (const auto& s : manifest.sites) {
    auto it = done.find(s.site_id);
    if (it != done.end()) out.push_back(it->second);
  }
  return out;
}

}  // namespace sitedetect
