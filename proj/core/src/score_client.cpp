#include "sitedetect/score_client.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <thread>
#include <unordered_set>

#include "sitedetect/errors.hpp"
#include "sitedetect/hashing.hpp"
#include "sitedetect/text.hpp"
#include "sitedetect/url.hpp"

namespace sitedetect {
using json = nlohmann::json;

void ScorerEndpoint::validate() const {
  if (batch_size < 1) throw Error(ErrorCode::kInvalidArgument, "batch_size must be >= 1");
  if (max_retries < 0) throw Error(ErrorCode::kInvalidArgument, "max_retries must be >= 0");
  if (max_inflight < 1 || max_inflight > 1024) throw Error(ErrorCode::kInvalidArgument, "max_inflight must be in [1,1024]");
  if (request_timeout.count() <= 0) throw Error(ErrorCode::kInvalidArgument, "request_timeout must be positive");
}

std::string truncate_for_scoring(std::string_view text, int max_tokens) {
  std::u32string chars = utf8_to_u32(text);
  std::size_t cap = static_cast<std::size_t>(std::max(max_tokens, 1)) * 6;
  if (chars.size() <= cap) return std::string(text);
  std::size_t cut = cap;
  while (cut > 0 && !is_unicode_space(chars[cut])) --cut;
  if (cut == 0) cut = cap;
  chars.resize(cut);
  return u32_to_utf8(chars);
}

double stub_score(std::string_view text) {
  if (text.empty()) throw Error(ErrorCode::kInvalidArgument, "stub_score needs non-empty text");
  std::u32string chars = utf8_to_u32(text);
  std::size_t window = std::min<std::size_t>(chars.size(), 1500);
  double diversity = 1.0;
  if (window >= 3) {
    std::unordered_set<std::uint64_t> distinct;
    std::size_t total = window - 2;
    for (std::size_t i = 0; i < total; ++i) {
      std::uint64_t h = splitmix64((static_cast<std::uint64_t>(chars[i]) << 42) ^
                                   (static_cast<std::uint64_t>(chars[i + 1]) << 21) ^ chars[i + 2]);
      distinct.insert(h);
    }
    diversity = static_cast<double>(distinct.size()) / static_cast<double>(total);
  }
  double u = static_cast<double>(hash64(text, 0xb1a0c) >> 11) * 0x1.0p-53;
  double score = 0.45 + 0.9 * diversity + 0.08 * (u - 0.5);
  return std::clamp(score, 0.401, 1.399);
}

ScoreBatch StubScorer::score_texts(std::span<const std::string> texts) {
  ScoreBatch out;
  out.scorer_id = std::string(kStubScorerId);
  for (const auto& t : texts) {
    if (t.empty()) throw Error(ErrorCode::kInvalidArgument, "cannot score empty text");
    out.scores.push_back(stub_score(t));
    out.token_counts.push_back(static_cast<int>(std::max<std::size_t>(1, count_words(t))));
  }
  return out;
}

HttpScorer::HttpScorer(ScorerEndpoint endpoint)
    : endpoint_(std::move(endpoint)), inflight_(std::max(1, std::min(endpoint_.max_inflight, 1024))) {
  endpoint_.validate();
  if (!parse_url(endpoint_.base_url)) throw Error(ErrorCode::kInvalidArgument, "bad scorer base_url " + endpoint_.base_url);
  while (!endpoint_.base_url.empty() && endpoint_.base_url.back() == '/') endpoint_.base_url.pop_back();
}

namespace {

struct BaseParts {
  std::string origin;
  std::string prefix;
};

BaseParts split_base(const std::string& base_url) {
  auto url = parse_url(base_url);
  BaseParts parts{url->scheme + "://" + url->authority(), url->path == "/" ? "" : url->path};
  while (!parts.prefix.empty() && parts.prefix.back() == '/') parts.prefix.pop_back();
  return parts;
}

void configure(httplib::Client& client, std::chrono::milliseconds timeout) {
  auto seconds = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  auto micros = std::chrono::duration_cast<std::chrono::microseconds>(timeout - seconds);
  client.set_connection_timeout(seconds.count(), micros.count());
  client.set_read_timeout(seconds.count(), micros.count());
  client.set_write_timeout(seconds.count(), micros.count());
  client.set_keep_alive(false);
}

}  // namespace

bool HttpScorer::healthy() {
  auto base = split_base(endpoint_.base_url);
  httplib::Client client(base.origin);
  configure(client, std::min(endpoint_.request_timeout, std::chrono::milliseconds(10'000)));
  auto res = client.Get(base.prefix + "/healthz");
  if (!res || res->status != 200) return false;
  try {
    return json::parse(res->body).value("status", "") == "ok";
  } catch (const std::exception&) {
    return false;
  }
}

ScoreBatch HttpScorer::send_batch(std::span<const std::string> batch, std::size_t first_index) {
  auto base = split_base(endpoint_.base_url);
  json request = {{"texts", json::array()}};
  for (const auto& t : batch) request["texts"].push_back(t);
  std::string body = request.dump();

  std::string last_problem;
  for (int attempt = 0; attempt <= endpoint_.max_retries; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(endpoint_.backoff_base * (1LL << (attempt - 1)));
    httplib::Result res{nullptr, httplib::Error::Unknown};
    {
      inflight_.acquire();
      httplib::Client client(base.origin);
      configure(client, endpoint_.request_timeout);
      res = client.Post(base.prefix + "/score", body, "application/json");
      inflight_.release();
    }
    if (!res) {
      last_problem = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_problem = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw ScorerRejected(first_index, res->status,
                           "batch starting at text " + std::to_string(first_index) + " rejected with HTTP " +
                               std::to_string(res->status) + ": " + res->body.substr(0, 200));
    }
    ScoreBatch out;
    try {
      json reply = json::parse(res->body);
      out.scores = reply.at("scores").get<std::vector<double>>();
      out.token_counts = reply.at("token_counts").get<std::vector<int>>();
      out.scorer_id = reply.at("scorer_id").get<std::string>();
    } catch (const std::exception& e) {
      throw Error(ErrorCode::kProtocolError, std::string("malformed scorer reply: ") + e.what());
    }
    if (out.scores.size() != batch.size() || out.token_counts.size() != batch.size()) {
      throw Error(ErrorCode::kProtocolError, "scorer returned " + std::to_string(out.scores.size()) + " scores for " +
                                                 std::to_string(batch.size()) + " texts");
    }
    return out;
  }
  throw Error(ErrorCode::kScorerUnavailable,
              "gave up after " + std::to_string(endpoint_.max_retries + 1) + " attempts: " + last_problem);
}

ScoreBatch HttpScorer::score_texts(std::span<const std::string> texts) {
  for (std::size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw Error(ErrorCode::kInvalidArgument, "text " + std::to_string(i) + " is empty");
  }
  auto size = static_cast<std::size_t>(endpoint_.batch_size);
  std::size_t batches = (texts.size() + size - 1) / size;
  // One slot per batch index, so a retried batch can never contribute twice.
  std::vector<ScoreBatch> slots(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    std::size_t first = b * size;
    slots[b] = send_batch(texts.subspan(first, std::min(size, texts.size() - first)), first);
  }
  ScoreBatch out;
  for (auto& slot : slots) {
    if (!out.scorer_id.empty() && slot.scorer_id != out.scorer_id) {
      throw Error(ErrorCode::kProtocolError, "scorer_id changed mid-request: " + out.scorer_id + " vs " + slot.scorer_id);
    }
    out.scorer_id = slot.scorer_id;
    out.scores.insert(out.scores.end(), slot.scores.begin(), slot.scores.end());
    out.token_counts.insert(out.token_counts.end(), slot.token_counts.begin(), slot.token_counts.end());
  }
  return out;
}

std::vector<PageScore> score_pages(Scorer& scorer, std::span<const std::string> urls, std::span<const std::string> texts) {
  if (urls.size() != texts.size()) throw Error(ErrorCode::kInvalidArgument, "urls/texts length mismatch");
  if (texts.empty()) return {};
  ScoreBatch batch = scorer.score_texts(texts);
  if (batch.scores.size() != texts.size() || batch.token_counts.size() != texts.size()) {
    throw Error(ErrorCode::kProtocolError, "scorer returned a misaligned batch");
  }
  std::vector<PageScore> out;
  out.reserve(texts.size());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    double s = batch.scores[i];
    if (!std::isfinite(s) || s <= 0.0) {
      throw Error(ErrorCode::kProtocolError, "non-positive or non-finite score for " + urls[i]);
    }
    if (batch.token_counts[i] < 1) throw Error(ErrorCode::kProtocolError, "token_count < 1 for " + urls[i]);
    out.push_back(PageScore{urls[i], s, batch.token_counts[i], batch.scorer_id});
  }
  return out;
}

}  // namespace sitedetect
