#pragma once

#include <chrono>
#include <memory>
#include <semaphore>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sitedetect {

// One detector score for one accepted page. Lower scores are more LLM-like.
struct PageScore {
  std::string url;
  double score = 0.0;
  int token_count = 1;
  std::string scorer_id;
};

struct ScorerEndpoint {
  std::string base_url;
  int batch_size = 8;
  int max_retries = 3;
  std::chrono::milliseconds request_timeout{120'000};
  std::chrono::milliseconds backoff_base{1'000};  // doubles per retry
  int max_inflight = 4;

  void validate() const;
};

// Scores for a list of texts, index-aligned with the input.
struct ScoreBatch {
  std::vector<double> scores;
  std::vector<int> token_counts;
  std::string scorer_id;
};

class Scorer {
 public:
  virtual ~Scorer() = default;
  virtual ScoreBatch score_texts(std::span<const std::string> texts) = 0;
  virtual bool healthy() = 0;
};

inline constexpr int kClientMaxTokens = 512;

// Client-side safety cap: keeps roughly the first `max_tokens` tokens' worth
// of text (6 code points per token), cut back to a whitespace boundary.
std::string truncate_for_scoring(std::string_view text, int max_tokens = kClientMaxTokens);

// Deterministic stand-in for the detector. With d the distinct/total ratio of
// hashed character trigrams over the first 1500 code points and u a uniform
// value hashed from the whole text,
//
//   score = 0.45 + 0.9 * d + 0.08 * (u - 0.5)
//
// which lies in (0.4, 1.4). Repetitive text (small vocabulary, repeated
// phrasing) lands low; lexically varied text lands high.
double stub_score(std::string_view text);

inline constexpr std::string_view kStubScorerId = "stub@v1";

class StubScorer final : public Scorer {
 public:
  ScoreBatch score_texts(std::span<const std::string> texts) override;
  bool healthy() override { return true; }
};

// HTTP client for the scoring service: POST {base}/score with
// {"texts":[...]}, expecting {"scores":[...],"token_counts":[...],"scorer_id":"..."}.
// Batches are sent in input order; 5xx answers and transport failures are
// retried with exponential backoff, 4xx answers raise ScorerRejected.
class HttpScorer final : public Scorer {
 public:
  explicit HttpScorer(ScorerEndpoint endpoint);

  ScoreBatch score_texts(std::span<const std::string> texts) override;
  bool healthy() override;

  const ScorerEndpoint& endpoint() const { return endpoint_; }

 private:
  ScoreBatch send_batch(std::span<const std::string> batch, std::size_t first_index);

  ScorerEndpoint endpoint_;
  std::counting_semaphore<1024> inflight_;
};

// Scores `texts` (already truncated by the caller or not) and pairs them with
// their URLs; validates every PageScore invariant.
std::vector<PageScore> score_pages(Scorer& scorer, std::span<const std::string> urls, std::span<const std::string> texts);

}  // namespace sitedetect
