#include <benchmark/benchmark.h>

#include <random>
#include <string>
#include <vector>

#include "sitedetect/content_extractor.hpp"
#include "sitedetect/page_filter.hpp"
#include "sitedetect/score_client.hpp"
#include "sitedetect/site_classifier.hpp"

using namespace sitedetect;

namespace {

std::string words(std::mt19937_64& rng, int count, int vocab) {
  std::string out;
  for (int i = 0; i < count; ++i) {
    if (i) out += ' ';
    int len = 3 + static_cast<int>(rng() % 6);
    std::uint64_t w = rng() % static_cast<std::uint64_t>(vocab);
    for (int c = 0; c < len; ++c) out += static_cast<char>('a' + (w >> (c * 4)) % 26);
  }
  return out;
}

std::string article_page(std::mt19937_64& rng, int paragraphs) {
  std::string html =
      "<!DOCTYPE html><html><head><title>t</title><script>var x = 1;</script></head><body>"
      "<header><nav><a href=\"/\">Home</a> <a href=\"/a\">About</a></nav></header><main><article>";
  for (int p = 0; p < paragraphs; ++p) {
    html += "<p>" + words(rng, 60, 400) + " <a href=\"/x\">" + words(rng, 3, 400) + "</a></p>";
    if (p % 4 == 3) html += "<ul><li>" + words(rng, 6, 400) + "</li><li>" + words(rng, 6, 400) + "</li></ul>";
  }
  html += "</article></main><footer><p>Copyright</p></footer></body></html>";
  return html;
}

void BM_ComputeDeciles(benchmark::State& state) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.4, 1.4);
  std::vector<double> scores(static_cast<std::size_t>(state.range(0)));
  for (auto& s : scores) s = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(compute_deciles(scores));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ComputeDeciles)->Arg(15)->Arg(1000)->Arg(100000);

void BM_Extract(benchmark::State& state) {
  std::mt19937_64 rng(2);
  std::string html = article_page(rng, static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(extract(html));
  state.SetBytesProcessed(state.iterations() * static_cast<std::int64_t>(html.size()));
}
BENCHMARK(BM_Extract)->Arg(8)->Arg(64);

void BM_ShingleSignature(benchmark::State& state) {
  std::mt19937_64 rng(3);
  std::string text = words(rng, static_cast<int>(state.range(0)), 2000);
  for (auto _ : state) benchmark::DoNotOptimize(shingle_signature(text, 5));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ShingleSignature)->Arg(300)->Arg(3000);

void BM_Jaccard(benchmark::State& state) {
  std::mt19937_64 rng(4);
  ShingleSet a = shingle_signature(words(rng, 1000, 300), 5);
  ShingleSet b = shingle_signature(words(rng, 1000, 300), 5);
  for (auto _ : state) benchmark::DoNotOptimize(jaccard(a, b));
}
BENCHMARK(BM_Jaccard);

void BM_TrainSvm(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::vector<SiteFeatures> features;
  std::vector<SiteLabel> labels;
  const int sites = static_cast<int>(state.range(0));
  for (int i = 0; i < sites; ++i) {
    bool llm = i % 2 == 0;
    std::normal_distribution<double> d(llm ? 0.75 : 0.95, 0.08);
    std::vector<PageScore> pages;
    for (int p = 0; p < 15; ++p) pages.push_back({"p" + std::to_string(p), d(rng), 100, "bench"});
    features.push_back(make_site_features("s" + std::to_string(i), pages));
    labels.push_back(llm ? SiteLabel::kLlm : SiteLabel::kHuman);
  }
  TrainConfig config;
  config.epochs = 1000;
  for (auto _ : state) benchmark::DoNotOptimize(train(features, labels, config));
}
BENCHMARK(BM_TrainSvm)->Arg(60)->Arg(600)->Unit(benchmark::kMillisecond);

void BM_StubScore(benchmark::State& state) {
  std::mt19937_64 rng(6);
  std::vector<std::string> texts;
  for (int i = 0; i < 15; ++i) texts.push_back(words(rng, 300, 200));
  StubScorer scorer;
  for (auto _ : state) benchmark::DoNotOptimize(scorer.score_texts(texts));
  state.SetItemsProcessed(state.iterations() * 15);
}
BENCHMARK(BM_StubScore);

}  // namespace

BENCHMARK_MAIN();
