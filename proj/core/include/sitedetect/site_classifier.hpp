#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sitedetect/score_client.hpp"
#include "sitedetect/site_sampler.hpp"

namespace sitedetect {

inline constexpr std::size_t kNumDeciles = 9;
inline constexpr int kDefaultMinPages = 15;

using Deciles = std::array<double, kNumDeciles>;

// 10th..90th percentiles by linear interpolation between order statistics:
// h = (n-1)q, d = s[floor h] + (h - floor h)(s[floor h + 1] - s[floor h]).
Deciles compute_deciles(std::span<const double> scores);

struct SiteFeatures {
  std::string site_id;
  Deciles deciles{};
  int n_pages = 0;
  std::string scorer_id;

  void validate(int min_pages = kDefaultMinPages) const;
};

// Throws kInsufficientPages below `min_pages` and kInvalidArgument when the
// scores come from more than one scorer.
SiteFeatures make_site_features(std::string site_id, std::span<const PageScore> scores,
                                int min_pages = kDefaultMinPages);

struct TrainConfig {
  double C = 1.0;
  int epochs = 5000;
  double eta0 = 0.1;
  double lambda = 0.001;  // learning rate decay: eta_t = eta0 / (1 + lambda t)
  bool standardize = true;
  std::uint64_t seed = 0;  // recorded only; training is deterministic
  std::vector<std::string> dataset_ids;

  void validate() const;
};

struct LinearModel {
  std::array<double, kNumDeciles> weights{};
  double bias = 0.0;
  std::array<double, kNumDeciles> feature_means{};
  std::array<double, kNumDeciles> feature_stds{};
  struct Meta {
    double C = 1.0;
    int epochs = 0;
    double eta0 = 0.0;
    double lambda = 0.0;
    bool standardize = true;
    std::uint64_t seed = 0;
    std::vector<std::string> dataset_ids;
    std::string scorer_id;
    std::string percentile_method = "linear-order-statistics";
    double objective = 0.0;
  } training_meta;

  void validate() const;
};

struct SiteVerdict {
  std::string site_id;
  SiteLabel label = SiteLabel::kHuman;
  double margin = 0.0;  // negative means llm
  SiteFeatures features;
};

std::array<double, kNumDeciles> standardize(const SiteFeatures& f, const LinearModel& model);

// Linear SVM on the deciles (human = +1, llm = -1) trained by full-batch
// subgradient descent on 1/2 |w|^2 + C sum max(0, 1 - y (w.z + b)). The
// iterate with the lowest objective is returned.
LinearModel train(std::span<const SiteFeatures> features, std::span<const SiteLabel> labels,
                  const TrainConfig& config = {});

double decision_value(const LinearModel& model, const SiteFeatures& f);

// A margin of exactly zero is labelled human.
SiteVerdict predict(const LinearModel& model, const SiteFeatures& f);

struct LabeledDataset {
  std::string id;
  std::vector<SiteFeatures> features;
  std::vector<SiteLabel> labels;
};

struct Confusion {
  int true_llm = 0;    // llm predicted llm
  int false_llm = 0;   // human predicted llm
  int true_human = 0;  // human predicted human
  int false_human = 0; // llm predicted human
};

struct OodMetrics {
  std::string train_id;
  std::string test_id;
  double accuracy = 0.0;
  double fpr = 0.0;  // human sites flagged llm
  double fnr = 0.0;  // llm sites passed as human
  Confusion confusion;
  std::vector<std::pair<std::string, double>> margins;
};

// Trains on `train_set` only and scores `test_set`; throws kLeakageError when
// a site id appears in both unless `check_leakage` is false.
OodMetrics evaluate_ood(const LabeledDataset& train_set, const LabeledDataset& test_set, const TrainConfig& config = {},
                        bool check_leakage = true);

std::string model_to_json(const LinearModel& model);
LinearModel model_from_json(const std::string& text);
void save_model(const LinearModel& model, const std::filesystem::path& path);
LinearModel load_model(const std::filesystem::path& path);

}  // namespace sitedetect
