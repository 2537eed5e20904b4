#include "sitedetect/site_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <set>
#include <sstream>

#include "sitedetect/errors.hpp"

namespace sitedetect {
using json = nlohmann::json;

namespace {
constexpr double kStdFloor = 1e-9;

double label_sign(SiteLabel label) {
  switch (label) {
    case SiteLabel::kHuman: return 1.0;
    case SiteLabel::kLlm: return -1.0;
    case SiteLabel::kUnknown: break;
  }
  throw Error(ErrorCode::kInvalidArgument, "training labels must be llm or human");
}
}  // namespace

Deciles compute_deciles(std::span<const double> scores) {
  if (scores.empty()) throw Error(ErrorCode::kEmptyScores, "cannot compute deciles of an empty score list");
  std::vector<double> s(scores.begin(), scores.end());
  std::sort(s.begin(), s.end());
  Deciles out{};
  const double last = static_cast<double>(s.size() - 1);
  for (std::size_t k = 1; k <= kNumDeciles; ++k) {
    double h = last * static_cast<double>(k) / 10.0;
    double lo = std::floor(h);
    auto i = static_cast<std::size_t>(lo);
    double frac = h - lo;
    out[k - 1] = (i + 1 < s.size() && frac > 0.0) ? s[i] + frac * (s[i + 1] - s[i]) : s[i];
  }
  return out;
}

void SiteFeatures::validate(int min_pages) const {
  for (double d : deciles) {
    if (!std::isfinite(d)) throw Error(ErrorCode::kInvalidFeature, "non-finite decile for site " + site_id);
  }
  if (!std::is_sorted(deciles.begin(), deciles.end())) {
    throw Error(ErrorCode::kInvalidFeature, "deciles not non-decreasing for site " + site_id);
  }
  if (n_pages < min_pages) {
    throw Error(ErrorCode::kInsufficientPages, "site " + site_id + " has " + std::to_string(n_pages) +
                                                   " pages, needs " + std::to_string(min_pages));
  }
}

SiteFeatures make_site_features(std::string site_id, std::span<const PageScore> scores, int min_pages) {
  if (static_cast<int>(scores.size()) < min_pages) {
    throw Error(ErrorCode::kInsufficientPages, "site " + site_id + " has " + std::to_string(scores.size()) +
                                                   " scored pages, needs " + std::to_string(min_pages));
  }
  std::vector<double> values;
  values.reserve(scores.size());
  std::string scorer_id = scores.empty() ? std::string() : scores.front().scorer_id;
  for (const auto& s : scores) {
    if (s.scorer_id != scorer_id) {
      throw Error(ErrorCode::kInvalidArgument, "site " + site_id + " mixes scorers " + scorer_id + " and " + s.scorer_id);
    }
    values.push_back(s.score);
  }
  SiteFeatures f;
  f.site_id = std::move(site_id);
  f.deciles = compute_deciles(values);
  f.n_pages = static_cast<int>(scores.size());
  f.scorer_id = std::move(scorer_id);
  return f;
}

void TrainConfig::validate() const {
  if (!(C > 0.0) || !std::isfinite(C)) throw Error(ErrorCode::kInvalidArgument, "C must be positive");
  if (epochs < 1) throw Error(ErrorCode::kInvalidArgument, "epochs must be >= 1");
  if (!(eta0 > 0.0)) throw Error(ErrorCode::kInvalidArgument, "eta0 must be positive");
  if (!(lambda >= 0.0)) throw Error(ErrorCode::kInvalidArgument, "lambda must be >= 0");
}

void LinearModel::validate() const {
  for (std::size_t i = 0; i < kNumDeciles; ++i) {
    if (!std::isfinite(weights[i])) throw Error(ErrorCode::kModelFormatError, "non-finite weight");
    if (!std::isfinite(feature_means[i])) throw Error(ErrorCode::kModelFormatError, "non-finite feature mean");
    if (!(feature_stds[i] > 0.0) || !std::isfinite(feature_stds[i])) {
      throw Error(ErrorCode::kModelFormatError, "feature stds must be positive and finite");
    }
  }
  if (!std::isfinite(bias)) throw Error(ErrorCode::kModelFormatError, "non-finite bias");
}

std::array<double, kNumDeciles> standardize(const SiteFeatures& f, const LinearModel& model) {
  std::array<double, kNumDeciles> z{};
  for (std::size_t i = 0; i < kNumDeciles; ++i) z[i] = (f.deciles[i] - model.feature_means[i]) / model.feature_stds[i];
  return z;
}

LinearModel train(std::span<const SiteFeatures> features, std::span<const SiteLabel> labels, const TrainConfig& config) {
  config.validate();
  if (features.size() != labels.size()) throw Error(ErrorCode::kInvalidArgument, "features and labels differ in length");
  const std::size_t n = features.size();
  std::vector<double> y(n);
  bool has_llm = false, has_human = false;
  for (std::size_t i = 0; i < n; ++i) {
    y[i] = label_sign(labels[i]);
    (y[i] > 0 ? has_human : has_llm) = true;
    for (double d : features[i].deciles) {
      if (std::isnan(d) || !std::isfinite(d)) {
        throw Error(ErrorCode::kInvalidFeature, "non-finite feature for site " + features[i].site_id);
      }
    }
  }
  if (!has_llm || !has_human) throw Error(ErrorCode::kDegenerateTraining, "training data needs both llm and human sites");

  LinearModel model;
  model.feature_means.fill(0.0);
  model.feature_stds.fill(1.0);
  if (config.standardize) {
    for (std::size_t j = 0; j < kNumDeciles; ++j) {
      double mean = 0.0;
      for (const auto& f : features) mean += f.deciles[j];
      mean /= static_cast<double>(n);
      double var = 0.0;
      for (const auto& f : features) var += (f.deciles[j] - mean) * (f.deciles[j] - mean);
      var /= static_cast<double>(n);
      model.feature_means[j] = mean;
      model.feature_stds[j] = std::max(std::sqrt(var), kStdFloor);
    }
  }
  std::vector<std::array<double, kNumDeciles>> z(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = standardize(features[i], model);

  std::array<double, kNumDeciles> w{};
  double b = 0.0;
  auto objective = [&](const std::array<double, kNumDeciles>& wv, double bv) {
    double reg = 0.0;
    for (double x : wv) reg += x * x;
    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double m = bv;
      for (std::size_t j = 0; j < kNumDeciles; ++j) m += wv[j] * z[i][j];
      loss += std::max(0.0, 1.0 - y[i] * m);
    }
    return 0.5 * reg + config.C * loss;
  };

  std::array<double, kNumDeciles> best_w = w;
  double best_b = b;
  double best_obj = objective(w, b);
  for (int t = 0; t < config.epochs; ++t) {
    std::array<double, kNumDeciles> gw = w;
    double gb = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double m = b;
      for (std::size_t j = 0; j < kNumDeciles; ++j) m += w[j] * z[i][j];
      if (y[i] * m < 1.0) {
        for (std::size_t j = 0; j < kNumDeciles; ++j) gw[j] -= config.C * y[i] * z[i][j];
        gb -= config.C * y[i];
      }
    }
    double eta = config.eta0 / (1.0 + config.lambda * static_cast<double>(t));
    for (std::size_t j = 0; j < kNumDeciles; ++j) w[j] -= eta * gw[j];
    b -= eta * gb;
    double obj = objective(w, b);
    if (obj < best_obj) {
      best_obj = obj;
      best_w = w;
      best_b = b;
    }
  }

  model.weights = best_w;
  model.bias = best_b;
  auto& meta = model.training_meta;
  meta.C = config.C;
  meta.epochs = config.epochs;
  meta.eta0 = config.eta0;
  meta.lambda = config.lambda;
  meta.standardize = config.standardize;
  meta.seed = config.seed;
  meta.dataset_ids = config.dataset_ids;
  meta.scorer_id = n > 0 ? features.front().scorer_id : std::string();
  meta.objective = best_obj;
  model.validate();
  return model;
}

double decision_value(const LinearModel& model, const SiteFeatures& f) {
  auto z = standardize(f, model);
  double m = model.bias;
  for (std::size_t j = 0; j < kNumDeciles; ++j) m += model.weights[j] * z[j];
  return m;
}

SiteVerdict predict(const LinearModel& model, const SiteFeatures& f) {
  SiteVerdict v;
  v.site_id = f.site_id;
  v.margin = decision_value(model, f);
  v.label = v.margin < 0.0 ? SiteLabel::kLlm : SiteLabel::kHuman;
  v.features = f;
  return v;
}

OodMetrics evaluate_ood(const LabeledDataset& train_set, const LabeledDataset& test_set, const TrainConfig& config,
                        bool check_leakage) {
  if (test_set.features.size() != test_set.labels.size()) {
    throw Error(ErrorCode::kInvalidArgument, "test features and labels differ in length");
  }
  if (check_leakage) {
    if (!train_set.id.empty() && train_set.id == test_set.id) {
      throw Error(ErrorCode::kLeakageError, "train and test share dataset id " + train_set.id);
    }
    std::set<std::string> seen;
    for (const auto& f : train_set.features) seen.insert(f.site_id);
    for (const auto& f : test_set.features) {
      if (seen.count(f.site_id)) throw Error(ErrorCode::kLeakageError, "site " + f.site_id + " is in both train and test");
    }
  }
  TrainConfig cfg = config;
  if (cfg.dataset_ids.empty()) cfg.dataset_ids = {train_set.id};
  LinearModel model = train(train_set.features, train_set.labels, cfg);

  OodMetrics m;
  m.train_id = train_set.id;
  m.test_id = test_set.id;
  int humans = 0, llms = 0;
  for (std::size_t i = 0; i < test_set.features.size(); ++i) {
    SiteVerdict v = predict(model, test_set.features[i]);
    m.margins.emplace_back(v.site_id, v.margin);
    bool truth_llm = test_set.labels[i] == SiteLabel::kLlm;
    bool said_llm = v.label == SiteLabel::kLlm;
    if (truth_llm) {
      ++llms;
      (said_llm ? m.confusion.true_llm : m.confusion.false_human)++;
    } else {
      ++humans;
      (said_llm ? m.confusion.false_llm : m.confusion.true_human)++;
    }
  }
  int total = humans + llms;
  m.accuracy = total ? static_cast<double>(m.confusion.true_llm + m.confusion.true_human) / total : 0.0;
  m.fpr = humans ? static_cast<double>(m.confusion.false_llm) / humans : 0.0;
  m.fnr = llms ? static_cast<double>(m.confusion.false_human) / llms : 0.0;
  return m;
}

std::string model_to_json(const LinearModel& model) {
  const auto& meta = model.training_meta;
  json j = {
      {"weights", model.weights},
      {"bias", model.bias},
      {"feature_means", model.feature_means},
      {"feature_stds", model.feature_stds},
      {"training_meta",
       {{"C", meta.C},
        {"epochs", meta.epochs},
        {"eta0", meta.eta0},
        {"lambda", meta.lambda},
        {"standardize", meta.standardize},
        {"seed", meta.seed},
        {"dataset_ids", meta.dataset_ids},
        {"scorer_id", meta.scorer_id},
        {"percentile_method", meta.percentile_method},
        {"objective", meta.objective}}},
  };
  return j.dump(2);
}

LinearModel model_from_json(const std::string& text) {
  LinearModel model;
  try {
    json j = json::parse(text);
    auto read_vec = [&](const char* key, std::array<double, kNumDeciles>& out) {
      const json& arr = j.at(key);
      if (!arr.is_array() || arr.size() != kNumDeciles) {
        throw Error(ErrorCode::kModelFormatError, std::string(key) + " must hold 9 numbers");
      }
      for (std::size_t i = 0; i < kNumDeciles; ++i) {
        if (!arr[i].is_number()) throw Error(ErrorCode::kModelFormatError, std::string(key) + " must hold numbers");
        out[i] = arr[i].get<double>();
      }
    };
    read_vec("weights", model.weights);
    read_vec("feature_means", model.feature_means);
    read_vec("feature_stds", model.feature_stds);
    if (!j.at("bias").is_number()) throw Error(ErrorCode::kModelFormatError, "bias must be a number");
    model.bias = j.at("bias").get<double>();
    const json& m = j.at("training_meta");
    auto& meta = model.training_meta;
    meta.C = m.at("C").get<double>();
    meta.epochs = m.at("epochs").get<int>();
    meta.eta0 = m.value("eta0", 0.0);
    meta.lambda = m.value("lambda", 0.0);
    meta.standardize = m.value("standardize", true);
    meta.seed = m.value("seed", std::uint64_t{0});
    meta.dataset_ids = m.value("dataset_ids", std::vector<std::string>{});
    meta.scorer_id = m.value("scorer_id", std::string());
    meta.percentile_method = m.value("percentile_method", std::string("linear-order-statistics"));
    meta.objective = m.value("objective", 0.0);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kModelFormatError, std::string("bad model file: ") + e.what());
  }
  model.validate();
  return model;
}

void save_model(const LinearModel& model, const std::filesystem::path& path) {
  model.validate();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write model to " + path.string());
  out << model_to_json(model) << '\n';
  if (!out) throw Error(ErrorCode::kIoError, "failed writing model to " + path.string());
}

LinearModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read model from " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace sitedetect
