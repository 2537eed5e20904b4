#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>

#include "sitedetect/errors.hpp"
#include "sitedetect/page_fetcher.hpp"
#include "sitedetect/report.hpp"
#include "sitedetect/run_config.hpp"
#include "sitedetect/score_client.hpp"
#include "sitedetect/site_classifier.hpp"
#include "sitedetect/study_runner.hpp"
#include "sitedetect/transport.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace sitedetect;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

struct RunArgs {
  std::string manifest;
  std::string out;
  std::string config;
  std::string model;
  std::string scorer_url;
  bool stub = false;
  int parallelism = 0;
};

struct TrainArgs {
  std::vector<std::string> features;
  std::string labels;
  std::string model;
  double c = 1.0;
  int epochs = 5000;
  bool raw = false;
};

struct EvalArgs {
  std::string train;
  std::string test;
  std::string labels;
  bool allow_overlap = false;
};

fs::path sites_file(const fs::path& p) { return fs::is_directory(p) ? p / "sites.jsonl" : p; }

std::map<std::string, SiteLabel> read_labels(const std::string& path) {
  std::map<std::string, SiteLabel> out;
  if (path.empty()) return out;
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kConfigError, "cannot read labels file " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw Error(ErrorCode::kConfigError, "labels line needs site_id,label: " + line);
    std::string id = line.substr(0, comma);
    std::string label = line.substr(comma + 1);
    if (id == "site_id") continue;
    out[id] = parse_site_label(label);
  }
  return out;
}

LabeledDataset read_dataset(const std::string& path, const std::map<std::string, SiteLabel>& labels) {
  LabeledDataset ds;
  ds.id = fs::path(path).filename().string();
  if (ds.id == "sites.jsonl") ds.id = fs::path(path).parent_path().filename().string();
  std::ifstream in(sites_file(path));
  if (!in) throw Error(ErrorCode::kConfigError, "cannot read features from " + path);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line);
    if (!j.contains("features") || j["features"].is_null()) continue;
    SiteFeatures f = features_from_json(j["features"]);
    SiteLabel label = parse_site_label(j.value("label", std::string("unknown")));
    if (auto it = labels.find(f.site_id); it != labels.end()) label = it->second;
    if (label == SiteLabel::kUnknown) continue;
    ds.features.push_back(std::move(f));
    ds.labels.push_back(label);
  }
  return ds;
}

int cmd_run(const RunArgs& args) {
  RunManifest manifest = load_manifest(args.manifest);
  if (!args.config.empty()) manifest.config = load_run_config(args.config);
  if (args.stub) manifest.config.use_stub_scorer = true;
  if (!args.scorer_url.empty()) manifest.config.scorer.base_url = args.scorer_url;
  if (args.parallelism > 0) manifest.config.parallelism = args.parallelism;
  if (!args.model.empty()) manifest.config.model_path = args.model;
  manifest.config.validate();

  std::optional<LinearModel> model;
  if (manifest.config.model_path) {
    try {
      model = load_model(*manifest.config.model_path);
    } catch (const Error& e) {
      throw Error(ErrorCode::kConfigError, e.what());
    }
  }

  FetcherOptions fopts;
  fopts.archive_base = manifest.config.archive_base;
  fopts.cache_dir = manifest.config.cache_dir ? fs::path(*manifest.config.cache_dir) : fs::path(args.out) / "cache";
  Fetcher fetcher(manifest.config.fetch, make_http_transport(), fopts);

  std::unique_ptr<Scorer> scorer;
  if (manifest.config.use_stub_scorer) {
    scorer = std::make_unique<StubScorer>();
  } else {
    scorer = std::make_unique<HttpScorer>(manifest.config.scorer);
    if (!scorer->healthy()) spdlog::warn("scorer at {} did not pass its health check", manifest.config.scorer.base_url);
  }

  RunContext context{fetcher, *scorer, model ? &*model : nullptr};
  auto results = run_batch(manifest, args.out, context, BatchOptions{manifest.config.parallelism, std::nullopt});

  PrevalenceReport report = prevalence_report(results);
  RunFiles files{args.out};
  std::ofstream(files.report()) << report_to_json(report).dump(2) << '\n';

  int partial = 0;
  for (const auto& r : results) {
    if (r.status == SiteStatus::kUnreachable || r.status == SiteStatus::kFailed) ++partial;
  }
  std::cout << report_to_json(report).dump(2) << '\n';
  if (partial > 0) {
    spdlog::warn("{} of {} sites unreachable or failed", partial, results.size());
    return kExitPartial;
  }
  return kExitOk;
}

int cmd_train(const TrainArgs& args) {
  auto labels = read_labels(args.labels);
  LabeledDataset all;
  for (const auto& p : args.features) {
    LabeledDataset ds = read_dataset(p, labels);
    all.features.insert(all.features.end(), ds.features.begin(), ds.features.end());
    all.labels.insert(all.labels.end(), ds.labels.begin(), ds.labels.end());
    all.id += (all.id.empty() ? "" : "+") + ds.id;
  }
  TrainConfig cfg;
  cfg.C = args.c;
  cfg.epochs = args.epochs;
  cfg.standardize = !args.raw;
  for (const auto& p : args.features) cfg.dataset_ids.push_back(fs::path(p).filename().string());
  LinearModel model = train(all.features, all.labels, cfg);
  save_model(model, args.model);
  int correct = 0;
  for (std::size_t i = 0; i < all.features.size(); ++i) correct += predict(model, all.features[i]).label == all.labels[i];
  std::cout << json{{"model", args.model},
                    {"sites", all.features.size()},
                    {"training_accuracy", all.features.empty() ? 0.0 : double(correct) / all.features.size()}}
                   .dump(2)
            << '\n';
  return kExitOk;
}

int cmd_eval(const EvalArgs& args) {
  auto labels = read_labels(args.labels);
  LabeledDataset train_set = read_dataset(args.train, labels);
  LabeledDataset test_set = read_dataset(args.test, labels);
  OodMetrics m = evaluate_ood(train_set, test_set, {}, !args.allow_overlap);
  json margins = json::object();
  for (const auto& [id, margin] : m.margins) margins[id] = margin;
  std::cout << json{{"train", m.train_id},
                    {"test", m.test_id},
                    {"accuracy", m.accuracy},
                    {"fpr", m.fpr},
                    {"fnr", m.fnr},
                    {"confusion",
                     {{"true_llm", m.confusion.true_llm},
                      {"false_llm", m.confusion.false_llm},
                      {"true_human", m.confusion.true_human},
                      {"false_human", m.confusion.false_human}}},
                    {"margins", margins}}
                   .dump(2)
            << '\n';
  return kExitOk;
}

int cmd_report(const std::string& run, bool cohorts, const std::string& prefix) {
  RunFiles files{run};
  auto results = read_results_log(files.results());
  PrevalenceReport report = prevalence_report(results, prefix);
  if (!cohorts) report.cohorts.clear();
  check_report_consistency(report);
  json j = report_to_json(report);
  std::ofstream(files.report()) << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
  return kExitOk;
}

int cmd_ranktest(const std::string& run, const std::string& method_name) {
  auto results = read_results_log(RunFiles{run}.results());
  RankGroups groups = rank_groups(results);
  RankTestMethod method = method_name == "exact"    ? RankTestMethod::kExact
                          : method_name == "normal" ? RankTestMethod::kNormal
                                                    : RankTestMethod::kAuto;
  RankTestResult r = rank_significance_test(groups.llm, groups.human, method);
  std::cout << json{{"test", "mann-whitney-u"},
                    {"groups", {{"llm", r.n1}, {"human", r.n2}}},
                    {"u_llm", r.u},
                    {"z", r.z},
                    {"p_two_sided", r.p_two_sided},
                    {"exact", r.exact}}
                   .dump(2)
            << '\n';
  return kExitOk;
}

int cmd_cdf(const std::string& run, const std::string& group_by, const std::string& out) {
  auto results = read_results_log(RunFiles{run}.results());
  CdfGrouping grouping = group_by == "site" ? CdfGrouping::kSite : CdfGrouping::kLabel;
  for (const auto& p : cdf_export(results, grouping, out.empty() ? fs::path(run) : fs::path(out))) {
    std::cout << p.string() << '\n';
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Detect LLM-dominant websites from sampled page scores"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  RunArgs run_args;
  auto* run = app.add_subcommand("run", "Sample, fetch, filter, score and classify the sites of a manifest");
  run->add_option("--manifest", run_args.manifest, "Manifest JSON")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_args.out, "Run directory (resumed when it already holds results)")->required();
  run->add_option("--config", run_args.config, "TOML-style run config; replaces the manifest's config")
      ->check(CLI::ExistingFile);
  run->add_option("--model", run_args.model, "Trained model JSON; without it sites are scored but not classified");
  run->add_option("--scorer-url", run_args.scorer_url, "Scoring service base URL");
  run->add_flag("--stub-scorer", run_args.stub, "Use the built-in deterministic stub scorer");
  run->add_option("--parallelism", run_args.parallelism, "Concurrent site workers")->check(CLI::PositiveNumber);

  TrainArgs train_args;
  auto* train_cmd = app.add_subcommand("train", "Train the site classifier on features from sites.jsonl files");
  train_cmd->add_option("--features", train_args.features, "sites.jsonl files or run directories")->required();
  train_cmd->add_option("--labels", train_args.labels, "CSV of site_id,label overriding the recorded labels");
  train_cmd->add_option("--model", train_args.model, "Output model JSON")->required();
  train_cmd->add_option("--C", train_args.c, "Hinge loss weight")->check(CLI::PositiveNumber);
  train_cmd->add_option("--epochs", train_args.epochs, "Full-batch epochs")->check(CLI::PositiveNumber);
  train_cmd->add_flag("--raw", train_args.raw, "Train on raw deciles without standardization");

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Train on one dataset and evaluate on another");
  eval->add_option("--train", eval_args.train, "Training sites.jsonl or run directory")->required();
  eval->add_option("--test", eval_args.test, "Test sites.jsonl or run directory")->required();
  eval->add_option("--labels", eval_args.labels, "CSV of site_id,label overriding the recorded labels");
  eval->add_flag("--allow-overlap", eval_args.allow_overlap, "Skip the train/test site overlap check");

  std::string report_run, report_prefix;
  bool report_cohorts = false;
  auto* report = app.add_subcommand("report", "Prevalence report of a run");
  report->add_option("--run", report_run, "Run directory")->required()->check(CLI::ExistingDirectory);
  report->add_flag("--cohorts", report_cohorts, "Break down by cohort tag");
  report->add_option("--cohort-prefix", report_prefix, "Only cohort tags with this prefix");

  std::string rank_run, rank_method = "auto";
  auto* ranktest = app.add_subcommand("ranktest", "Compare search ranks of llm and human sites");
  ranktest->add_option("--run", rank_run, "Run directory")->required()->check(CLI::ExistingDirectory);
  ranktest->add_option("--method", rank_method, "auto, exact or normal")
      ->check(CLI::IsMember({"auto", "exact", "normal"}));

  std::string cdf_run, cdf_group = "label", cdf_out;
  auto* cdf = app.add_subcommand("cdf", "Export empirical CDFs of page scores as CSV");
  cdf->add_option("--run", cdf_run, "Run directory")->required()->check(CLI::ExistingDirectory);
  cdf->add_option("--group-by", cdf_group, "label or site")->check(CLI::IsMember({"label", "site"}));
  cdf->add_option("--out", cdf_out, "Output directory (defaults to the run directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  auto logger = spdlog::stderr_color_mt("detect");
  spdlog::set_default_logger(logger);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::info);

  try {
    if (*run) return cmd_run(run_args);
    if (*train_cmd) return cmd_train(train_args);
    if (*eval) return cmd_eval(eval_args);
    if (*report) return cmd_report(report_run, report_cohorts, report_prefix);
    if (*ranktest) return cmd_ranktest(rank_run, rank_method);
    if (*cdf) return cmd_cdf(cdf_run, cdf_group, cdf_out);
  } catch (const Error& e) {
    spdlog::error("{}: {}", error_code_name(e.code()), e.what());
    return e.code() == ErrorCode::kConfigError ? kExitConfig : kExitFailure;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kExitFailure;
  }
  return kExitFailure;
}
