#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitedetect/page_fetcher.hpp"
#include "sitedetect/page_filter.hpp"
#include "sitedetect/score_client.hpp"
#include "sitedetect/site_classifier.hpp"
#include "sitedetect/site_sampler.hpp"

namespace sitedetect {

// Every tunable of a run. Loaded from a TOML-style file with the sections
// [sampling], [fetch], [filter], [scorer], [classifier] and [run]; any key
// left out keeps its default, unknown keys are a ConfigError. Loading does
// not validate, so command-line overrides can be applied first.
struct RunConfig {
  SamplingConfig sampling;
  FetchPolicy fetch;
  std::optional<std::string> cache_dir;  // defaults to {run dir}/cache
  std::string archive_base = "https://web.archive.org";
  FilterThresholds filter;
  ScorerEndpoint scorer;
  bool use_stub_scorer = false;
  int min_pages = kDefaultMinPages;
  std::optional<std::string> model_path;
  double borderline_band = 0.25;
  int parallelism = 1;

  void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text);

// Complete snapshot with every default written out.
nlohmann::json run_config_to_json(const RunConfig& config);
RunConfig run_config_from_json(const nlohmann::json& j);

struct RunManifest {
  std::string run_id;
  std::vector<SiteSpec> sites;
  RunConfig config;
  std::string created_at;  // ISO-8601 UTC

  void validate() const;
};

nlohmann::json site_spec_to_json(const SiteSpec& site);
SiteSpec site_spec_from_json(const nlohmann::json& j);

// Manifest JSON: {"run_id": ..., "sites": [...], "config": {...}?, "created_at": ...?}.
// A missing config means defaults; a missing created_at is filled with now.
RunManifest manifest_from_json(const nlohmann::json& j);
nlohmann::json manifest_to_json(const RunManifest& manifest);
RunManifest load_manifest(const std::filesystem::path& path);

std::string utc_timestamp_now();

}  // namespace sitedetect
