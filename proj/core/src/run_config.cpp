#include "sitedetect/run_config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <chrono>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "sitedetect/errors.hpp"

namespace sitedetect {
using json = nlohmann::json;

namespace {

[[noreturn]] void config_error(const std::string& message) { throw Error(ErrorCode::kConfigError, message); }

// Values may be quoted and carry a trailing "# comment".
std::string clean_value(std::string value) {
  bool quoted = false;
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (value[i] == '"') quoted = !quoted;
    if (value[i] == '#' && !quoted) {
      value.resize(i);
      break;
    }
  }
  while (!value.empty() && (value.back() == ' ' || value.back() == '\t')) value.pop_back();
  if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
  return value;
}

long long as_int(const std::string& key, const std::string& v) {
  long long out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) config_error(key + ": expected an integer, got '" + v + "'");
  return out;
}

double as_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    double out = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return out;
  } catch (const std::exception&) {
    config_error(key + ": expected a number, got '" + v + "'");
  }
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true") return true;
  if (v == "false") return false;
  config_error(key + ": expected true or false, got '" + v + "'");
}

using Setter = std::function<void(RunConfig&, const std::string& key, const std::string& value)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"sampling.target_accepted", [](RunConfig& c, auto& k, auto& v) { c.sampling.target_accepted = static_cast<int>(as_int(k, v)); }},
      {"sampling.oversample_factor", [](RunConfig& c, auto& k, auto& v) { c.sampling.oversample_factor = static_cast<int>(as_int(k, v)); }},
      {"sampling.max_attempts", [](RunConfig& c, auto& k, auto& v) { c.sampling.max_attempts = static_cast<int>(as_int(k, v)); }},
      {"sampling.seed", [](RunConfig& c, auto& k, auto& v) { c.sampling.seed = static_cast<std::uint64_t>(as_int(k, v)); }},
      {"sampling.scheme", [](RunConfig& c, auto&, auto& v) { c.sampling.scheme = v; }},
      {"sampling.cdx_endpoint", [](RunConfig& c, auto&, auto& v) { c.sampling.cdx_endpoint = v; }},
      {"sampling.cdx_limit", [](RunConfig& c, auto& k, auto& v) { c.sampling.cdx_limit = static_cast<int>(as_int(k, v)); }},
      {"sampling.fetch_cdx_from_archive", [](RunConfig& c, auto& k, auto& v) { c.sampling.fetch_cdx_from_archive = as_bool(k, v); }},
      {"fetch.per_host_min_delay_ms", [](RunConfig& c, auto& k, auto& v) { c.fetch.per_host_min_delay = std::chrono::milliseconds(as_int(k, v)); }},
      {"fetch.timeout_ms", [](RunConfig& c, auto& k, auto& v) { c.fetch.timeout = std::chrono::milliseconds(as_int(k, v)); }},
      {"fetch.max_redirects", [](RunConfig& c, auto& k, auto& v) { c.fetch.max_redirects = static_cast<int>(as_int(k, v)); }},
      {"fetch.max_body_bytes", [](RunConfig& c, auto& k, auto& v) { c.fetch.max_body_bytes = static_cast<std::size_t>(as_int(k, v)); }},
      {"fetch.user_agent", [](RunConfig& c, auto&, auto& v) { c.fetch.user_agent = v; }},
      {"fetch.respect_robots", [](RunConfig& c, auto& k, auto& v) { c.fetch.respect_robots = as_bool(k, v); }},
      {"fetch.cache_dir", [](RunConfig& c, auto&, auto& v) { c.cache_dir = v; }},
      {"fetch.archive_base", [](RunConfig& c, auto&, auto& v) { c.archive_base = v; }},
      {"filter.min_words", [](RunConfig& c, auto& k, auto& v) { c.filter.min_words = static_cast<int>(as_int(k, v)); }},
      {"filter.max_link_ratio", [](RunConfig& c, auto& k, auto& v) { c.filter.max_link_ratio = as_double(k, v); }},
      {"filter.max_list_ratio", [](RunConfig& c, auto& k, auto& v) { c.filter.max_list_ratio = as_double(k, v); }},
      {"filter.max_table_ratio", [](RunConfig& c, auto& k, auto& v) { c.filter.max_table_ratio = as_double(k, v); }},
      {"filter.shingle_size", [](RunConfig& c, auto& k, auto& v) { c.filter.shingle_size = static_cast<int>(as_int(k, v)); }},
      {"filter.dup_jaccard_max", [](RunConfig& c, auto& k, auto& v) { c.filter.dup_jaccard_max = as_double(k, v); }},
      {"scorer.base_url", [](RunConfig& c, auto&, auto& v) { c.scorer.base_url = v; }},
      {"scorer.batch_size", [](RunConfig& c, auto& k, auto& v) { c.scorer.batch_size = static_cast<int>(as_int(k, v)); }},
      {"scorer.max_retries", [](RunConfig& c, auto& k, auto& v) { c.scorer.max_retries = static_cast<int>(as_int(k, v)); }},
      {"scorer.request_timeout_ms", [](RunConfig& c, auto& k, auto& v) { c.scorer.request_timeout = std::chrono::milliseconds(as_int(k, v)); }},
      {"scorer.backoff_base_ms", [](RunConfig& c, auto& k, auto& v) { c.scorer.backoff_base = std::chrono::milliseconds(as_int(k, v)); }},
      {"scorer.max_inflight", [](RunConfig& c, auto& k, auto& v) { c.scorer.max_inflight = static_cast<int>(as_int(k, v)); }},
      {"scorer.stub", [](RunConfig& c, auto& k, auto& v) { c.use_stub_scorer = as_bool(k, v); }},
      {"classifier.min_pages", [](RunConfig& c, auto& k, auto& v) { c.min_pages = static_cast<int>(as_int(k, v)); }},
      {"classifier.model_path", [](RunConfig& c, auto&, auto& v) { c.model_path = v; }},
      {"classifier.borderline_band", [](RunConfig& c, auto& k, auto& v) { c.borderline_band = as_double(k, v); }},
      {"run.parallelism", [](RunConfig& c, auto& k, auto& v) { c.parallelism = static_cast<int>(as_int(k, v)); }},
  };
  return table;
}

std::string format_time(std::chrono::system_clock::time_point tp) {
  std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

std::string utc_timestamp_now() { return format_time(std::chrono::system_clock::now()); }

void RunConfig::validate() const {
  try {
    sampling.validate();
    fetch.validate();
    filter.validate();
    if (!use_stub_scorer) {
      if (scorer.base_url.empty()) config_error("scorer.base_url is required unless scorer.stub = true");
    }
    scorer.validate();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigError) throw;
    config_error(e.what());
  }
  if (min_pages < 1) config_error("classifier.min_pages must be >= 1");
  if (!(borderline_band >= 0.0)) config_error("classifier.borderline_band must be >= 0");
  if (parallelism < 1) config_error("run.parallelism must be >= 1");
}

RunConfig parse_run_config(const std::string& text) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    config_error(std::string("config syntax: ") + e.what());
  }
  RunConfig config;
  for (const auto& [section, body] : tree) {
    if (body.empty()) config_error("key '" + section + "' must sit inside a section");
    for (const auto& [key, node] : body) {
      std::string full = section + "." + key;
      auto it = setters().find(full);
      if (it == setters().end()) config_error("unknown config key " + full);
      it->second(config, full, clean_value(node.get_value<std::string>()));
    }
  }
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read config " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

json run_config_to_json(const RunConfig& c) {
  return {
      {"sampling",
       {{"target_accepted", c.sampling.target_accepted},
        {"oversample_factor", c.sampling.oversample_factor},
        {"max_attempts", c.sampling.max_attempts},
        {"seed", c.sampling.seed},
        {"scheme", c.sampling.scheme},
        {"cdx_endpoint", c.sampling.cdx_endpoint},
        {"cdx_limit", c.sampling.cdx_limit},
        {"fetch_cdx_from_archive", c.sampling.fetch_cdx_from_archive}}},
      {"fetch",
       {{"per_host_min_delay_ms", c.fetch.per_host_min_delay.count()},
        {"timeout_ms", c.fetch.timeout.count()},
        {"max_redirects", c.fetch.max_redirects},
        {"max_body_bytes", c.fetch.max_body_bytes},
        {"user_agent", c.fetch.user_agent},
        {"respect_robots", c.fetch.respect_robots},
        {"cache_dir", c.cache_dir ? json(*c.cache_dir) : json(nullptr)},
        {"archive_base", c.archive_base}}},
      {"filter",
       {{"min_words", c.filter.min_words},
        {"max_link_ratio", c.filter.max_link_ratio},
        {"max_list_ratio", c.filter.max_list_ratio},
        {"max_table_ratio", c.filter.max_table_ratio},
        {"shingle_size", c.filter.shingle_size},
        {"dup_jaccard_max", c.filter.dup_jaccard_max}}},
      {"scorer",
       {{"base_url", c.scorer.base_url},
        {"batch_size", c.scorer.batch_size},
        {"max_retries", c.scorer.max_retries},
        {"request_timeout_ms", c.scorer.request_timeout.count()},
        {"backoff_base_ms", c.scorer.backoff_base.count()},
        {"max_inflight", c.scorer.max_inflight},
        {"stub", c.use_stub_scorer}}},
      {"classifier",
       {{"min_pages", c.min_pages},
        {"model_path", c.model_path ? json(*c.model_path) : json(nullptr)},
        {"borderline_band", c.borderline_band},
        {"percentile_method", "linear-order-statistics"}}},
      {"run", {{"parallelism", c.parallelism}}},
  };
}

RunConfig run_config_from_json(const json& j) {
  RunConfig c;
  try {
    for (const auto& [section, body] : j.items()) {
      for (const auto& [key, value] : body.items()) {
        std::string full = section + "." + key;
        if (full == "classifier.percentile_method") continue;
        if (value.is_null()) continue;
        auto it = setters().find(full);
        if (it == setters().end()) config_error("unknown config key " + full);
        std::string text;
        if (value.is_string()) {
          text = value.get<std::string>();
        } else {
          text = value.dump();
        }
        it->second(c, full, text);
      }
    }
  } catch (const json::exception& e) {
    config_error(std::string("config snapshot: ") + e.what());
  }
  return c;
}

void RunManifest::validate() const {
  if (run_id.empty()) config_error("manifest run_id is empty");
  std::set<std::string> ids;
  for (const auto& s : sites) {
    try {
      s.validate();
    } catch (const Error& e) {
      config_error(e.what());
    }
    if (!ids.insert(s.site_id).second) config_error("duplicate site_id " + s.site_id);
  }
}

json site_spec_to_json(const SiteSpec& s) {
  json j = {{"site_id", s.site_id}, {"host", s.host}, {"label", std::string(to_string(s.label))},
            {"cohort_tags", s.cohort_tags}};
  j["search_rank"] = s.search_rank ? json(*s.search_rank) : json(nullptr);
  if (!s.pages.empty()) j["pages"] = s.pages;
  return j;
}

SiteSpec site_spec_from_json(const json& j) {
  SiteSpec s;
  s.site_id = j.at("site_id").get<std::string>();
  s.host = j.at("host").get<std::string>();
  s.label = parse_site_label(j.value("label", std::string("unknown")));
  s.cohort_tags = j.value("cohort_tags", std::vector<std::string>{});
  if (j.contains("search_rank") && !j["search_rank"].is_null()) s.search_rank = j["search_rank"].get<int>();
  s.pages = j.value("pages", std::vector<std::string>{});
  return s;
}

RunManifest manifest_from_json(const json& j) {
  RunManifest m;
  try {
    m.run_id = j.at("run_id").get<std::string>();
    for (const auto& s : j.at("sites")) m.sites.push_back(site_spec_from_json(s));
    if (j.contains("config")) m.config = run_config_from_json(j["config"]);
    m.created_at = j.value("created_at", utc_timestamp_now());
  } catch (const json::exception& e) {
    config_error(std::string("manifest: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConfigError) throw;
    config_error(std::string("manifest: ") + e.what());
  }
  m.validate();
  return m;
}

json manifest_to_json(const RunManifest& m) {
  json sites = json::array();
  for (const auto& s : m.sites) sites.push_back(site_spec_to_json(s));
  return {{"run_id", m.run_id}, {"created_at", m.created_at}, {"sites", sites}, {"config", run_config_to_json(m.config)}};
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot read manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    config_error("manifest " + path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

}  // namespace sitedetect
