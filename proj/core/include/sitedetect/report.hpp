#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sitedetect/study_runner.hpp"

namespace sitedetect {

// 100 * count / total rounded half-to-even at two decimals, computed on
// integers so that ties are exact. Zero when total is zero.
double percent_half_even(std::int64_t count, std::int64_t total);

struct CohortStats {
  std::string tag;
  std::int64_t total = 0;
  std::int64_t llm_count = 0;
  double llm_pct = 0.0;
};

struct PrevalenceReport {
  std::int64_t total_classified = 0;
  std::int64_t llm_count = 0;
  double llm_pct = 0.0;
  std::vector<CohortStats> cohorts;  // sorted by tag
  std::int64_t pages_total = 0;      // accepted pages of classified sites
  std::int64_t borderline_count = 0;
  std::map<std::string, std::int64_t> status_counts;  // all sites, every status
};

// Counts classified sites only. Cohorts are the sites' cohort tags, limited
// to tags starting with `cohort_prefix` when it is non-empty.
PrevalenceReport prevalence_report(std::span<const SiteResult> results, const std::string& cohort_prefix = {});

nlohmann::json report_to_json(const PrevalenceReport& report);

// Throws kInvalidArgument when a percentage disagrees with its counts.
void check_report_consistency(const PrevalenceReport& report);

enum class RankTestMethod { kAuto, kExact, kNormal };

struct RankTestResult {
  double u = 0.0;  // Mann-Whitney U of the first group
  double z = 0.0;
  double p_two_sided = 1.0;
  bool exact = false;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

// Largest number of group assignments enumerated by kAuto before switching
// to the normal approximation.
inline constexpr std::uint64_t kExactAssignmentLimit = 200'000;

// Mann-Whitney U with midranks. The exact p counts the assignments of the
// pooled midranks whose U lies at least as far from n1 n2 / 2 as the observed
// one; the normal approximation uses the tie-corrected variance and a 0.5
// continuity correction. kAuto is exact while C(n1 + n2, n1) stays within
// kExactAssignmentLimit. Throws kEmptyGroup when a group is empty.
RankTestResult rank_significance_test(std::span<const double> first, std::span<const double> second,
                                      RankTestMethod method = RankTestMethod::kAuto);

// Best search ranks of classified sites, split by predicted label.
struct RankGroups {
  std::vector<double> llm;
  std::vector<double> human;
};
RankGroups rank_groups(std::span<const SiteResult> results);

struct CdfRow {
  double score = 0.0;
  double fraction = 0.0;
};

// Sorted scores with cumulative fraction k/n.
std::vector<CdfRow> empirical_cdf(std::span<const double> scores);

enum class CdfGrouping { kLabel, kSite };

// Page scores per group. Label groups use the predicted label when a verdict
// exists and the manifest label otherwise; "llm" and "human" are always present.
std::map<std::string, std::vector<double>> cdf_groups(std::span<const SiteResult> results, CdfGrouping grouping);

void write_cdf_csv(const std::filesystem::path& path, std::span<const CdfRow> rows);

// Writes cdf_{label|site}_{group}.csv files into `dir`, returning their paths.
std::vector<std::filesystem::path> cdf_export(std::span<const SiteResult> results, CdfGrouping grouping,
                                              const std::filesystem::path& dir);

}  // namespace sitedetect
