#include "sitedetect/report.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "sitedetect/errors.hpp"

namespace sitedetect {
using json = nlohmann::json;
namespace fs = std::filesystem;

double percent_half_even(std::int64_t count, std::int64_t total) {
  if (total <= 0) return 0.0;
  if (count < 0 || count > total) throw Error(ErrorCode::kInvalidArgument, "count must lie in [0, total]");
  // Hundredths of a percent: 10000 * count / total.
  std::int64_t scaled = count * 10000;
  std::int64_t q = scaled / total;
  std::int64_t twice_r = 2 * (scaled % total);
  if (twice_r > total || (twice_r == total && q % 2 == 1)) ++q;
  return static_cast<double>(q) / 100.0;
}

PrevalenceReport prevalence_report(std::span<const SiteResult> results, const std::string& cohort_prefix) {
  PrevalenceReport report;
  std::map<std::string, CohortStats> cohorts;
  for (const auto& r : results) {
    ++report.status_counts[std::string(to_string(r.status))];
    if (r.status != SiteStatus::kClassified || !r.verdict) continue;
    bool llm = r.verdict->label == SiteLabel::kLlm;
    ++report.total_classified;
    report.llm_count += llm ? 1 : 0;
    report.pages_total += r.pages_accepted;
    report.borderline_count += r.borderline ? 1 : 0;
    std::set<std::string> tags(r.cohort_tags.begin(), r.cohort_tags.end());
    for (const auto& tag : tags) {
      if (!cohort_prefix.empty() && !tag.starts_with(cohort_prefix)) continue;
      auto& c = cohorts[tag];
      c.tag = tag;
      ++c.total;
      c.llm_count += llm ? 1 : 0;
    }
  }
  report.llm_pct = percent_half_even(report.llm_count, report.total_classified);
  for (auto& [tag, c] : cohorts) {
    c.llm_pct = percent_half_even(c.llm_count, c.total);
    report.cohorts.push_back(c);
  }
  return report;
}

json report_to_json(const PrevalenceReport& report) {
  json cohorts = json::array();
  for (const auto& c : report.cohorts) {
    cohorts.push_back({{"tag", c.tag}, {"total", c.total}, {"llm_count", c.llm_count}, {"llm_pct", c.llm_pct}});
  }
  return {{"total_classified", report.total_classified},
          {"llm_count", report.llm_count},
          {"llm_pct", report.llm_pct},
          {"pages_total", report.pages_total},
          {"borderline_count", report.borderline_count},
          {"status_counts", report.status_counts},
          {"cohorts", cohorts},
          {"method",
           {{"percent_rounding", "half-even, 2 decimals"},
            {"percentile_method", "linear-order-statistics"},
            {"rank_test", "mann-whitney-u, midranks, two-sided"}}}};
}

void check_report_consistency(const PrevalenceReport& report) {
  if (percent_half_even(report.llm_count, report.total_classified) != report.llm_pct) {
    throw Error(ErrorCode::kInvalidArgument, "llm_pct does not match its counts");
  }
  for (const auto& c : report.cohorts) {
    if (c.total > report.total_classified || percent_half_even(c.llm_count, c.total) != c.llm_pct) {
      throw Error(ErrorCode::kInvalidArgument, "cohort " + c.tag + " does not match its counts");
    }
  }
}

// -- rank test ---------------------------------------------------------------

namespace {

double binomial(std::size_t n, std::size_t k) {
  k = std::min(k, n - k);
  double c = 1.0;
  for (std::size_t i = 1; i <= k; ++i) c = c * static_cast<double>(n - k + i) / static_cast<double>(i);
  return c;
}

// Twice the midrank of every pooled value, so ranks stay integral.
std::vector<std::int64_t> doubled_midranks(const std::vector<double>& pooled, double& tie_term) {
  std::size_t n = pooled.size();
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a] < pooled[b]; });
  std::vector<std::int64_t> ranks(n);
  tie_term = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && pooled[order[j + 1]] == pooled[order[i]]) ++j;
    // Positions i..j (1-based i+1..j+1) share the midrank (i + j + 2) / 2.
    auto twice = static_cast<std::int64_t>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = twice;
    double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

RankTestResult rank_significance_test(std::span<const double> first, std::span<const double> second,
                                      RankTestMethod method) {
  if (first.empty() || second.empty()) throw Error(ErrorCode::kEmptyGroup, "rank test needs two non-empty groups");
  RankTestResult out;
  out.n1 = first.size();
  out.n2 = second.size();
  std::vector<double> pooled(first.begin(), first.end());
  pooled.insert(pooled.end(), second.begin(), second.end());
  for (double v : pooled) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidArgument, "rank test values must be finite");
  }
  const std::size_t n = pooled.size();
  const auto n1 = static_cast<std::int64_t>(out.n1);
  const auto n2 = static_cast<std::int64_t>(out.n2);

  double tie_term = 0.0;
  std::vector<std::int64_t> ranks = doubled_midranks(pooled, tie_term);
  std::int64_t s_obs = 0;
  for (std::size_t i = 0; i < out.n1; ++i) s_obs += ranks[i];
  // 2U = 2R1 - n1(n1+1); distance from the mean, doubled: |2U - n1 n2|.
  std::int64_t twice_u = s_obs - n1 * (n1 + 1);
  out.u = static_cast<double>(twice_u) / 2.0;

  const double mu = static_cast<double>(n1 * n2) / 2.0;
  const double nn = static_cast<double>(n);
  double variance = static_cast<double>(n1 * n2) / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  double diff = out.u - mu;
  if (variance > 0.0 && std::abs(diff) > 0.5) {
    out.z = (std::abs(diff) - 0.5) / std::sqrt(variance) * (diff < 0 ? -1.0 : 1.0);
  }

  bool exact = method == RankTestMethod::kExact ||
               (method == RankTestMethod::kAuto && binomial(n, out.n1) <= static_cast<double>(kExactAssignmentLimit));
  if (exact) {
    if (n > 200) throw Error(ErrorCode::kInvalidArgument, "exact rank test is limited to 200 values");
    std::int64_t max_sum = 0;
    for (auto r : ranks) max_sum += r;
    // ways[k][s]: subsets of size k with doubled-rank sum s.
    std::vector<std::vector<double>> ways(out.n1 + 1, std::vector<double>(static_cast<std::size_t>(max_sum) + 1, 0.0));
    ways[0][0] = 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = std::min(i + 1, out.n1); k >= 1; --k) {
        auto& dst = ways[k];
        const auto& src = ways[k - 1];
        auto r = static_cast<std::size_t>(ranks[i]);
        for (std::size_t s = dst.size(); s-- > r;) dst[s] += src[s - r];
      }
    }
    std::int64_t observed = std::abs(twice_u - n1 * n2);
    double extreme = 0.0, total = 0.0;
    for (std::size_t s = 0; s < ways[out.n1].size(); ++s) {
      double w = ways[out.n1][s];
      if (w == 0.0) continue;
      total += w;
      std::int64_t dist = std::abs(static_cast<std::int64_t>(s) - n1 * (n1 + 1) - n1 * n2);
      if (dist >= observed) extreme += w;
    }
    out.p_two_sided = std::min(1.0, extreme / total);
    out.exact = true;
  } else {
    out.p_two_sided = variance > 0.0 ? std::min(1.0, std::erfc(std::abs(out.z) / std::sqrt(2.0))) : 1.0;
  }
  return out;
}

RankGroups rank_groups(std::span<const SiteResult> results) {
  RankGroups g;
  for (const auto& r : results) {
    if (r.status != SiteStatus::kClassified || !r.verdict || !r.search_rank) continue;
    (r.verdict->label == SiteLabel::kLlm ? g.llm : g.human).push_back(static_cast<double>(*r.search_rank));
  }
  return g;
}

// -- CDF ---------------------------------------------------------------------

std::vector<CdfRow> empirical_cdf(std::span<const double> scores) {
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<CdfRow> rows;
  rows.reserve(sorted.size());
  const double n = static_cast<double>(sorted.size());
  for (std::size_t k = 0; k < sorted.size(); ++k) rows.push_back({sorted[k], static_cast<double>(k + 1) / n});
  return rows;
}

std::map<std::string, std::vector<double>> cdf_groups(std::span<const SiteResult> results, CdfGrouping grouping) {
  std::map<std::string, std::vector<double>> groups;
  if (grouping == CdfGrouping::kLabel) {
    groups["llm"];
    groups["human"];
  }
  for (const auto& r : results) {
    std::string key;
    if (grouping == CdfGrouping::kSite) {
      key = r.site_id;
    } else {
      key = std::string(to_string(r.verdict ? r.verdict->label : r.truth_label));
    }
    auto& bucket = groups[key];
    for (const auto& s : r.page_scores) bucket.push_back(s.score);
  }
  return groups;
}

void write_cdf_csv(const fs::path& path, std::span<const CdfRow> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "score,cumulative_fraction\n";
  for (const auto& row : rows) out << fmt::format("{:.17g},{:.17g}\n", row.score, row.fraction);
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

std::vector<fs::path> cdf_export(std::span<const SiteResult> results, CdfGrouping grouping, const fs::path& dir) {
  fs::create_directories(dir);
  std::vector<fs::path> written;
  std::string kind = grouping == CdfGrouping::kLabel ? "label" : "site";
  for (const auto& [group, scores] : cdf_groups(results, grouping)) {
    std::string name = group;
    for (char& c : name) {
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.' && c != '_') c = '_';
    }
    fs::path path = dir / ("cdf_" + kind + "_" + name + ".csv");
    write_cdf_csv(path, empirical_cdf(scores));
    written.push_back(path);
  }
  return written;
}

}  // namespace sitedetect
