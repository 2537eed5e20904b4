#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sitedetect {

// Parsed robots.txt (RFC 9309): access rules per user-agent group plus the
// Sitemap directives, which apply to the whole file.
class RobotsTxt {
 public:
  static RobotsTxt parse(std::string_view content);

  // Longest matching rule wins; Allow wins a tie. `product` is matched
  // case-insensitively against group user-agent lines, falling back to "*".
  bool allowed(std::string_view product, std::string_view path) const;

  // Sitemap URLs in file order.
  const std::vector<std::string>& sitemaps() const { return sitemaps_; }

 private:
  struct Rule {
    bool allow = false;
    std::string pattern;
  };
  struct Group {
    std::vector<std::string> agents;
    std::vector<Rule> rules;
  };

  std::vector<Group> groups_;
  std::vector<std::string> sitemaps_;
};

}  // namespace sitedetect
