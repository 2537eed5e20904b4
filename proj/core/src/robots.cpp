#include "sitedetect/robots.hpp"

#include <algorithm>
#include <cctype>
#include <optional>

namespace sitedetect {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

// '*' matches any run of characters, a trailing '$' anchors the end.
bool pattern_matches(std::string_view pattern, std::string_view path) {
  bool anchored = !pattern.empty() && pattern.back() == '$';
  if (anchored) pattern.remove_suffix(1);
  std::size_t p = 0, s = 0;
  std::optional<std::size_t> star_p;
  std::size_t star_s = 0;
  while (s < path.size()) {
    if (p < pattern.size() && pattern[p] == '*') {
      star_p = p++;
      star_s = s;
    } else if (p < pattern.size() && pattern[p] == path[s]) {
      ++p;
      ++s;
    } else if (p == pattern.size() && !anchored) {
      return true;
    } else if (star_p) {
      p = *star_p + 1;
      s = ++star_s;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

}  // namespace

RobotsTxt RobotsTxt::parse(std::string_view content) {
  RobotsTxt robots;
  bool in_agent_run = false;
  std::size_t pos = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(pos, end - pos);
    pos = end + 1;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string key = lower(trim(line.substr(0, colon)));
    std::string value(trim(line.substr(colon + 1)));

    if (key == "sitemap") {
      if (!value.empty()) robots.sitemaps_.push_back(value);
      continue;
    }
    if (key == "user-agent") {
      if (!in_agent_run) robots.groups_.emplace_back();
      robots.groups_.back().agents.push_back(lower(value));
      in_agent_run = true;
      continue;
    }
    if (key == "allow" || key == "disallow") {
      in_agent_run = false;
      if (robots.groups_.empty()) continue;
      // An empty Disallow means "allow everything" and contributes no rule.
      if (value.empty()) continue;
      robots.groups_.back().rules.push_back(Rule{key == "allow", value});
      continue;
    }
    in_agent_run = false;
  }
  return robots;
}

bool RobotsTxt::allowed(std::string_view product, std::string_view path) const {
  std::string token = lower(product);
  if (auto slash = token.find('/'); slash != std::string::npos) token.resize(slash);

  std::vector<const Group*> matched;
  for (const auto& g : groups_) {
    for (const auto& a : g.agents) {
      if (a != "*" && !token.empty() && token.find(a) != std::string::npos) {
        matched.push_back(&g);
        break;
      }
    }
  }
  if (matched.empty()) {
    for (const auto& g : groups_) {
      if (std::find(g.agents.begin(), g.agents.end(), "*") != g.agents.end()) matched.push_back(&g);
    }
  }

  if (path == "/robots.txt") return true;
  std::size_t best_len = 0;
  bool best_allow = true;
  bool any = false;
  for (const auto* g : matched) {
    for (const auto& rule : g->rules) {
      if (!pattern_matches(rule.pattern, path)) continue;
      std::size_t len = rule.pattern.size();
      if (!any || len > best_len || (len == best_len && rule.allow && !best_allow)) {
        best_len = len;
        best_allow = rule.allow;
        any = true;
      }
    }
  }
  return !any || best_allow;
}

}  // namespace sitedetect
