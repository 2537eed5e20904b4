#include "sitedetect/url.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <vector>

namespace sitedetect {
namespace {

std::string to_lower(std::string_view s) {
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

std::string remove_dot_segments(std::string_view path) {
  std::vector<std::string_view> parts;
  std::size_t pos = 0;
  while (true) {
    auto next = path.find('/', pos);
    parts.push_back(path.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  std::vector<std::string_view> out;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    bool last = i + 1 == parts.size();
    if (parts[i] == ".") {
      if (last) out.push_back({});
    } else if (parts[i] == "..") {
      if (!out.empty()) out.pop_back();
      if (last) out.push_back({});
    } else {
      out.push_back(parts[i]);
    }
  }
  std::string result;
  for (auto seg : out) {
    result += '/';
    result.append(seg);
  }
  return result.empty() ? "/" : result;
}

std::string strip_fragment(std::string_view s) {
  auto hash = s.find('#');
  return std::string(hash == std::string_view::npos ? s : s.substr(0, hash));
}

}  // namespace

std::string Url::authority() const {
  if (port == 0) return host;
  return host + ":" + std::to_string(port);
}

std::string Url::target() const { return query.empty() ? path : path + "?" + query; }

std::string Url::str() const { return scheme + "://" + authority() + target(); }

std::optional<Url> parse_url(std::string_view text) {
  std::string s = strip_fragment(trim(text));
  auto colon = s.find("://");
  if (colon == std::string::npos) return std::nullopt;
  Url url;
  url.scheme = to_lower(std::string_view(s).substr(0, colon));
  if (url.scheme != "http" && url.scheme != "https") return std::nullopt;

  std::string_view rest = std::string_view(s).substr(colon + 3);
  auto auth_end = rest.find_first_of("/?");
  std::string_view authority = rest.substr(0, auth_end);
  std::string_view tail = auth_end == std::string_view::npos ? std::string_view{} : rest.substr(auth_end);

  if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);
  if (authority.empty()) return std::nullopt;

  std::string_view host = authority;
  std::string_view port_text;
  if (authority.front() == '[') {
    auto close = authority.find(']');
    if (close == std::string_view::npos) return std::nullopt;
    host = authority.substr(0, close + 1);
    if (close + 1 < authority.size()) {
      if (authority[close + 1] != ':') return std::nullopt;
      port_text = authority.substr(close + 2);
    }
  } else if (auto c = authority.rfind(':'); c != std::string_view::npos) {
    host = authority.substr(0, c);
    port_text = authority.substr(c + 1);
  }
  if (host.empty()) return std::nullopt;
  for (char ch : host) {
    if (std::isspace(static_cast<unsigned char>(ch)) || ch == '/' || ch == '\\') return std::nullopt;
  }
  url.host = to_lower(host);
  if (!url.host.empty() && url.host.back() == '.') url.host.pop_back();

  if (!port_text.empty()) {
    int port = 0;
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), port);
    if (ec != std::errc{} || ptr != port_text.data() + port_text.size() || port <= 0 || port > 65535) {
      return std::nullopt;
    }
    url.port = port;
  }
  if ((url.scheme == "http" && url.port == 80) || (url.scheme == "https" && url.port == 443)) url.port = 0;

  auto q = tail.find('?');
  std::string_view path = tail.substr(0, q);
  if (q != std::string_view::npos) url.query = std::string(tail.substr(q + 1));
  url.path = path.empty() ? "/" : remove_dot_segments(path);
  return url;
}

std::optional<Url> resolve_url(const Url& base, std::string_view ref_text) {
  std::string ref = strip_fragment(trim(ref_text));
  if (ref.find("://") != std::string::npos) {
    auto scheme_end = ref.find("://");
    bool scheme_like = std::all_of(ref.begin(), ref.begin() + static_cast<std::ptrdiff_t>(scheme_end),
                                   [](unsigned char c) { return std::isalnum(c) || c == '+' || c == '-' || c == '.'; });
    if (scheme_like) return parse_url(ref);
  }
  if (ref.rfind("//", 0) == 0) return parse_url(base.scheme + ":" + ref);
  // Other schemes (mailto:, javascript:, data:) are not resolvable pages.
  if (auto colon = ref.find(':'); colon != std::string::npos) {
    auto first_sep = ref.find_first_of("/?");
    if (first_sep == std::string::npos || colon < first_sep) return std::nullopt;
  }

  Url out = base;
  if (ref.empty()) return out;
  if (ref.front() == '?') {
    out.query = ref.substr(1);
    return out;
  }
  auto q = ref.find('?');
  std::string path = ref.substr(0, q);
  out.query = q == std::string::npos ? std::string{} : ref.substr(q + 1);
  if (path.empty()) {
    out.path = base.path;
  } else if (path.front() == '/') {
    out.path = remove_dot_segments(path);
  } else {
    auto slash = base.path.rfind('/');
    std::string merged = base.path.substr(0, slash + 1) + path;
    out.path = remove_dot_segments(merged);
  }
  return out;
}

std::optional<std::string> canonicalize_url(std::string_view text) {
  auto url = parse_url(text);
  if (!url) return std::nullopt;
  return url->str();
}

}  // namespace sitedetect
