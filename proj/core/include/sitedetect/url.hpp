#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace sitedetect {

// Absolute http(s) URL split into the parts the crawler cares about.
struct Url {
  std::string scheme;  // "http" or "https", lowercase
  std::string host;    // lowercase
  int port = 0;        // 0 when the scheme default applies
  std::string path;    // always starts with '/'
  std::string query;   // without the leading '?', may be empty

  int effective_port() const { return port != 0 ? port : (scheme == "https" ? 443 : 80); }
  // host plus ":port" when the port is not the scheme default.
  std::string authority() const;
  // path plus "?query" when a query is present.
  std::string target() const;
  std::string str() const;

  friend bool operator==(const Url&, const Url&) = default;
};

// Parses an absolute http(s) URL. Fragments are dropped, scheme and host are
// lowercased, default ports are elided and an empty path becomes "/".
std::optional<Url> parse_url(std::string_view text);

// Resolves `ref` (absolute, scheme-relative, absolute-path, relative-path or
// query-only) against `base`, removing dot segments.
std::optional<Url> resolve_url(const Url& base, std::string_view ref);

// Canonical string form used for de-duplication and cache keys.
std::optional<std::string> canonicalize_url(std::string_view text);

}  // namespace sitedetect
