#pragma once

#include <chrono>
#include <cstddef>
#include <memory>
#include <string>

#include "sitedetect/url.hpp"

namespace sitedetect {

struct HttpRequestOptions {
  std::chrono::milliseconds timeout{30'000};
  std::string user_agent;
  std::size_t max_body_bytes = 5 * 1024 * 1024;
};

// One HTTP exchange; redirects are not followed at this layer.
struct HttpResponse {
  int status = 0;
  std::string content_type;
  std::string location;
  std::string body;
  bool truncated = false;
};

// Single-request GET capability. Implementations throw sitedetect::Error with
// kFetchTimeout, kDnsFailure or kFetchTransport on failure.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpResponse get(const Url& url, const HttpRequestOptions& options) = 0;
};

// HTTP/1.1 transport (TLS when the URL is https).
std::shared_ptr<Transport> make_http_transport();

}  // namespace sitedetect
