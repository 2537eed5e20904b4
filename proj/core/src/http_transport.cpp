#include <httplib.h>
#include <netdb.h>
#include <sys/socket.h>

#include "sitedetect/errors.hpp"
#include "sitedetect/transport.hpp"

namespace sitedetect {
namespace {

bool host_resolves(const std::string& host) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* result = nullptr;
  std::string bare = host;
  if (bare.size() > 2 && bare.front() == '[' && bare.back() == ']') bare = bare.substr(1, bare.size() - 2);
  int rc = getaddrinfo(bare.c_str(), nullptr, &hints, &result);
  if (result != nullptr) freeaddrinfo(result);
  return rc == 0;
}

class HttplibTransport final : public Transport {
 public:
  HttpResponse get(const Url& url, const HttpRequestOptions& options) override {
    httplib::Client client(url.scheme + "://" + url.authority());
    auto seconds = std::chrono::duration_cast<std::chrono::seconds>(options.timeout);
    auto micros = std::chrono::duration_cast<std::chrono::microseconds>(options.timeout - seconds);
    client.set_connection_timeout(seconds.count(), micros.count());
    client.set_read_timeout(seconds.count(), micros.count());
    client.set_write_timeout(seconds.count(), micros.count());
    client.set_follow_location(false);
    client.set_keep_alive(false);
    client.enable_server_certificate_verification(true);

    httplib::Headers headers;
    if (!options.user_agent.empty()) headers.emplace("User-Agent", options.user_agent);

    HttpResponse response;
    auto on_response = [&](const httplib::Response& r) {
      response.status = r.status;
      response.content_type = r.get_header_value("Content-Type");
      response.location = r.get_header_value("Location");
      return true;
    };
    auto on_content = [&](const char* data, std::size_t length) {
      std::size_t room = options.max_body_bytes - response.body.size();
      if (length > room) {
        response.body.append(data, room);
        response.truncated = true;
        return false;
      }
      response.body.append(data, length);
      return true;
    };

    auto started = std::chrono::steady_clock::now();
    auto result = client.Get(url.target(), headers, on_response, on_content);
    if (result) return response;

    auto err = result.error();
    if (err == httplib::Error::Canceled && response.truncated) return response;
    auto elapsed = std::chrono::steady_clock::now() - started;
    if (err == httplib::Error::ConnectionTimeout ||
        ((err == httplib::Error::Read || err == httplib::Error::Connection) &&
         elapsed >= options.timeout * 9 / 10)) {
      throw Error(ErrorCode::kFetchTimeout, url.str());
    }
    if (err == httplib::Error::Connection && !host_resolves(url.host)) {
      throw Error(ErrorCode::kDnsFailure, url.host);
    }
    throw Error(ErrorCode::kFetchTransport, url.str() + ": " + httplib::to_string(err));
  }
};

}  // namespace

std::shared_ptr<Transport> make_http_transport() { return std::make_shared<HttplibTransport>(); }

}  // namespace sitedetect
