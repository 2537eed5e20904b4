#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sitedetect {

// Every failure raised by the library carries one of these codes so callers
// can branch without string matching.
enum class ErrorCode {
  kInvalidArgument,
  // site_sampler
  kSiteUnreachable,
  kSitemapParseError,
  kRecursionLimit,
  kIndexUnavailable,
  kNoCandidates,
  // page_fetcher
  kFetchTimeout,
  kFetchTransport,
  kDnsFailure,
  kRobotsDenied,
  kTooManyRedirects,
  kSnapshotMissing,
  // content_extractor
  kEncodingError,
  // score_client
  kScorerRejected,
  kScorerUnavailable,
  kProtocolError,
  // site_classifier
  kEmptyScores,
  kInsufficientPages,
  kDegenerateTraining,
  kInvalidFeature,
  kLeakageError,
  kModelFormatError,
  // study_runner
  kEmptyGroup,
  kConfigError,
  kIoError,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by the scorer client when the service refuses a batch; `index` is the
// position of the first text of the refused batch in the caller's input.
class ScorerRejected : public Error {
 public:
  ScorerRejected(std::size_t index, int status, const std::string& message)
      : Error(ErrorCode::kScorerRejected, message), index_(index), status_(status) {}

  std::size_t index() const noexcept { return index_; }
  int status() const noexcept { return status_; }

 private:
  std::size_t index_;
  int status_;
};

}  // namespace sitedetect
