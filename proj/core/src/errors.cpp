#include "sitedetect/errors.hpp"

namespace sitedetect {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kSiteUnreachable: return "SiteUnreachable";
    case ErrorCode::kSitemapParseError: return "SitemapParseError";
    case ErrorCode::kRecursionLimit: return "RecursionLimit";
    case ErrorCode::kIndexUnavailable: return "IndexUnavailable";
    case ErrorCode::kNoCandidates: return "NoCandidates";
    case ErrorCode::kFetchTimeout: return "FetchTimeout";
    case ErrorCode::kFetchTransport: return "FetchTransport";
    case ErrorCode::kDnsFailure: return "DnsFailure";
    case ErrorCode::kRobotsDenied: return "RobotsDenied";
    case ErrorCode::kTooManyRedirects: return "TooManyRedirects";
    case ErrorCode::kSnapshotMissing: return "SnapshotMissing";
    case ErrorCode::kEncodingError: return "EncodingError";
    case ErrorCode::kScorerRejected: return "ScorerRejected";
    case ErrorCode::kScorerUnavailable: return "ScorerUnavailable";
    case ErrorCode::kProtocolError: return "ProtocolError";
    case ErrorCode::kEmptyScores: return "EmptyScores";
    case ErrorCode::kInsufficientPages: return "InsufficientPages";
    case ErrorCode::kDegenerateTraining: return "DegenerateTraining";
    case ErrorCode::kInvalidFeature: return "InvalidFeature";
    case ErrorCode::kLeakageError: return "LeakageError";
    case ErrorCode::kModelFormatError: return "ModelFormatError";
    case ErrorCode::kEmptyGroup: return "EmptyGroup";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace sitedetect
