#include "textshift/error.hpp"

namespace textshift {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::HttpError: return "HttpError";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::BadHeader: return "BadHeader";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::InvalidWord: return "InvalidWord";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EmptySentence: return "EmptySentence";
    case ErrorCode::WindowTooLarge: return "WindowTooLarge";
    case ErrorCode::EmptyFeatureMap: return "EmptyFeatureMap";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::EmptyDocument: return "EmptyDocument";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
    case ErrorCode::BadModelKind: return "BadModelKind";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::NoSharedTokens: return "NoSharedTokens";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::PerplexityTooLarge: return "PerplexityTooLarge";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(to_string(code)) + ": " + detail),
      code_(code) {}

}  // namespace textshift
