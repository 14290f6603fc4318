#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace textshift {

enum class ErrorCode {
  // corpus
  MalformedRecord,
  UnknownLabel,
  InsufficientData,
  InvalidConfig,
  // ingest
  HttpError,
  Timeout,
  MalformedResponse,
  // embeddings
  BadHeader,
  TruncatedFile,
  NonFiniteValue,
  InvalidWord,
  DimensionMismatch,
  IoError,
  // models
  EmptySentence,
  WindowTooLarge,
  EmptyFeatureMap,
  StaleCache,
  EmptyDocument,
  ShapeMismatch,
  // checkpoints
  BadMagic,
  VersionUnsupported,
  ChecksumMismatch,
  BadModelKind,
  // analysis
  EmptyCorpus,
  NoSharedTokens,
  DegenerateInput,
  TooFewPoints,
  PerplexityTooLarge,
};

std::string_view to_string(ErrorCode code);

/// Single exception type for the library; `code()` identifies the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace textshift
