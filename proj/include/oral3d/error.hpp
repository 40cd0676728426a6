#pragma once

#include <stdexcept>
#include <string>

namespace oral3d {

enum class ErrorCode {
  InvalidRange,
  InvalidThreshold,
  InsufficientPoints,
  DegenerateFit,
  Dimension,
  EmptyBatch,
  EmptyDataset,
  UnsupportedOperation,
  UndefinedScore,
  Validation,
  Io,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (and the CLI exit-code mapping) can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidRange: return "invalid-range";
    case ErrorCode::InvalidThreshold: return "invalid-threshold";
    case ErrorCode::InsufficientPoints: return "insufficient-points";
    case ErrorCode::DegenerateFit: return "degenerate-fit";
    case ErrorCode::Dimension: return "dimension";
    case ErrorCode::EmptyBatch: return "empty-batch";
    case ErrorCode::EmptyDataset: return "empty-dataset";
    case ErrorCode::UnsupportedOperation: return "unsupported-operation";
    case ErrorCode::UndefinedScore: return "undefined-score";
    case ErrorCode::Validation: return "validation";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

}  // namespace oral3d
