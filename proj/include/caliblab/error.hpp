#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace caliblab {

enum class ErrorCode {
  kDegenerateConfiguration,
  kPointAtInfinity,
  kDegenerateView,
  kAmbiguousDirection,
  kParallelLines,
  kTooFewLines,
  kAllFlagged,
  kBehindCamera,
  kInsufficientViews,
  kNoFocalEstimate,
  kDegenerateSystem,
  kBoardOutOfView,
  kInvalidConfig,
  kEmptyView,
  kMissingCell,
  kTooFewPoints,
  kMissingPose,
  kParseError,
  kIoError,
};

constexpr std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::kPointAtInfinity: return "PointAtInfinity";
    case ErrorCode::kDegenerateView: return "DegenerateView";
    case ErrorCode::kAmbiguousDirection: return "AmbiguousDirection";
    case ErrorCode::kParallelLines: return "ParallelLines";
    case ErrorCode::kTooFewLines: return "TooFewLines";
    case ErrorCode::kAllFlagged: return "AllFlagged";
    case ErrorCode::kBehindCamera: return "BehindCamera";
    case ErrorCode::kInsufficientViews: return "InsufficientViews";
    case ErrorCode::kNoFocalEstimate: return "NoFocalEstimate";
    case ErrorCode::kDegenerateSystem: return "DegenerateSystem";
    case ErrorCode::kBoardOutOfView: return "BoardOutOfView";
    case ErrorCode::kInvalidConfig: return "InvalidConfig";
    case ErrorCode::kEmptyView: return "EmptyView";
    case ErrorCode::kMissingCell: return "MissingCell";
    case ErrorCode::kTooFewPoints: return "TooFewPoints";
    case ErrorCode::kMissingPose: return "MissingPose";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

/// All library failures are reported through this exception; `code()`
/// identifies the failure kind so callers can branch without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace caliblab
