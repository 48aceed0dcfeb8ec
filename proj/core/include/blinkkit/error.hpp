#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace blinkkit {

enum class ErrorCode {
  MissingFile,
  MalformedManifest,
  MalformedCsv,
  InvariantViolation,
  NonMonotonicTimestamps,
  NegativeBandPower,
  NegativeTime,
  EmptyTrace,
  WindowOutOfBounds,
  InsufficientNegativeFootage,
  NoFaceFound,
  AdapterFailure,
  DegenerateBox,
  EmptyIntersection,
  ConfigViolation,
  SingleClassDataset,
  EmptyDataset,
  ShapeMismatch,
  CorruptCheckpoint,
  EmptyScores,
  EmptyClass,
  MalformedSample,
  WindowLongerThanTrace,
  InsufficientOverlap,
  ZeroVariance,
  OverlappingBlinks,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Domain error raised by every blinkkit operation. The code is stable and
/// is what callers (and the CLI exit-code mapping) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace blinkkit
