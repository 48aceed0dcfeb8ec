#include "blinkkit/error.hpp"

namespace blinkkit {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::MalformedCsv: return "MalformedCsv";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::NonMonotonicTimestamps: return "NonMonotonicTimestamps";
    case ErrorCode::NegativeBandPower: return "NegativeBandPower";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::EmptyTrace: return "EmptyTrace";
    case ErrorCode::WindowOutOfBounds: return "WindowOutOfBounds";
    case ErrorCode::InsufficientNegativeFootage: return "InsufficientNegativeFootage";
    case ErrorCode::NoFaceFound: return "NoFaceFound";
    case ErrorCode::AdapterFailure: return "AdapterFailure";
    case ErrorCode::DegenerateBox: return "DegenerateBox";
    case ErrorCode::EmptyIntersection: return "EmptyIntersection";
    case ErrorCode::ConfigViolation: return "ConfigViolation";
    case ErrorCode::SingleClassDataset: return "SingleClassDataset";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::CorruptCheckpoint: return "CorruptCheckpoint";
    case ErrorCode::EmptyScores: return "EmptyScores";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::MalformedSample: return "MalformedSample";
    case ErrorCode::WindowLongerThanTrace: return "WindowLongerThanTrace";
    case ErrorCode::InsufficientOverlap: return "InsufficientOverlap";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::OverlappingBlinks: return "OverlappingBlinks";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace blinkkit
