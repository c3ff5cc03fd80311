#include "formula/error.hpp"

namespace formula {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::MalformedManifest: return "MalformedManifest";
    case ErrorCode::MalformedFeatureFile: return "MalformedFeatureFile";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::DuplicateImageId: return "DuplicateImageId";
    case ErrorCode::InvalidBox: return "InvalidBox";
    case ErrorCode::ZeroNormRow: return "ZeroNormRow";
    case ErrorCode::SingularDegree: return "SingularDegree";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::EmptyForeground: return "EmptyForeground";
    case ErrorCode::EmptyMask: return "EmptyMask";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::UnknownImageId: return "UnknownImageId";
    case ErrorCode::DuplicatePrediction: return "DuplicatePrediction";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
  }
  return "Unknown";
}

}  // namespace formula
