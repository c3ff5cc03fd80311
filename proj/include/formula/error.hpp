#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace formula {

enum class ErrorCode {
  IoFailure,
  MalformedManifest,
  MalformedFeatureFile,
  ShapeMismatch,
  UnsupportedDtype,
  NonFiniteFeature,
  MalformedRecord,
  DuplicateImageId,
  InvalidBox,
  ZeroNormRow,
  SingularDegree,
  NoConvergence,
  EmptyForeground,
  EmptyMask,
  LengthMismatch,
  InvalidWeights,
  InvalidConfig,
  GridMismatch,
  MissingPrediction,
  UnknownImageId,
  DuplicatePrediction,
  InvalidSpec,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI's exit-code mapping) can branch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace formula
