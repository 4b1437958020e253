#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fairrag {

enum class ErrorCode {
  InvalidArgument,
  DimensionMismatch,
  NotNormalized,
  NonFiniteInput,
  NoSkinPixels,
  DuplicateId,
  ZeroVector,
  EmptyStore,
  BadMagic,
  TruncatedFile,
  VersionMismatch,
  Io,
  Parse,
  EmptyPrompt,
  EmptyGroupSet,
  NoAnnotatedCandidates,
  NonPositiveK,
  MissingEmbedding,
  EmptyHistogram,
  EmptyList,
  TooFewSamples,
  NonConvergedEigen,
  NegativeEigenvalue,
  KeyMismatch,
  InvalidPrior,
  InvalidFraction,
  Backend,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotNormalized: return "NotNormalized";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::NoSkinPixels: return "NoSkinPixels";
    case ErrorCode::DuplicateId: return "DuplicateId";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyStore: return "EmptyStore";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::EmptyPrompt: return "EmptyPrompt";
    case ErrorCode::EmptyGroupSet: return "EmptyGroupSet";
    case ErrorCode::NoAnnotatedCandidates: return "NoAnnotatedCandidates";
    case ErrorCode::NonPositiveK: return "NonPositiveK";
    case ErrorCode::MissingEmbedding: return "MissingEmbedding";
    case ErrorCode::EmptyHistogram: return "EmptyHistogram";
    case ErrorCode::EmptyList: return "EmptyList";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NonConvergedEigen: return "NonConvergedEigen";
    case ErrorCode::NegativeEigenvalue: return "NegativeEigenvalue";
    case ErrorCode::KeyMismatch: return "KeyMismatch";
    case ErrorCode::InvalidPrior: return "InvalidPrior";
    case ErrorCode::InvalidFraction: return "InvalidFraction";
    case ErrorCode::Backend: return "Backend";
  }
  return "Unknown";
}

/// Every failure in the library is reported as an Error carrying a code,
/// so callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace fairrag
