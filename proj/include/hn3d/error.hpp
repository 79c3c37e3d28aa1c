// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hn3d {

enum class ErrorCode {
  // usage
  Usage,
  ConfigInvalid,
  // data / validation
  ZeroVector,
  EmptyInput,
  BadMagic,
  DimMismatch,
  TruncatedFile,
  NonFinitePayload,
  NotUnitNorm,
  IoError,
  ManifestInvalid,
  ViewCountMismatch,
  CategoryMismatch,
  ShapeMismatch,
  EmptyCloud,
  MissingLandmarks,
  BadAlpha,
  UnknownObject,
  FingerprintMismatch,
  NonPositiveSim,
  DegenerateCloud,
  CacheMismatch,
  CategorySetMismatch,
  SplitLeakage,
  MissingGroundTruth,
  // numeric
  NumericFailure,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage: return "Usage";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NonFinitePayload: return "NonFinitePayload";
    case ErrorCode::NotUnitNorm: return "NotUnitNorm";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ManifestInvalid: return "ManifestInvalid";
    case ErrorCode::ViewCountMismatch: return "ViewCountMismatch";
    case ErrorCode::CategoryMismatch: return "CategoryMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::MissingLandmarks: return "MissingLandmarks";
    case ErrorCode::BadAlpha: return "BadAlpha";
    case ErrorCode::UnknownObject: return "UnknownObject";
    case ErrorCode::FingerprintMismatch: return "FingerprintMismatch";
    case ErrorCode::NonPositiveSim: return "NonPositiveSim";
    case ErrorCode::DegenerateCloud: return "DegenerateCloud";
    case ErrorCode::CacheMismatch: return "CacheMismatch";
    case ErrorCode::CategorySetMismatch: return "CategorySetMismatch";
    case ErrorCode::SplitLeakage: return "SplitLeakage";
    case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
    case ErrorCode::NumericFailure: return "NumericFailure";
  }
  return "Unknown";
}

/// Process exit code for an error: 1 usage, 2 data/validation, 3 numeric.
constexpr int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::Usage:
    case ErrorCode::ConfigInvalid:
      return 1;
    case ErrorCode::NumericFailure:
      return 3;
    default:
      return 2;
  }
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace hn3d
