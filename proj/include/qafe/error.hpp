#pragma once

#include <stdexcept>
#include <string>

namespace qafe {

enum class ErrorCode {
  MissingField,
  EmptyText,
  ConflictingLabels,
  BackendUnavailable,
  MalformedAnnotation,
  EmptyGeneration,
  CyclicParse,
  CacheCorruption,
  ValueOutOfRange,
  DegenerateLabels,
  DegenerateSplit,
  MisalignedInputs,
  InsufficientVariance,
  NoQualifyingGroups,
  UnknownComponent,
  ConfigError,
  AnnotationFailure,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingField: return "MissingField";
    case ErrorCode::EmptyText: return "EmptyText";
    case ErrorCode::ConflictingLabels: return "ConflictingLabels";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::MalformedAnnotation: return "MalformedAnnotation";
    case ErrorCode::EmptyGeneration: return "EmptyGeneration";
    case ErrorCode::CyclicParse: return "CyclicParse";
    case ErrorCode::CacheCorruption: return "CacheCorruption";
    case ErrorCode::ValueOutOfRange: return "ValueOutOfRange";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::DegenerateSplit: return "DegenerateSplit";
    case ErrorCode::MisalignedInputs: return "MisalignedInputs";
    case ErrorCode::InsufficientVariance: return "InsufficientVariance";
    case ErrorCode::NoQualifyingGroups: return "NoQualifyingGroups";
    case ErrorCode::UnknownComponent: return "UnknownComponent";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::AnnotationFailure: return "AnnotationFailure";
  }
  return "Unknown";
}

/// Single exception type for the whole library; `code()` discriminates.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace qafe
