#pragma once

#include <stdexcept>
#include <string>

namespace mipseg {

enum class ErrorCode {
  kInvalidArgument,
  kDimsMismatch,
  kMissingPayload,
  kSizeMismatch,
  kUnsupportedElementType,
  kMalformedHeader,
  kNonFiniteValue,
  kDegenerateRange,
  kEmptySet,
  kEmptyClass,
  kDegenerateConfidentLearning,
  kOutOfRange,
  kMalformedPng,
  kUndefinedMetric,
  kIo,
};

const char* to_string(ErrorCode code);

// Validation errors are caller mistakes (bad input); everything else is a
// runtime failure. The CLI maps these to exit codes 2 and 1.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mipseg
