#pragma once

#include <stdexcept>
#include <string>

namespace pfgp {

// Values are part of the C ABI (see pfgp.h); append only.
enum class ErrorCode : int {
  kOk = 0,
  kInvalidArgument = 1,
  kDimensionMismatch = 2,
  kNotSymmetric = 3,
  kJitterCapExceeded = 4,
  kIndexOutOfRange = 5,
  kValidationModeRequired = 6,
  kAuxKindUnsupported = 7,
  kNegativeEps = 8,
  kSingularCovariance = 9,
  kNonPositiveDelta = 10,
  kInflateNotAboveOne = 11,
  kOptimizerDiverged = 12,
  kNonFiniteObjective = 13,
  kAllRestartsFailed = 14,
  kFileNotFound = 15,
  kParseError = 16,
  kEmptyAfterCleaning = 17,
  kIoError = 18,
  kConfigError = 19,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pfgp
