#include "pfgp/error.hpp"

namespace pfgp {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kOk: return "Ok";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotSymmetric: return "NotSymmetric";
    case ErrorCode::kJitterCapExceeded: return "JitterCapExceeded";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kValidationModeRequired: return "ValidationModeRequired";
    case ErrorCode::kAuxKindUnsupported: return "AuxKindUnsupported";
    case ErrorCode::kNegativeEps: return "NegativeEps";
    case ErrorCode::kSingularCovariance: return "SingularCovariance";
    case ErrorCode::kNonPositiveDelta: return "NonPositiveDelta";
    case ErrorCode::kInflateNotAboveOne: return "InflateNotAboveOne";
    case ErrorCode::kOptimizerDiverged: return "OptimizerDiverged";
    case ErrorCode::kNonFiniteObjective: return "NonFiniteObjective";
    case ErrorCode::kAllRestartsFailed: return "AllRestartsFailed";
    case ErrorCode::kFileNotFound: return "FileNotFound";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kEmptyAfterCleaning: return "EmptyAfterCleaning";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace pfgp
