#include "apf/error.hpp"

namespace apf {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingSection: return "MissingSection";
    case ErrorCode::kMalformedRow: return "MalformedRow";
    case ErrorCode::kDanglingReference: return "DanglingReference";
    case ErrorCode::kNoReference: return "NoReference";
    case ErrorCode::kZeroImpedanceBranch: return "ZeroImpedanceBranch";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kSingularJacobian: return "SingularJacobian";
    case ErrorCode::kUnknownQuantity: return "UnknownQuantity";
    case ErrorCode::kEmptyMatrix: return "EmptyMatrix";
    case ErrorCode::kEmptyBasis: return "EmptyBasis";
    case ErrorCode::kAllSamplesFailed: return "AllSamplesFailed";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kInfeasibleConservative: return "InfeasibleConservative";
    case ErrorCode::kMissingModel: return "MissingModel";
    case ErrorCode::kValidation: return "Validation";
    case ErrorCode::kIo: return "Io";
  }
  return "Unknown";
}

bool is_validation_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingSection:
    case ErrorCode::kMalformedRow:
    case ErrorCode::kDanglingReference:
    case ErrorCode::kNoReference:
    case ErrorCode::kZeroImpedanceBranch:
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kUnknownQuantity:
    case ErrorCode::kMissingModel:
    case ErrorCode::kValidation:
    case ErrorCode::kIo:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what),
      code_(code),
      detail_(what) {}

}  // namespace apf
