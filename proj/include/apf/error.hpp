#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace apf {

enum class ErrorCode {
  // Case parsing and network assembly.
  kMissingSection,
  kMalformedRow,
  kDanglingReference,
  kNoReference,
  kZeroImpedanceBranch,
  // Numerical kernels.
  kDimensionMismatch,
  kSingularJacobian,
  kUnknownQuantity,
  kEmptyMatrix,
  kEmptyBasis,
  kAllSamplesFailed,
  kNumericalFailure,
  kInfeasibleConservative,
  kMissingModel,
  // Front end.
  kValidation,
  kIo,
};

std::string_view to_string(ErrorCode code);

// True for codes that indicate bad input rather than a numerical breakdown.
bool is_validation_error(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace apf
