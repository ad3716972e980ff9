#include "condquant/error.hpp"

namespace condquant {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid-input";
    case ErrorCode::kContractViolation: return "contract-violation";
    case ErrorCode::kDegenerateSample: return "degenerate-sample";
    case ErrorCode::kInvalidConfiguration: return "invalid-configuration";
    case ErrorCode::kNumericalFailure: return "numerical-failure";
    case ErrorCode::kGuardRejection: return "guard-rejection";
    case ErrorCode::kMissingFile: return "missing-file";
    case ErrorCode::kMissingResponseColumn: return "missing-response-column";
    case ErrorCode::kNoUsableRows: return "no-usable-rows";
    case ErrorCode::kNonNumericResponse: return "non-numeric-response";
    case ErrorCode::kIoError: return "io-error";
  }
  return "unknown";
}

void raise(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace condquant
