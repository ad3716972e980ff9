#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace condquant {

enum class ErrorCode {
  kInvalidInput,
  kContractViolation,
  kDegenerateSample,
  kInvalidConfiguration,
  kNumericalFailure,
  kGuardRejection,
  kMissingFile,
  kMissingResponseColumn,
  kNoUsableRows,
  kNonNumericResponse,
  kIoError,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// command-line layer can map it onto a process exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) raise(code, message);
}

}  // namespace condquant
