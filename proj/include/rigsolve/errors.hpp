#pragma once

#include <stdexcept>
#include <string>

namespace rigsolve {

/// Failure categories. Each maps to a stable, greppable code string.
enum class ErrorCode {
  kDimensionMismatch,
  kInvalidRig,
  kInvalidArgument,
  kContractViolation,
  kFileNotFound,
  kVersionMismatch,
  kSchema,
  kOverlappingSections,
  kTruncatedBlob,
  kInvalidTuple,
  kIo,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

  // "E_TRUNCATED_BLOB: truncated blob: expected 10 elements, found 9"
  std::string diagnostic() const;

 private:
  ErrorCode code_;
};

}  // namespace rigsolve
