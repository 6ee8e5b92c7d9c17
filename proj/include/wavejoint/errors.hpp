#pragma once

#include <stdexcept>
#include <string>

namespace wavejoint {

// Numeric values are mirrored one-to-one by wj_status in wavejoint.h.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kBoundViolation = 2,
  kDomain = 3,
  kSingularSystem = 4,
  kSingularInterpolation = 5,
  kDuplicateExactNodeConflict = 6,
  kCannotPlaceDistinctPoints = 7,
  kEmptyDataset = 8,
  kInsufficientData = 9,
  kIo = 10,
  kUnknownFunction = 11,
  kInternal = 99,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wavejoint
