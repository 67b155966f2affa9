#pragma once

#include <stdexcept>
#include <string>

namespace bkr {

enum class ErrorCode {
  kMalformedHeader,
  kTruncatedPayload,
  kNonFinite,
  kCountMismatch,
  kIo,
  kZeroNorm,
  kDimMismatch,
  kEmpty,
  kOutOfRange,
  kDuplicateId,
  kInsufficientRows,
  kUndefinedCorrelation,
  kInvalidConfig,
  kInvariant,
};

const char* to_string(ErrorCode code) noexcept;

// Every failure surfaced by the library is an Error carrying a code, so callers
// can tell a truncated file from a dimension mismatch without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace bkr
