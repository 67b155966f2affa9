#include "bkr/error.hpp"

namespace bkr {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kMalformedHeader: return "malformed header";
    case ErrorCode::kTruncatedPayload: return "truncated payload";
    case ErrorCode::kNonFinite: return "non-finite value";
    case ErrorCode::kCountMismatch: return "count mismatch";
    case ErrorCode::kIo: return "i/o error";
    case ErrorCode::kZeroNorm: return "zero-norm vector";
    case ErrorCode::kDimMismatch: return "dimension mismatch";
    case ErrorCode::kEmpty: return "empty input";
    case ErrorCode::kOutOfRange: return "index out of range";
    case ErrorCode::kDuplicateId: return "duplicate id";
    case ErrorCode::kInsufficientRows: return "insufficient rows";
    case ErrorCode::kUndefinedCorrelation: return "undefined correlation";
    case ErrorCode::kInvalidConfig: return "invalid config";
    case ErrorCode::kInvariant: return "invariant violation";
  }
  return "unknown error";
}

}  // namespace bkr
