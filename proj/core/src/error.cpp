#include "ecp/error.hpp"

namespace ecp {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid-argument";
    case ErrorCode::kFrameMismatch: return "frame-mismatch";
    case ErrorCode::kNotFound: return "not-found";
    case ErrorCode::kDecode: return "decode-failure";
    case ErrorCode::kDegenerateBox: return "degenerate-box";
    case ErrorCode::kNoParse: return "no-parse";
    case ErrorCode::kTransport: return "transport";
    case ErrorCode::kFixtureMiss: return "fixture-miss";
    case ErrorCode::kSchema: return "schema-mismatch";
    case ErrorCode::kMissingImage: return "missing-image";
    case ErrorCode::kDuplicateId: return "duplicate-id";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kOrphanRecord: return "orphan-record";
  }
  return "unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::kOrphanRecord); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

}  // namespace ecp
