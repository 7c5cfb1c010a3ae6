#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace ecp {

enum class ErrorCode {
  kInvalidArgument,
  kFrameMismatch,
  kNotFound,
  kDecode,
  kDegenerateBox,
  kNoParse,
  kTransport,
  kFixtureMiss,
  kSchema,
  kMissingImage,
  kDuplicateId,
  kConfig,
  kIo,
  kOrphanRecord,
};

std::string_view to_string(ErrorCode code);
// Inverse of to_string; nothing for unknown names.
std::optional<ErrorCode> error_code_from_string(std::string_view name);

// Every failure raised by the library carries one of the codes above so that
// callers (the pipeline, the CLI) can route it without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ecp
