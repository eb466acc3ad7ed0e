#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shotclust {

// Machine-readable failure categories. The service layer maps these onto
// HTTP status codes and the CLI onto exit codes.
enum class ErrorCode {
  invalid_argument,
  parse_error,
  duplicate,
  not_found,
  out_of_range,
  conflict,
  degenerate,
  io_error,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::duplicate: return "duplicate";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::out_of_range: return "out_of_range";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::degenerate: return "degenerate";
    case ErrorCode::io_error: return "io_error";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace shotclust
