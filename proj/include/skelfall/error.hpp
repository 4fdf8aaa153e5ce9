#pragma once

#include <stdexcept>
#include <string>

namespace skelfall {

// Error classes mirror the C API status codes one-to-one.
enum class ErrorCode {
  invalid_argument = 1,
  dimension = 2,
  format = 3,
  io = 4,
  config = 5,
  topology_mismatch = 6,
  label = 7,
  empty_sample = 8,
  numeric = 9,
  training = 10,
  internal = 11,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::dimension: return "dimension";
    case ErrorCode::format: return "format";
    case ErrorCode::io: return "io";
    case ErrorCode::config: return "config";
    case ErrorCode::topology_mismatch: return "topology_mismatch";
    case ErrorCode::label: return "label";
    case ErrorCode::empty_sample: return "empty_sample";
    case ErrorCode::numeric: return "numeric";
    case ErrorCode::training: return "training";
    case ErrorCode::internal: return "internal";
  }
  return "unknown";
}

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace skelfall
