#pragma once

#include <stdexcept>
#include <string>

namespace tlgp {

enum class ErrorCode {
  invalid_argument,
  dimension_mismatch,
  parse,
  io,
  numeric,
};

/// Library-wide exception carrying a machine-readable code next to the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& msg) {
  throw Error(code, msg);
}

}  // namespace tlgp
