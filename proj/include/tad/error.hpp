#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tad {

enum class ErrorKind {
  range,
  alignment,
  degenerate_scale,
  spec,
  ordering,
  input,
  protocol,
  schema,
  format,
  io,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library. The kind is stable and machine
/// readable; the CLI reports it verbatim in its error object.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace tad
