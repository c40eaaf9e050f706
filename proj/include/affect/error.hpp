#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace affect {

enum class ErrorKind {
  invalid_argument,
  insufficient_data,
  format_error,
  consistency_error,
  unsupported_operation,
  unsupported_dimension,
  diverged,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so the
/// CLI can map it onto an exit code.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

class DivergedError : public Error {
public:
  DivergedError(std::size_t step, const std::string& message)
      : Error(ErrorKind::diverged, message), step_(step) {}

  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace affect
