#pragma once

#include <stdexcept>
#include <string>

namespace specdeform {

enum class ErrorKind {
  Parse,
  Validation,
  DimensionMismatch,
  FingerprintMismatch,
  Numerical,
  EmptySelection,
  Usage,
  Io,
};

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto a stable exit code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace specdeform
