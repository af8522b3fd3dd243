// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace gacoop {

enum class ErrorKind {
  ContractViolation,
  DegenerateVector,
  DimensionMismatch,
  NumericAbort,
  Io,
  BadMagic,
  VersionMismatch,
  Truncated,
  InvariantViolation,
  Config,
  PropertyViolation,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ContractViolation: return "contract violation";
    case ErrorKind::DegenerateVector: return "degenerate vector";
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::NumericAbort: return "numeric abort";
    case ErrorKind::Io: return "i/o error";
    case ErrorKind::BadMagic: return "bad magic";
    case ErrorKind::VersionMismatch: return "version mismatch";
    case ErrorKind::Truncated: return "truncated payload";
    case ErrorKind::InvariantViolation: return "invariant violation";
    case ErrorKind::Config: return "config error";
    case ErrorKind::PropertyViolation: return "property violation";
  }
  return "unknown error";
}

/// Single exception type for the library; callers dispatch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace gacoop
