// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace mgct {

/// Base of every library error. `code()` is a stable upper-case tag that the
/// CLI prints verbatim so callers can parse failures.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& what)
      : std::runtime_error(what), code_(std::move(code)) {}
  const std::string& code() const noexcept { return code_; }

 private:
  std::string code_;
};

/// A precondition of a public operation was violated by the caller.
class ContractViolation : public Error {
 public:
  explicit ContractViolation(const std::string& what)
      : Error("CONTRACT_VIOLATION", what) {}
};

/// A NaN or infinity showed up where finite values are required.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("NUMERIC_ERROR", what) {}
};

/// Malformed or incompatible file contents.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error("FORMAT_ERROR", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("IO_ERROR", what) {}
};

/// A command needs a trained module whose checkpoint is absent.
class MissingCheckpoint : public Error {
 public:
  explicit MissingCheckpoint(const std::string& what) : Error("MISSING_CHECKPOINT", what) {}
};

#define MGCT_EXPECT(cond, msg)                                     \
  do {                                                             \
    if (!(cond)) throw ::mgct::ContractViolation(std::string(msg)); \
  } while (0)

}  // namespace mgct
