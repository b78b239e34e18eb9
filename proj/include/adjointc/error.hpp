// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace adjointc {

enum class ErrorCode {
  Parse = 1,
  Validation,
  TypeConflict,
  Unsupported,
  MissingDefinition,
  SignatureMismatch,
  InvalidArgument,
  Runtime,
  Io,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg)
      : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse diagnostic with a 1-based source position.
class ParseError : public Error {
 public:
  ParseError(int line, int col, const std::string& msg)
      : Error(ErrorCode::Parse,
              std::to_string(line) + ":" + std::to_string(col) + ": " + msg),
        line_(line), col_(col) {}
  int line() const noexcept { return line_; }
  int column() const noexcept { return col_; }

 private:
  int line_;
  int col_;
};

}  // namespace adjointc
