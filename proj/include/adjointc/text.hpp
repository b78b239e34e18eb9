// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "adjointc/ir.hpp"

namespace adjointc {

struct Diagnostic {
  std::string function;
  std::string block;
  int line = 0;
  std::string message;

  std::string to_string() const;
};

/// Parses IR text. When `validate_result` is set the module is validated and
/// the first diagnostic is raised as an Error(Validation).
IrModule parse_module(std::string_view text, bool validate_result = true);

/// Parses several sources and merges them by symbol name. A symbol defined
/// in more than one source is an error; declarations unify with definitions.
IrModule parse_sources(const std::vector<std::string>& texts);
IrModule parse_files(const std::vector<std::string>& paths);
void merge_module(IrModule& into, IrModule from);

std::string print_module(const IrModule& m);
std::string print_function(const IrFunction& f);
std::string print_instruction(const Instruction& inst);
std::string format_float(double v);

std::vector<Diagnostic> validate(const IrModule& m);
void validate_or_throw(const IrModule& m);

}  // namespace adjointc
