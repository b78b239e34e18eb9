// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <string>
#include <vector>

#include "adjointc/ir.hpp"
#include "adjointc/typetree.hpp"

namespace adjointc {

struct ActivitySpec {
  std::vector<ActivityToken> params;
  bool active_return = false;

  /// Canonical pattern: floats active, pointers dup, integers const, float return active.
  static ActivitySpec canonical(const IrFunction& f);
  /// Parses "dup,const,active" (plus optional return token via `ret`).
  static ActivitySpec parse(const IrFunction& f, const std::string& tokens, bool active_return);
  /// Compact form such as "dca_a", used to name specialized gradients.
  std::string key() const;

  friend bool operator==(const ActivitySpec&, const ActivitySpec&) = default;
  friend bool operator<(const ActivitySpec& a, const ActivitySpec& b) {
    return a.params != b.params ? a.params < b.params : a.active_return < b.active_return;
  }
};

/// Checks token/type compatibility. Throws Error(InvalidArgument).
void check_spec(const IrFunction& f, const ActivitySpec& spec);

struct ActivityInfo {
  /// Float values that may carry a derivative to an active output.
  std::set<std::string> active_values;
  /// Pointer values that carry a shadow address.
  std::set<std::string> shadowed;
  /// Instruction ids (result name, or "block:index" for void instructions).
  std::set<std::string> active_instructions;

  bool is_active(const std::string& v) const { return active_values.count(v) != 0; }
  bool has_shadow(const std::string& v) const { return shadowed.count(v) != 0; }
};

std::string instruction_id(const BasicBlock& b, size_t index);

/// Two-sided taint: forward from active/dup params, backward from the active
/// return and stores into shadowed memory.
ActivityInfo analyze_activity(const IrModule& m, const std::string& fn, const ActivitySpec& spec,
                              const TypeEnv& env);

std::string dump_activity(const ActivityInfo& info);

}  // namespace adjointc
