// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>

#include "adjointc/ir.hpp"
#include "adjointc/typetree.hpp"

namespace adjointc {

enum class AliasVerdict { NoAlias, MayAlias };

/// Underlying object an address is derived from.
struct PointerRoot {
  enum class Kind { Alloc, Param, Global, Null, Unknown };
  Kind kind = Kind::Unknown;
  std::string name;
  bool noalias = false;

  friend bool operator==(const PointerRoot&, const PointerRoot&) = default;
};

/// Intraprocedural alias oracle. Combines allocation-site reasoning, noalias
/// parameters and strict aliasing over inferred type trees.
class AliasAnalysis {
 public:
  /// `env` may be null, which disables the strict-aliasing rule.
  AliasAnalysis(const IrModule& m, const IrFunction& f, const TypeEnv* env);

  AliasVerdict alias(const Operand& a, const Operand& b) const;
  PointerRoot root(const Operand& p) const;

  /// True when any instruction of the function may write memory aliasing `p`.
  bool may_be_written(const Operand& p) const;
  /// True when `inst` may write memory aliasing `p`.
  bool writes(const Instruction& inst, const Operand& p) const;

 private:
  const IrModule& m_;
  const IrFunction& f_;
  const TypeEnv* env_;
  std::map<std::string, const Instruction*> defs_;
  mutable std::map<std::string, PointerRoot> cache_;
};

}  // namespace adjointc
