// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <set>
#include <string>

#include "adjointc/ir.hpp"
#include "adjointc/typetree.hpp"

namespace adjointc::opt {

/// Replaces every use of the keys of `repl`; chains of replacements are followed.
void substitute(IrFunction& f, const std::map<std::string, Operand>& repl);

/// Deletes blocks unreachable from the entry and the phi entries naming them.
bool remove_unreachable_blocks(IrFunction& f);

/// Drops the phi entries of `block` that arrive from `pred`.
void remove_phi_edge(BasicBlock& block, const std::string& pred);
/// Renames phi incoming labels `from` to `to` in `block`.
void rename_phi_edge(BasicBlock& block, const std::string& from, const std::string& to);

/// All value and block names of `f`.
std::set<std::string> used_names(const IrFunction& f);
/// `base`, or `base.N` for the first N that is unused; the result is recorded in `used`.
std::string fresh(const std::string& base, std::set<std::string>& used);

/// True when executing `inst` has no effect beyond producing its result.
bool side_effect_free(const Instruction& inst, const IrModule* m);

/// LICM with a precomputed type environment (null: no type information).
/// Hoisting keeps value names, so one environment serves a whole pass.
bool licm_with(IrFunction& f, const IrModule& m, const TypeEnv* env);

}  // namespace adjointc::opt
