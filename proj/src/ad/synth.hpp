// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adjointc/activity.hpp"
#include "adjointc/alias.hpp"
#include "adjointc/autodiff.hpp"
#include "adjointc/cfg.hpp"
#include "adjointc/error.hpp"
#include "adjointc/typetree.hpp"

namespace adjointc::ad {

// ---- instruction builders ---------------------------------------------------

Instruction make(Opcode op, IrType t, std::string result, std::vector<Operand> ops);
Instruction make_br(std::string label);
Instruction make_condbr(Operand c, std::string t, std::string f);
Instruction make_ret(IrType t, std::optional<Operand> v);
Instruction make_store(IrType t, Operand v, Operand p, uint32_t flags = kFlagNone);
Instruction make_load(IrType t, std::string result, Operand p, uint32_t flags = kFlagNone);
Instruction make_cmp(Opcode op, Predicate p, IrType arg, std::string result, Operand a, Operand b);
Instruction make_call(IrType t, std::string result, std::string callee, std::vector<Operand> args,
                      std::vector<IrType> types);
Instruction make_callind(IrType t, std::string result, Operand fn, std::vector<Operand> args,
                         std::vector<IrType> types);

// ---- normalized primal ------------------------------------------------------

struct LoopFacts {
  int header = -1;
  int preheader = -1;
  int latch = -1;
  std::string iv;      // counter taking 0, 1, 2, ... in successive iterations
  int64_t trips = -1;  // header executions per entry when static, else -1
};

/// Header phi equal to start + step * iteration.
struct Affine {
  int loop = -1;
  Operand start;
  int64_t step = 0;
};

enum class ChoiceKind { Entry, Single, Header, Cond, Record };

/// How the reverse of a block picks the predecessor the forward run came from.
struct Choice {
  ChoiceKind kind = ChoiceKind::Entry;
  std::vector<int> preds;  // Single: {p}; Header: {preheader, latch}; Cond: {true, false}; Record: id order
  std::string value;       // Cond: branch condition; Record: predecessor-id phi
};

struct ExitInfo {
  int loop = -1;
  std::string trip;  // value holding the trip count; empty when static
};

struct Prepared {
  IrFunction fn;
  std::unique_ptr<Cfg> cfg;
  std::unique_ptr<DomTree> dom;
  std::unique_ptr<LoopInfo> li;
  int ret_block = -1;
  std::vector<LoopFacts> loops;  // parallel to li->loops
  std::map<std::string, Affine> affine;
  std::vector<Choice> choice;                  // per block
  std::map<int, std::vector<ExitInfo>> exits;  // exit block -> loops left, outermost first
};

/// Copies `f` and rewrites it so every loop has one preheader, one latch and
/// dedicated exit blocks, with a single returning block. Adds counters,
/// trip-count values and predecessor-id phis. Throws Error(Unsupported).
Prepared prepare(const IrFunction& f);

// ---- synthesis ----------------------------------------------------------------

struct PairNames {
  std::string augmented;
  std::string gradient;
  ActivitySpec spec;  // pattern the pair was built for
};

/// Shared state while synthesizing one request and the callee gradients it needs.
struct Context {
  IrModule& m;
  AutodiffOptions opts;
  IrModule original;  // the module before any synthesis, for type context
  std::set<std::string> started;  // split gradients synthesized or in progress

  Context(IrModule& mod, AutodiffOptions o) : m(mod), opts(o), original(mod) {}
  /// Split pair for `fn` under `spec`, synthesizing it when needed.
  PairNames require_pair(const std::string& fn, const ActivitySpec& spec);
  /// Global holding (augmented, gradient) of the canonical pair of `fn`.
  std::string require_shadow_global(const std::string& fn);
  /// Defines a runtime helper (stack push, memcpy adjoint) on first use.
  std::string require_helper(const std::string& kind, IrType t);
};

PairNames pair_names(const IrFunction& f, const ActivitySpec& spec);
int active_scalar_count(const IrFunction& f, const ActivitySpec& spec);
/// Return type of a gradient: void, the single active scalar type, or void with an out pointer.
IrType gradient_return_type(const IrFunction& f, const ActivitySpec& spec);

struct SynthOutput {
  std::vector<IrFunction> functions;
  TapePlan plan;
  std::set<std::string> needed;
};

/// Builds the gradient of `fn` (and in split mode its augmented forward).
/// `names.gradient` is the combined name in combined mode.
SynthOutput synthesize(Context& cx, const std::string& fn, const ActivitySpec& spec, GradMode mode,
                       bool seed_param, const PairNames& names);

}  // namespace adjointc::ad
