// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "adjointc/activity.hpp"
#include "adjointc/ir.hpp"

namespace adjointc {

enum class GradMode { Combined, Split };

struct GradRequest {
  std::string fn;
  ActivitySpec spec;
  GradMode mode = GradMode::Combined;
  /// Combined mode only: take the return seed as a trailing parameter instead of using 1.0.
  bool seed_param = true;
};

/// Recompute-versus-cache thresholds.
struct CostModel {
  int arith = 1;
  int load = 2;
  int budget = 8;
};

struct AutodiffOptions {
  CostModel cost;
};

enum class CacheKind { Scalar, Fixed, Stack };
std::string_view cache_kind_name(CacheKind k);

struct CacheEntry {
  CacheKind kind = CacheKind::Scalar;
  int64_t length = 1;  // slots for Fixed, initial capacity for Stack
  std::string block;   // defining block
};

/// Record of the recompute-versus-cache decisions taken for one gradient.
struct TapePlan {
  std::map<std::string, CacheEntry> cached;
  std::set<std::string> recompute;
  /// Blocks whose reverse needs a recorded predecessor id.
  std::set<std::string> control;
  /// Loop headers whose trip count is recorded at run time.
  std::set<std::string> loops;
  /// Loop headers with a statically known trip count, and that count.
  std::map<std::string, int64_t> static_trips;
  /// Loads served by an existing cache of the same address.
  std::map<std::string, std::string> reuse;
};

struct GradResult {
  std::string function;   // combined gradient, or the gradient half in split mode
  std::string augmented;  // split mode only
  TapePlan plan;
  /// Forward values read by emitted adjoints, before recomputation closure.
  std::set<std::string> needed;
};

/// Adds the gradient of `req.fn` (and any callee gradients) to `m`.
/// Gradient signature: primal parameters, each dup/dupnoneed pointer immediately
/// followed by its shadow, then the return seed (when the return is active),
/// then in split mode the tape pointer. The result is void, the single active
/// scalar derivative, or (two or more) written to a trailing `ptr %d_out`.
/// Throws Error(TypeConflict | Unsupported | MissingDefinition | InvalidArgument).
GradResult synthesize_gradient(IrModule& m, const GradRequest& req, const AutodiffOptions& opts = {});

/// Forward values the adjoints of `fn` read, for the given activity.
std::set<std::string> differential_use(const IrModule& m, const GradRequest& req, const AutodiffOptions& opts = {});
/// Recompute/cache decisions for the gradient of `fn`.
TapePlan plan_tape(const IrModule& m, const GradRequest& req, const AutodiffOptions& opts = {});

/// Registers (augmented, gradient) as the derivative of `fn`. The augmented
/// function takes the canonical interleaved parameters and returns a tape
/// pointer whose first 8 bytes hold the primal result; the gradient takes the
/// interleaved parameters, the return seed when `fn` returns a float, and the
/// tape. Throws Error(SignatureMismatch).
void register_custom_adjoint(IrModule& m, const std::string& fn, const std::string& augmented,
                             const std::string& gradient);
void check_custom_adjoint(const IrModule& m, const std::string& fn);

/// Replaces `call @__enzyme_autodiff(@f, ...)` with calls to synthesized gradients.
/// Returns the number of calls expanded.
int expand_autodiff_intrinsics(IrModule& m, const AutodiffOptions& opts = {});

/// Shadow global holding (augmented, gradient) for a function whose address is taken.
std::string shadow_global_name(const std::string& fn);

}  // namespace adjointc
