// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "adjointc/ir.hpp"

namespace adjointc {

inline constexpr size_t kDefaultInlineThreshold = 64;

struct PassOptions {
  size_t inline_threshold = kDefaultInlineThreshold;
};

/// Default optimization pipeline used by both differentiation orderings.
std::vector<std::string> default_pipeline();
/// Splits "licm,dce" into pass names. Throws Error(InvalidArgument) on unknown names.
std::vector<std::string> parse_pipeline(const std::string& text);

/// Runs `passes` in order over a copy of `m`.
IrModule run_passes(const IrModule& m, const std::vector<std::string>& passes, const PassOptions& opts = {});

// Individual passes. Function passes return true when they changed something.
bool simplify(IrFunction& f);
bool dce(IrFunction& f, const IrModule& m);
bool cse(IrFunction& f);
bool licm(IrFunction& f, const IrModule& m);
bool inline_calls(IrModule& m, size_t threshold);

}  // namespace adjointc
