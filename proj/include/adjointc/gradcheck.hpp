// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "adjointc/activity.hpp"
#include "adjointc/autodiff.hpp"
#include "adjointc/interp.hpp"

namespace adjointc {

/// One derivative coordinate: a scalar parameter or one element of a buffer.
struct GradEntry {
  std::string name;  // "x" or "in[3]"
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  bool pass = false;
};

struct GradCheckReport {
  std::string function;
  std::string gradient;
  std::vector<GradEntry> entries;
  double max_rel_error = 0.0;
  bool pass = false;
  std::string error;       // runtime error of any evaluation
  ExecTrace gradient_trace;  // the analytic run
};

struct GradCheckOptions {
  double tol = 1e-4;
  /// Seed of the d_ret parameter.
  double ret_seed = 1.0;
  /// Seeds the random weights placed in output shadows.
  uint64_t weight_seed = 0x5eed;
  /// Weights of dup buffers; when empty they are drawn from `weight_seed`.
  std::vector<std::vector<double>> weights;
  AutodiffOptions autodiff;
};

/// Vector-Jacobian check of `fn` at `point` (entry ignored). The scalar
/// objective is ret_seed*ret + sum of weights*final contents of dup buffers.
/// Its derivatives come from a combined gradient and from central differences
/// with h = 1e-6*max(1,|x|) (1e-3 for f32), replaying the same read stream every time.
/// Relative error is |a-n| / max(1,|a|,|n|).
GradCheckReport gradcheck(const IrModule& m, const std::string& fn, const ActivitySpec& spec, const ExecConfig& point,
                          const GradCheckOptions& opts = {});

/// Same check against an already synthesized gradient `gradient` in `grad_module`
/// (combined calling convention with a seed parameter).
GradCheckReport gradcheck_with(const IrModule& m, const std::string& fn, const ActivitySpec& spec,
                               const IrModule& grad_module, const std::string& gradient, const ExecConfig& point,
                               const GradCheckOptions& opts = {});

/// Arguments and buffers for the gradient call, shadows filled from `weights`.
ExecConfig gradient_config(const IrFunction& f, const ActivitySpec& spec, const std::string& gradient,
                           const ExecConfig& point, const std::vector<std::vector<double>>& weights,
                           double ret_seed);

struct ProfileRow {
  int64_t n = 0;
  int64_t steps = 0;
};

struct Profile {
  std::vector<ProfileRow> rows;
  double slope = 0.0;  // least-squares fit of log2(steps) against log2(n)
};

/// Runs `fn` once per (n, config); a runtime error throws Error(Runtime).
Profile count_profile(const IrModule& m, const std::string& fn,
                      const std::vector<std::pair<int64_t, ExecConfig>>& cfgs);

double fit_log_slope(const std::vector<ProfileRow>& rows);

}  // namespace adjointc
