// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "adjointc/autodiff.hpp"
#include "adjointc/gradcheck.hpp"
#include "adjointc/optimizer.hpp"

namespace adjointc {

/// enzyme: optimize, differentiate, optimize. ref: differentiate, optimize, optimize.
enum class PipelineMode { Enzyme, Ref };

std::string_view pipeline_mode_name(PipelineMode m);
PipelineMode parse_pipeline_mode(const std::string& s);

struct PipelineConfig {
  std::vector<std::string> passes = default_pipeline();
  PassOptions pass_options;
  AutodiffOptions autodiff;
};

struct PipelineResult {
  IrModule module;
  std::string gradient;
  GradResult synthesis;
};

/// Both orderings share `cfg`; only the position of synthesis differs.
PipelineResult pipeline(const IrModule& m, const GradRequest& req, PipelineMode mode, const PipelineConfig& cfg = {});

/// Integer-valued size expression: a literal, "n", or "<k>*n".
struct SizeExpr {
  int64_t scale = 0;
  int64_t offset = 0;
  int64_t eval(int64_t n) const { return scale * n + offset; }
};

struct ArgSpec {
  enum class Kind { Real, Int, Buffer, Function, Null };
  Kind kind = Kind::Real;
  IrType type = TypeKind::F64;  // scalar type, or buffer element type
  SizeExpr size;                // Int value or Buffer length
  double lo = 0.0, hi = 0.0;    // uniform range; lo == hi is a constant
  std::optional<std::pair<double, double>> avoid;  // open interval excluded from sampling
  std::string function;
};

struct KernelManifest {
  std::string name;
  std::string ir_path;  // resolved against the manifest directory
  std::string entry;
  std::vector<std::string> activities;  // token lists such as "dup,dup,const"
  std::vector<ArgSpec> args;
  std::optional<SizeExpr> read_length;
  double read_lo = -1.0, read_hi = 1.0;
  std::vector<int64_t> check_sizes;  // sizes used for gradient checks
  std::vector<int64_t> sizes;        // size sweep for step counts
  int points = 5;
  double tol = 1e-4;
  std::map<std::string, double> expect;  // named bounds, e.g. slope_enzyme_max
};

KernelManifest load_manifest(const std::string& path);
/// Every *.json in `dir`, sorted by kernel name.
std::vector<KernelManifest> load_corpus(const std::string& dir);
IrModule load_kernel_module(const KernelManifest& k);
ActivitySpec manifest_spec(const IrFunction& f, const std::string& tokens);

/// Seed from ADJOINTC_SEED, else `fallback`.
uint64_t seed_from_env(uint64_t fallback = 20260101);

/// Draws one input point of size n.
ExecConfig make_point(const KernelManifest& k, int64_t n, std::mt19937_64& rng);

struct BenchRecord {
  std::string kernel;
  std::string activity;
  PipelineMode mode = PipelineMode::Enzyme;
  int64_t n = 0;
  int64_t steps = 0;
  bool gradcheck = false;
};

struct KernelSummary {
  std::string kernel;
  std::string activity;
  bool gradcheck_enzyme = false;
  bool gradcheck_ref = false;
  std::string error;
  double geomean_ratio = 0.0;  // ref steps / enzyme steps over the size sweep
  double slope_enzyme = 0.0;
  double slope_ref = 0.0;
  double max_rel_error = 0.0;
};

struct BenchReport {
  uint64_t seed = 0;
  std::vector<BenchRecord> records;
  std::vector<KernelSummary> kernels;
  double geomean_ratio = 0.0;  // over every (kernel, activity, n) pair checked in both modes
  bool all_pass = false;
};

struct BenchOptions {
  uint64_t seed = 20260101;
  std::vector<PipelineMode> modes = {PipelineMode::Enzyme, PipelineMode::Ref};
  PipelineConfig pipeline;
  unsigned threads = 0;  // 0: hardware concurrency
};

/// Gradient-checks every kernel in both modes, then counts gradient steps over
/// each size sweep. Kernels run concurrently; results are ordered by name.
BenchReport bench(const std::vector<KernelManifest>& corpus, const BenchOptions& opts = {});

std::string bench_report_json(const BenchReport& r);
std::string bench_report_table(const BenchReport& r);

}  // namespace adjointc
