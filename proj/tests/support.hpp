// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "adjointc/bench.hpp"
#include "adjointc/interp.hpp"
#include "adjointc/text.hpp"

namespace adjointc::testing {

inline std::string corpus_dir() { return ADJOINTC_CORPUS_DIR; }
inline std::string corpus_path(const std::string& file) { return corpus_dir() + "/" + file; }
inline std::string data_path(const std::string& file) { return std::string(ADJOINTC_TEST_DATA) + "/" + file; }

inline std::string read_file(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline IrModule corpus_module(const std::string& file) { return parse_files({corpus_path(file)}); }
inline IrModule data_module(const std::string& file) { return parse_files({data_path(file)}); }

inline KernelManifest manifest(const std::string& kernel) { return load_manifest(corpus_path(kernel + ".json")); }

inline ExecConfig call(const std::string& fn, std::vector<Arg> args, std::vector<Buffer> buffers = {}) {
  ExecConfig c;
  c.entry = fn;
  c.args = std::move(args);
  c.buffers = std::move(buffers);
  return c;
}

inline Buffer f64s(std::vector<double> v) { return Buffer{TypeKind::F64, std::move(v)}; }
inline Buffer f32s(std::vector<double> v) { return Buffer{TypeKind::F32, std::move(v)}; }

inline std::vector<double> uniform(size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

/// Number of instructions in `f` whose opcode is `op`.
inline int count_ops(const IrFunction& f, Opcode op) {
  int n = 0;
  for (const auto& b : f.blocks)
    for (const auto& i : b.insts) n += i.op == op;
  return n;
}

}  // namespace adjointc::testing
