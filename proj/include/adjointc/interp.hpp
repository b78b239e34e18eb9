// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "adjointc/ir.hpp"

namespace adjointc {

/// Host-provided memory passed by pointer. Elements are f64, f32, i64 or i32.
struct Buffer {
  IrType elem = TypeKind::F64;
  std::vector<double> values;

  friend bool operator==(const Buffer&, const Buffer&) = default;
};

struct Arg {
  enum class Kind { Float, Int, Buffer, Null, Function };
  Kind kind = Kind::Float;
  double f = 0.0;
  int64_t i = 0;
  size_t buffer = 0;     // index into ExecConfig::buffers
  std::string function;  // address of a module global or function

  static Arg real(double v) { return {Kind::Float, v, 0, 0, {}}; }
  static Arg integer(int64_t v) { return {Kind::Int, 0.0, v, 0, {}}; }
  static Arg buf(size_t idx) { return {Kind::Buffer, 0.0, 0, idx, {}}; }
  static Arg null() { return {Kind::Null, 0.0, 0, 0, {}}; }
  static Arg fn(std::string name) { return {Kind::Function, 0.0, 0, 0, std::move(name)}; }
};

enum class TrapMode { Strict, Counting };

struct ExecConfig {
  std::string entry;
  std::vector<Arg> args;
  std::vector<Buffer> buffers;
  std::vector<double> read_stream;
  TrapMode mode = TrapMode::Strict;
  int64_t step_limit = 2'000'000'000;
  /// Records (function, address value) of every executed float load.
  bool record_float_loads = false;
};

struct ExecTrace {
  bool ok = true;
  std::string error;  // first runtime error, if any
  IrType ret_type;
  double ret_f = 0.0;
  int64_t ret_i = 0;
  std::vector<Buffer> buffers;  // final contents of host buffers
  int64_t steps = 0;
  std::map<std::string, int64_t> op_counts;  // "fadd.f64", "read.f64", "call.void", ...
  int64_t reads = 0;
  int64_t tape_reads = 0;
  int64_t tape_writes = 0;
  int64_t uninit_tape_reads = 0;
  std::vector<int64_t> tape_allocs;     // byte sizes of allocations marked !tape
  std::vector<std::string> violations;  // memory errors tolerated in counting mode
  std::set<std::pair<std::string, std::string>> float_loads;

  int64_t count(const std::string& key) const {
    auto it = op_counts.find(key);
    return it == op_counts.end() ? 0 : it->second;
  }
};

/// Executes `cfg.entry`. Runtime errors are reported in the trace, never thrown;
/// configuration errors (unknown entry, bad arity) throw Error(InvalidArgument).
ExecTrace run(const IrModule& m, const ExecConfig& cfg);

}  // namespace adjointc
