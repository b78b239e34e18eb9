// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>

#include "adjointc/bench.hpp"
#include "adjointc/optimizer.hpp"
#include "support.hpp"

namespace adjointc {
namespace {

using testing::call;
using testing::count_ops;

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

void expect_same_result(const ExecTrace& a, const ExecTrace& b) {
  ASSERT_EQ(a.ok, b.ok) << a.error << " / " << b.error;
  if (!a.ok) return;
  EXPECT_TRUE(same_bits(a.ret_f, b.ret_f)) << a.ret_f << " vs " << b.ret_f;
  EXPECT_EQ(a.ret_i, b.ret_i);
  ASSERT_EQ(a.buffers.size(), b.buffers.size());
  for (size_t i = 0; i < a.buffers.size(); ++i) {
    ASSERT_EQ(a.buffers[i].values.size(), b.buffers[i].values.size());
    for (size_t k = 0; k < a.buffers[i].values.size(); ++k)
      EXPECT_TRUE(same_bits(a.buffers[i].values[k], b.buffers[i].values[k]))
          << "buffer " << i << "[" << k << "]: " << a.buffers[i].values[k] << " vs " << b.buffers[i].values[k];
  }
}

class PassSemantics : public ::testing::TestWithParam<std::string> {};

// Every pass, and the default pipeline, on 10 random inputs of every kernel.
TEST_P(PassSemantics, BitExactOnRandomInputs) {
  const std::string pass = GetParam();
  std::vector<std::string> passes = pass == "pipeline" ? default_pipeline() : std::vector<std::string>{pass};
  auto corpus = load_corpus(testing::corpus_dir());
  ASSERT_FALSE(corpus.empty());
  for (const auto& k : corpus) {
    SCOPED_TRACE(k.name);
    IrModule m = load_kernel_module(k);
    IrModule o = run_passes(m, passes);
    EXPECT_TRUE(validate(o).empty());
    std::mt19937_64 rng(seed_from_env() ^ std::hash<std::string>{}(k.name + pass));
    const auto& sizes = k.check_sizes.empty() ? std::vector<int64_t>{1} : k.check_sizes;
    for (int i = 0; i < 10; ++i) {
      ExecConfig c = make_point(k, sizes[static_cast<size_t>(i) % sizes.size()], rng);
      c.entry = k.entry;
      ExecTrace before = run(m, c);
      ASSERT_TRUE(before.ok) << before.error;
      EXPECT_GT(before.steps, 0);
      expect_same_result(before, run(o, c));
    }
  }
}

INSTANTIATE_TEST_SUITE_P(AllPasses, PassSemantics,
                         ::testing::Values("simplify", "dce", "cse", "licm", "inline", "pipeline"));

TEST(Pipeline, ParsesNamesAndRejectsUnknown) {
  EXPECT_EQ(parse_pipeline("licm,dce,simplify"), (std::vector<std::string>{"licm", "dce", "simplify"}));
  EXPECT_THROW(parse_pipeline("licm,bogus"), Error);
  EXPECT_FALSE(default_pipeline().empty());
}

TEST(Simplify, FoldsConstantsAndIdentities) {
  IrModule m = parse_module(R"(
define f64 @f(f64 %x) fast {
entry:
  %a = fadd f64 2.0, 3.0
  %b = fmul f64 %x, 1.0
  %c = fadd f64 %b, 0.0
  %d = fmul f64 %c, %a
  ret f64 %d
}
)");
  IrModule o = run_passes(m, {"simplify", "dce"});
  const IrFunction& f = *o.find_function("f");
  EXPECT_EQ(f.instruction_count(), 2u) << print_module(o);
  EXPECT_EQ(run(o, call("f", {Arg::real(1.5)})).ret_f, 7.5);
}

TEST(Dce, RemovesDeadValuesAndKeepsEffects) {
  IrModule m = parse_module(R"(
define f64 @f(f64 %x, ptr %p) {
entry:
  %dead = fmul f64 %x, %x
  %r = read f64
  store f64 %x, %p
  ret f64 %x
}
)");
  IrModule o = run_passes(m, {"dce"});
  const IrFunction& f = *o.find_function("f");
  EXPECT_EQ(count_ops(f, Opcode::FMul), 0);
  EXPECT_EQ(count_ops(f, Opcode::Store), 1);
  EXPECT_EQ(count_ops(f, Opcode::Read), 1);
}

TEST(Cse, MergesRepeatedExpressions) {
  IrModule m = parse_module(R"(
define f64 @f(f64 %x) {
entry:
  %a = fmul f64 %x, %x
  %b = fmul f64 %x, %x
  %c = fadd f64 %a, %b
  ret f64 %c
}
)");
  IrModule o = run_passes(m, {"cse", "dce"});
  EXPECT_EQ(count_ops(*o.find_function("f"), Opcode::FMul), 1);
  EXPECT_EQ(run(o, call("f", {Arg::real(3.0)})).ret_f, 18.0);
}

int calls_in_loop(const IrFunction& f, const std::string& callee) {
  for (const auto& b : f.blocks) {
    if (b.label != "loop") continue;
    int n = 0;
    for (const auto& i : b.insts) n += i.op == Opcode::Call && i.callee == callee;
    return n;
  }
  return -1;
}

// The magnitude call leaves the loop only when the input cannot be written.
TEST(Licm, HoistsReadonlyCallOnlyWithoutAliasing) {
  IrModule n = run_passes(testing::corpus_module("norm.ir"), {"licm"});
  EXPECT_EQ(calls_in_loop(*n.find_function("norm"), "mag"), 0) << print_module(n);

  IrModule a = run_passes(testing::corpus_module("norm_alias.ir"), {"licm"});
  EXPECT_EQ(calls_in_loop(*a.find_function("norm"), "mag"), 1) << print_module(a);
}

TEST(Licm, HoistingChangesAsymptotics) {
  auto k = testing::manifest("norm");
  IrModule m = load_kernel_module(k);
  IrModule o = run_passes(m, {"licm"});
  std::mt19937_64 rng(1);
  std::vector<std::pair<int64_t, ExecConfig>> cfgs;
  for (int64_t n : {64, 128, 256, 512}) cfgs.emplace_back(n, make_point(k, n, rng));
  EXPECT_GT(count_profile(m, "norm", cfgs).slope, 1.85);
  EXPECT_LT(count_profile(o, "norm", cfgs).slope, 1.15);
}

TEST(Inline, RespectsThreshold) {
  IrModule m = testing::corpus_module("memcpy_double.ir");
  PassOptions small;
  small.inline_threshold = 1;
  IrModule kept = run_passes(m, {"inline"}, small);
  EXPECT_EQ(count_ops(*kept.find_function("copy_double"), Opcode::Call), 1);
  IrModule inlined = run_passes(m, {"inline"});
  EXPECT_EQ(count_ops(*inlined.find_function("copy_double"), Opcode::Call), 0);
  EXPECT_EQ(count_ops(*inlined.find_function("copy_double"), Opcode::Memcpy), 1);
}

TEST(Inline, LeavesRecursionAndIndirectCallsAlone) {
  IrModule f = run_passes(testing::corpus_module("fft.ir"), {"inline"});
  int self = 0;
  for (const auto& b : f.find_function("fft")->blocks)
    for (const auto& i : b.insts) self += i.op == Opcode::Call && i.callee == "fft";
  EXPECT_EQ(self, 2);
  IrModule e = run_passes(testing::corpus_module("euler.ir"), {"inline"});
  EXPECT_GE(count_ops(*e.find_function("euler"), Opcode::CallInd), 1);
}

TEST(Passes, OriginalModuleIsUntouched) {
  IrModule m = testing::corpus_module("norm.ir");
  IrModule copy = m;
  run_passes(m, default_pipeline());
  EXPECT_EQ(m, copy);
}

}  // namespace
}  // namespace adjointc
