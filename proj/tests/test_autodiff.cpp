// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "adjointc/autodiff.hpp"
#include "adjointc/optimizer.hpp"
#include "support.hpp"

namespace adjointc {
namespace {

using testing::call;
using testing::corpus_module;
using testing::count_ops;
using testing::f32s;
using testing::f64s;

GradResult differentiate(IrModule& m, const std::string& fn, const std::string& tokens = "",
                         GradMode mode = GradMode::Combined, bool seed_param = false,
                         const AutodiffOptions& opts = {}) {
  const IrFunction& f = *m.find_function(fn);
  ActivitySpec spec = tokens.empty() ? ActivitySpec::canonical(f) : ActivitySpec::parse(f, tokens, f.ret_type.is_float());
  return synthesize_gradient(m, GradRequest{fn, spec, mode, seed_param}, opts);
}

int tape_ops(const IrFunction& f) {
  int n = 0;
  for (const auto& b : f.blocks)
    for (const auto& i : b.insts) n += (i.flags & (kFlagTape | kFlagCtl)) != 0;
  return n;
}

int reverse_blocks(const IrFunction& f) {
  int n = 0;
  for (const auto& b : f.blocks) n += b.label.rfind("reverse.", 0) == 0;
  return n;
}

TEST(Relu3, ValuesAndStructure) {
  IrModule m = corpus_module("relu3.ir");
  const size_t forward = m.find_function("relu3")->blocks.size();
  GradResult r = differentiate(m, "relu3");
  EXPECT_EQ(r.function, "grad_relu3");
  const IrFunction& g = *m.find_function(r.function);
  EXPECT_EQ(reverse_blocks(g), static_cast<int>(forward));
  EXPECT_EQ(tape_ops(g), 0);
  EXPECT_TRUE(r.plan.cached.empty());

  ExecTrace at2 = run(m, call(r.function, {Arg::real(2.0)}));
  ASSERT_TRUE(at2.ok) << at2.error;
  EXPECT_NEAR(at2.ret_f, 12.0, 1e-12);
  EXPECT_TRUE(at2.tape_allocs.empty());
  ExecTrace neg = run(m, call(r.function, {Arg::real(-1.0)}));
  ASSERT_TRUE(neg.ok) << neg.error;
  EXPECT_NEAR(neg.ret_f, 0.0, 1e-12);
}

TEST(Relu3, SeedParameterScalesTheGradient) {
  IrModule m = corpus_module("relu3.ir");
  GradResult r = differentiate(m, "relu3", "active", GradMode::Combined, true);
  EXPECT_EQ(m.find_function(r.function)->params.size(), 2u);
  ExecTrace t = run(m, call(r.function, {Arg::real(2.0), Arg::real(0.5)}));
  ASSERT_TRUE(t.ok) << t.error;
  EXPECT_NEAR(t.ret_f, 6.0, 1e-12);
}

TEST(Sum, CachesTheReadStreamOnce) {
  IrModule m = corpus_module("sum.ir");
  GradResult r = differentiate(m, "sum");
  ASSERT_EQ(r.plan.cached.size(), 1u);
  const auto& [value, entry] = *r.plan.cached.begin();
  EXPECT_EQ(value, "r");
  EXPECT_EQ(entry.kind, CacheKind::Fixed);
  EXPECT_EQ(entry.length, 10);

  ExecConfig c = call(r.function, {Arg::buf(0), Arg::buf(1)},
                      {f64s(std::vector<double>(10, 0.5)), f64s(std::vector<double>(10, 0.0))});
  for (int i = 0; i < 10; ++i) c.read_stream.push_back(0.25 * i - 1.0);
  ExecTrace t = run(m, c);
  ASSERT_TRUE(t.ok) << t.error;
  EXPECT_EQ(t.buffers[1].values, c.read_stream);
  EXPECT_EQ(t.reads, 10);
  EXPECT_EQ(t.tape_allocs, std::vector<int64_t>{80});
  EXPECT_EQ(t.uninit_tape_reads, 0);
}

// augmented, then gradient, through a hand-written driver.
TEST(Sum, SplitModeNeverReadsInTheReverseHalf) {
  IrModule m = corpus_module("sum.ir");
  GradResult r = differentiate(m, "sum", "", GradMode::Split);
  EXPECT_EQ(r.augmented, "augmented_sum");
  EXPECT_EQ(r.function, "gradient_sum");
  EXPECT_EQ(count_ops(*m.find_function(r.function), Opcode::Read), 0);
  EXPECT_EQ(count_ops(*m.find_function(r.augmented), Opcode::Read), 1);

  IrModule d = parse_sources({print_module(m), R"(
define f64 @drive(ptr %x, ptr %dx) {
entry:
  %t = call ptr @augmented_sum(ptr %x, ptr %dx)
  %y = load f64 %t
  call void @gradient_sum(ptr %x, ptr %dx, f64 2.0, ptr %t)
  ret f64 %y
}
)"});
  std::vector<double> x(10), stream(10);
  double primal = 0.0;
  for (int i = 0; i < 10; ++i) {
    x[i] = 0.1 * i;
    stream[i] = 1.0 + i;
    primal += stream[i] * x[i];
  }
  ExecConfig c = call("drive", {Arg::buf(0), Arg::buf(1)}, {f64s(x), f64s(std::vector<double>(10, 0.0))});
  c.read_stream = stream;
  ExecTrace t = run(d, c);
  ASSERT_TRUE(t.ok) << t.error;
  EXPECT_NEAR(t.ret_f, primal, 1e-12);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(t.buffers[1].values[i], 2.0 * stream[i]);
  EXPECT_EQ(t.reads, 10);
}

// Hand-written adjoints of an 8-byte copy: dsrc += ddst; ddst = 0, per element.
TEST(Memcpy, AccumulationWidthFollowsTheCallerTypes) {
  IrModule d = corpus_module("memcpy_double.ir");
  GradResult rd = differentiate(d, "f");
  ExecTrace td = run(d, call(rd.function, {Arg::buf(0), Arg::buf(1), Arg::buf(2), Arg::buf(3)},
                             {f64s({0.0}), f64s({1.0}), f64s({0.0}), f64s({0.0})}));
  ASSERT_TRUE(td.ok) << td.error;
  EXPECT_EQ(td.count("fadd.f64"), 1);
  EXPECT_EQ(td.count("fadd.f32"), 0);
  EXPECT_EQ(td.buffers[3].values, std::vector<double>{1.0});
  EXPECT_EQ(td.buffers[1].values, std::vector<double>{0.0});

  IrModule s = corpus_module("memcpy_float.ir");
  GradResult rs = differentiate(s, "f");
  ExecTrace ts = run(s, call(rs.function, {Arg::buf(0), Arg::buf(1), Arg::buf(2), Arg::buf(3)},
                             {f32s({0.0, 0.0}), f32s({1.0, 2.0}), f32s({0.0, 0.0}), f32s({0.0, 0.0})}));
  ASSERT_TRUE(ts.ok) << ts.error;
  EXPECT_EQ(ts.count("fadd.f32"), 2);
  EXPECT_EQ(ts.count("fadd.f64"), 0);
  EXPECT_EQ(ts.buffers[3].values, (std::vector<double>{1.0, 2.0}));
  EXPECT_EQ(ts.buffers[1].values, (std::vector<double>{0.0, 0.0}));
}

TEST(IndirectCalls, ShadowPairPerAddressTakenFunction) {
  IrModule m = corpus_module("euler.ir");
  GradResult r = differentiate(m, "euler_decay", "active,active,const");
  const Global* g = m.find_global(shadow_global_name("rhs_decay"));
  ASSERT_NE(g, nullptr) << print_module(m);
  ASSERT_EQ(g->elems.size(), 2u);
  ASSERT_TRUE(g->elems[0].value.is_global());
  ASSERT_TRUE(g->elems[1].value.is_global());
  EXPECT_NE(m.find_function(g->elems[0].value.name), nullptr);
  EXPECT_NE(m.find_function(g->elems[1].value.name), nullptr);

  // Two active scalars: derivatives arrive through d_out.
  const double u0 = 1.3, h = 0.02;
  const int64_t steps = 25;
  ExecTrace t = run(m, call(r.function, {Arg::real(u0), Arg::real(h), Arg::integer(steps), Arg::buf(0)},
                            {f64s({0.0, 0.0})}));
  ASSERT_TRUE(t.ok) << t.error;
  EXPECT_NEAR(t.buffers[0].values[0], std::pow(1.0 - h, steps), 1e-12);
  EXPECT_NEAR(t.buffers[0].values[1], -u0 * steps * std::pow(1.0 - h, steps - 1), 1e-10);
}

TEST(CustomAdjoint, UsedForDeclarations) {
  IrModule m = testing::data_module("custom_cube.ir");
  GradResult r = differentiate(m, "sin_cube");
  for (double x : {-1.1, 0.3, 0.7, 1.2}) {
    ExecTrace t = run(m, call(r.function, {Arg::real(x)}));
    ASSERT_TRUE(t.ok) << t.error;
    EXPECT_NEAR(t.ret_f, std::cos(x * x * x) * 3.0 * x * x, 1e-12);
  }
}

TEST(CustomAdjoint, SignatureMismatchIsRejectedAndRolledBack) {
  IrModule m = testing::data_module("custom_cube.ir");
  m.custom_adjoints.clear();
  try {
    register_custom_adjoint(m, "cube", "cube_grad", "cube_aug");
    FAIL() << "swapped halves should not register";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SignatureMismatch);
    std::string msg = e.what();
    EXPECT_NE(msg.find("should be"), std::string::npos) << msg;
    EXPECT_NE(msg.find("found"), std::string::npos) << msg;
  }
  EXPECT_TRUE(m.custom_adjoints.empty());
  register_custom_adjoint(m, "cube", "cube_aug", "cube_grad");
  EXPECT_EQ(m.custom_adjoints.size(), 1u);
}

TEST(Failures, MissingDefinition) {
  IrModule m = testing::data_module("missing.ir");
  IrModule before = m;
  for (const char* fn : {"wrap", "opaque"}) {
    try {
      differentiate(m, fn);
      FAIL() << fn;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::MissingDefinition);
      EXPECT_NE(std::string(e.what()).find("@opaque"), std::string::npos) << e.what();
    }
  }
  EXPECT_EQ(m, before);
}

TEST(Failures, TypeConflictSurfacesFromSynthesis) {
  IrModule m = testing::data_module("type_conflict.ir");
  try {
    differentiate(m, "conflict", "dup");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TypeConflict);
    EXPECT_NE(std::string(e.what()).find("%p at [0]"), std::string::npos) << e.what();
  }
}

TEST(Intrinsics, ExpandAutodiffCalls) {
  IrModule m = corpus_module("autodiff_call.ir");
  EXPECT_EQ(expand_autodiff_intrinsics(m), 1);
  for (const auto& f : m.functions)
    for (const auto& b : f.blocks)
      for (const auto& i : b.insts) EXPECT_NE(i.callee, std::string(kAutodiffIntrinsic));
  EXPECT_TRUE(validate(m).empty());
  const double a = 0.8, b = -1.7;
  ExecTrace t = run(m, call("grad_caller", {Arg::buf(0), Arg::buf(1), Arg::buf(2)}, {f64s({a}), f64s({0.25}), f64s({b})}));
  ASSERT_TRUE(t.ok) << t.error;
  EXPECT_NEAR(t.buffers[1].values[0], 0.25 + std::cos(a * b) * b, 1e-14);
}

TEST(Gradient, EmittedModuleIsOrdinaryIr) {
  for (const char* file : {"norm.ir", "fft.ir", "gmm.ir", "rk4.ir", "brusselator.ir"}) {
    SCOPED_TRACE(file);
    auto k = load_corpus(testing::corpus_dir());
    IrModule m = corpus_module(file);
    const IrFunction* entry = nullptr;
    for (const auto& km : k)
      if (km.ir_path.find(file) != std::string::npos) entry = m.find_function(km.entry);
    ASSERT_NE(entry, nullptr);
    std::string name = entry->name;
    differentiate(m, name);
    EXPECT_TRUE(validate(m).empty());
    EXPECT_EQ(parse_module(print_module(m)), m);
  }
}

TEST(Gradient, FailedSynthesisLeavesModuleUnchanged) {
  IrModule m = corpus_module("norm.ir");
  IrModule before = m;
  const IrFunction& f = *m.find_function("norm");
  EXPECT_THROW(synthesize_gradient(m, GradRequest{"norm", ActivitySpec{{ActivityToken::Dup}, false}}), Error);
  EXPECT_THROW(synthesize_gradient(m, GradRequest{"nope", ActivitySpec::canonical(f)}), Error);
  EXPECT_EQ(m, before);
}

TEST(Gradient, SpecializationsGetDistinctNames) {
  IrModule m = corpus_module("norm.ir");
  GradResult a = differentiate(m, "norm", "dup,dup,const");
  GradResult b = differentiate(m, "norm", "dup,dupnoneed,const");
  EXPECT_NE(a.function, b.function);
  EXPECT_NE(m.find_function(a.function), nullptr);
  EXPECT_NE(m.find_function(b.function), nullptr);
}

TEST(CostModel, ZeroBudgetCachesMore) {
  IrModule m = corpus_module("taylor.ir");
  const IrFunction& f = *m.find_function("taylor");
  GradRequest req{"taylor", ActivitySpec::canonical(f), GradMode::Combined, false};
  AutodiffOptions tight;
  tight.cost.budget = 0;
  TapePlan dflt = plan_tape(m, req);
  TapePlan none = plan_tape(m, req, tight);
  EXPECT_GE(none.cached.size(), dflt.cached.size());
  EXPECT_LE(none.recompute.size(), dflt.recompute.size());
  // Either plan computes the same gradient.
  IrModule a = m, b = m;
  std::string ga = synthesize_gradient(a, req).function, gb = synthesize_gradient(b, req, tight).function;
  ExecTrace ta = run(a, call(ga, {Arg::real(0.6), Arg::integer(30)}));
  ExecTrace tb = run(b, call(gb, {Arg::real(0.6), Arg::integer(30)}));
  ASSERT_TRUE(ta.ok && tb.ok) << ta.error << tb.error;
  EXPECT_NEAR(ta.ret_f, tb.ret_f, 1e-13);
}

TEST(DifferentialUse, ReportsForwardValuesReadByAdjoints) {
  IrModule m = corpus_module("relu3.ir");
  const IrFunction& f = *m.find_function("relu3");
  auto used = differential_use(m, GradRequest{"relu3", ActivitySpec::canonical(f)});
  EXPECT_EQ(used.count("x"), 1u);
  EXPECT_EQ(used.count("res"), 0u);
}

}  // namespace
}  // namespace adjointc
