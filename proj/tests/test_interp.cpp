// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <complex>

#include "adjointc/interp.hpp"
#include "support.hpp"

namespace adjointc {
namespace {

using testing::call;
using testing::f32s;
using testing::f64s;

constexpr const char* kProbe = R"(
define f64 @oob(ptr %x, i64 %k) {
entry:
  %off = imul i64 %k, 8
  %p = ptradd %x, %off
  %v = load f64 %p !tbaa.double
  %r = read f64
  %s = fadd f64 %v, %r
  ret f64 %s
}

define f64 @spin(i64 %n) {
entry:
  br %loop
loop:
  %i = phi i64 [0, %entry], [%i.next, %loop]
  %i.next = iadd i64 %i, 1
  %c = icmp slt i64 %i.next, %n
  condbr %c, %loop, %exit
exit:
  ret f64 1.0
}

define f64 @stale(f64 %x) {
entry:
  %p = alloc 8
  store f64 %x, %p
  free %p
  %v = load f64 %p
  ret f64 %v
}

define f32 @narrow(ptr %x) {
entry:
  %a = load f32 %x !tbaa.float
  %b = fmul f32 %a, 3.0
  store f32 %b, %x !tbaa.float
  ret f32 %b
}

define f64 @pick(i1 %c, f64 %a, f64 %b) {
entry:
  %r = select f64 %c, %a, %b
  ret f64 %r
}

define f64 @through_table(f64 %x) {
entry:
  %p = ptradd @table, 8
  %k = load f64 %p
  %f = load ptr @table
  %y = callind f64 %f(f64 %x)
  %r = fmul f64 %y, %k
  ret f64 %r
}

define f64 @twice(f64 %x) {
entry:
  %r = fadd f64 %x, %x
  ret f64 %r
}

global @table = [ptr @twice, f64 0.25]
)";

IrModule probe() { return parse_module(kProbe); }

TEST(Interp, EvaluatesAndCountsSteps) {
  ExecConfig c = call("oob", {Arg::buf(0), Arg::integer(1)}, {f64s({1.0, 2.0})});
  c.read_stream = {3.0};
  ExecTrace t = run(probe(), c);
  ASSERT_TRUE(t.ok) << t.error;
  EXPECT_EQ(t.ret_f, 5.0);
  EXPECT_EQ(t.steps, 6);
  EXPECT_EQ(t.reads, 1);
  EXPECT_EQ(t.count("load.f64"), 1);
  EXPECT_EQ(t.count("read.f64"), 1);
  EXPECT_EQ(t.count("fadd.f64"), 1);
}

TEST(Interp, StrictModeStopsAtOutOfBounds) {
  ExecConfig c = call("oob", {Arg::buf(0), Arg::integer(2)}, {f64s({1.0, 2.0})});
  c.read_stream = {3.0};
  ExecTrace t = run(probe(), c);
  EXPECT_FALSE(t.ok);
  EXPECT_NE(t.error.find("out-of-bounds load"), std::string::npos) << t.error;
}

TEST(Interp, CountingModeRecordsViolationsAndContinues) {
  ExecConfig c = call("oob", {Arg::buf(0), Arg::integer(2)}, {f64s({1.0, 2.0})});
  c.read_stream = {3.0};
  c.mode = TrapMode::Counting;
  ExecTrace t = run(probe(), c);
  ASSERT_TRUE(t.ok) << t.error;
  ASSERT_EQ(t.violations.size(), 1u);
  EXPECT_EQ(t.ret_f, 3.0);
}

TEST(Interp, ReadStreamExhaustion) {
  ExecTrace t = run(probe(), call("oob", {Arg::buf(0), Arg::integer(0)}, {f64s({1.0})}));
  EXPECT_FALSE(t.ok);
  EXPECT_NE(t.error.find("read stream exhausted"), std::string::npos);
}

TEST(Interp, StepLimit) {
  ExecConfig c = call("spin", {Arg::integer(1000)});
  c.step_limit = 100;
  ExecTrace t = run(probe(), c);
  EXPECT_FALSE(t.ok);
  EXPECT_NE(t.error.find("step limit"), std::string::npos);
  c.step_limit = 1'000'000;
  t = run(probe(), c);
  ASSERT_TRUE(t.ok);
  // br + 1000 * (phi, iadd, icmp, condbr) + ret
  EXPECT_EQ(t.steps, 1 + 1000 * 4 + 1);
}

TEST(Interp, UseAfterFree) {
  ExecTrace t = run(probe(), call("stale", {Arg::real(1.0)}));
  EXPECT_FALSE(t.ok);
  EXPECT_NE(t.error.find("use after free"), std::string::npos) << t.error;
}

TEST(Interp, SinglePrecisionRounds) {
  ExecTrace t = run(probe(), call("narrow", {Arg::buf(0)}, {f32s({0.1})}));
  ASSERT_TRUE(t.ok) << t.error;
  const float expect = static_cast<float>(0.1) * 3.0f;
  EXPECT_EQ(t.ret_f, static_cast<double>(expect));
  EXPECT_EQ(t.buffers[0].values[0], static_cast<double>(expect));
}

TEST(Interp, SelectAndIntegerArguments) {
  IrModule m = probe();
  EXPECT_EQ(run(m, call("pick", {Arg::integer(1), Arg::real(1.0), Arg::real(2.0)})).ret_f, 1.0);
  EXPECT_EQ(run(m, call("pick", {Arg::integer(0), Arg::real(1.0), Arg::real(2.0)})).ret_f, 2.0);
}

TEST(Interp, GlobalsAndIndirectCalls) {
  ExecTrace t = run(probe(), call("through_table", {Arg::real(3.0)}));
  ASSERT_TRUE(t.ok) << t.error;
  EXPECT_EQ(t.ret_f, 1.5);
  EXPECT_EQ(t.count("callind.f64"), 1);
}

TEST(Interp, ConfigurationErrorsThrow) {
  EXPECT_THROW(run(probe(), call("nope", {})), Error);
  EXPECT_THROW(run(probe(), call("pick", {Arg::real(1.0)})), Error);
}

TEST(Interp, IndirectRhsInEuler) {
  IrModule m = testing::corpus_module("euler.ir");
  ExecTrace t = run(m, call("euler", {Arg::real(1.0), Arg::real(0.1), Arg::integer(5), Arg::fn("rhs_decay")}));
  ASSERT_TRUE(t.ok) << t.error;
  EXPECT_NEAR(t.ret_f, std::pow(0.9, 5), 1e-15);
}

// Recursive FFT against a direct O(n^2) transform.
TEST(Interp, RecursiveFftMatchesDirectTransform) {
  IrModule m = testing::corpus_module("fft.ir");
  std::mt19937_64 rng(7);
  for (int64_t n : {1, 2, 8, 32}) {
    SCOPED_TRACE(n);
    auto x = testing::uniform(static_cast<size_t>(2 * n), rng);
    ExecTrace t = run(m, call("fft", {Arg::buf(0), Arg::buf(1), Arg::integer(n), Arg::integer(1)},
                              {f64s(x), f64s(std::vector<double>(static_cast<size_t>(2 * n), 0.0))}));
    ASSERT_TRUE(t.ok) << t.error;
    const auto& out = t.buffers[1].values;
    for (int64_t k = 0; k < n; ++k) {
      std::complex<double> acc = 0.0;
      for (int64_t j = 0; j < n; ++j) {
        double ang = -2.0 * M_PI * static_cast<double>(j * k) / static_cast<double>(n);
        acc += std::complex<double>(x[2 * j], x[2 * j + 1]) * std::polar(1.0, ang);
      }
      EXPECT_NEAR(out[2 * k], acc.real(), 1e-12);
      EXPECT_NEAR(out[2 * k + 1], acc.imag(), 1e-12);
    }
  }
}

TEST(Interp, TapeCountersStartAtZero) {
  ExecTrace t = run(testing::corpus_module("relu3.ir"), call("relu3", {Arg::real(2.0)}));
  ASSERT_TRUE(t.ok);
  EXPECT_EQ(t.ret_f, 8.0);
  EXPECT_EQ(t.tape_reads, 0);
  EXPECT_EQ(t.tape_writes, 0);
  EXPECT_TRUE(t.tape_allocs.empty());
}

}  // namespace
}  // namespace adjointc
