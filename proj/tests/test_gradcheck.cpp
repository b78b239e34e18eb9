// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>

#include "adjointc/bench.hpp"
#include "adjointc/gradcheck.hpp"
#include "support.hpp"

namespace adjointc {
namespace {

using testing::call;
using testing::corpus_module;
using testing::f64s;

ActivitySpec canonical(const IrModule& m, const std::string& fn) { return ActivitySpec::canonical(*m.find_function(fn)); }

TEST(GradCheck, PassesOnRelu3AwayFromTheKink) {
  IrModule m = corpus_module("relu3.ir");
  for (double x : {-2.0, -0.5, 0.4, 2.0}) {
    GradCheckReport r = gradcheck(m, "relu3", canonical(m, "relu3"), call("relu3", {Arg::real(x)}));
    EXPECT_TRUE(r.pass) << x << ": " << r.error;
    ASSERT_EQ(r.entries.size(), 1u);
    EXPECT_EQ(r.entries[0].name, "x");
    EXPECT_NEAR(r.entries[0].analytic, x > 0 ? 3 * x * x : 0.0, 1e-12);
  }
}

// A gradient with one wrong constant must be caught.
TEST(GradCheck, DetectsASabotagedGradient) {
  IrModule m = corpus_module("relu3.ir");
  IrModule g = m;
  std::string name = synthesize_gradient(g, GradRequest{"relu3", canonical(m, "relu3"), GradMode::Combined, true}).function;
  bool changed = false;
  for (auto& b : g.find_function(name)->blocks)
    for (auto& i : b.insts)
      if (!changed && b.label.rfind("reverse.", 0) == 0 && i.op == Opcode::FMul) {
        i.op = Opcode::FAdd;
        changed = true;
      }
  ASSERT_TRUE(changed);
  GradCheckReport r = gradcheck_with(m, "relu3", canonical(m, "relu3"), g, name, call("relu3", {Arg::real(1.5)}));
  EXPECT_FALSE(r.pass);
  EXPECT_GT(r.max_rel_error, 1e-2);
}

TEST(GradCheck, BufferEntriesAndWeights) {
  IrModule m = corpus_module("norm.ir");
  ExecConfig p = call("norm", {Arg::buf(0), Arg::buf(1), Arg::integer(3)}, {f64s({0.3, -1.2, 0.8}), f64s({0, 0, 0})});
  GradCheckOptions o;
  o.weights = {{0.0, 0.0, 0.0}, {1.0, 0.0, 0.0}};
  GradCheckReport r = gradcheck(m, "norm", canonical(m, "norm"), p, o);
  ASSERT_TRUE(r.pass) << r.error;
  ASSERT_EQ(r.entries.size(), 6u);
  EXPECT_EQ(r.entries[1].name, "in[1]");
  // out is overwritten, so its initial contents have no influence.
  for (size_t j = 3; j < 6; ++j) {
    EXPECT_EQ(r.entries[j].name, "out[" + std::to_string(j - 3) + "]");
    EXPECT_EQ(r.entries[j].analytic, 0.0);
  }
  // d(x0/|x|)/dx_j = delta_0j/|x| - x0 x_j/|x|^3
  const double n = std::sqrt(0.09 + 1.44 + 0.64);
  const double x[3] = {0.3, -1.2, 0.8};
  for (int j = 0; j < 3; ++j)
    EXPECT_NEAR(r.entries[static_cast<size_t>(j)].analytic, (j == 0 ? 1.0 / n : 0.0) - x[0] * x[j] / (n * n * n), 1e-12);
}

TEST(GradCheck, RejectsPointsWithNoOutput) {
  IrModule m = corpus_module("norm.ir");
  ExecConfig p = call("norm", {Arg::buf(0), Arg::buf(1), Arg::integer(2)}, {f64s({1, 2}), f64s({0, 0})});
  const IrFunction& f = *m.find_function("norm");
  EXPECT_THROW(gradcheck(m, "norm", ActivitySpec::parse(f, "const,const,const", false), p), Error);
  EXPECT_THROW(gradcheck(m, "norm", canonical(m, "norm"), call("norm", {Arg::buf(0)}, {f64s({1})})), Error);
}

TEST(GradCheck, GradientConfigInterleavesShadows) {
  IrModule m = corpus_module("norm.ir");
  const IrFunction& f = *m.find_function("norm");
  ExecConfig p = call("norm", {Arg::buf(0), Arg::buf(1), Arg::integer(2)}, {f64s({1, 2}), f64s({0, 0})});
  ExecConfig g = gradient_config(f, canonical(m, "norm"), "grad", p, {{0.5, 0.5}, {1.0, -1.0}}, 1.0);
  ASSERT_EQ(g.args.size(), 5u);
  EXPECT_EQ(g.entry, "grad");
  EXPECT_EQ(g.buffers[g.args[1].buffer].values, (std::vector<double>{0.5, 0.5}));
  EXPECT_EQ(g.buffers[g.args[3].buffer].values, (std::vector<double>{1.0, -1.0}));
  EXPECT_EQ(g.args[4].kind, Arg::Kind::Int);
}

// The function pointer is dup; its shadow is the pair global of the callee.
TEST(GradCheck, FunctionPointerArgumentsUseShadowPairs) {
  IrModule m = corpus_module("rk4.ir");
  const IrFunction& f = *m.find_function("rk4");
  ActivitySpec spec = ActivitySpec::parse(f, "active,active,const,dup", true);
  ExecConfig p = call("rk4", {Arg::real(0.3), Arg::real(0.02), Arg::integer(15), Arg::fn("rhs_logistic")});
  ExecConfig g = gradient_config(f, spec, "grad_rk4", p, {}, 1.0);
  ASSERT_EQ(g.args.size(), 7u);
  EXPECT_EQ(g.args[4].function, shadow_global_name("rhs_logistic"));
  GradCheckReport r = gradcheck(m, "rk4", spec, p);
  EXPECT_TRUE(r.pass) << r.error << " " << r.max_rel_error;
  EXPECT_EQ(r.entries.size(), 2u);
}

TEST(Profile, SlopeFit) {
  std::vector<ProfileRow> lin, quad;
  for (int64_t n : {64, 128, 256, 512}) {
    lin.push_back({n, 7 * n + 3});
    quad.push_back({n, n * n});
  }
  EXPECT_NEAR(fit_log_slope(quad), 2.0, 1e-12);
  EXPECT_NEAR(fit_log_slope(lin), 1.0, 0.01);
  EXPECT_EQ(fit_log_slope({{8, 10}}), 0.0);
}

TEST(Profile, RuntimeErrorsThrow) {
  IrModule m = corpus_module("sum.ir");
  std::vector<std::pair<int64_t, ExecConfig>> cfgs = {{10, call("sum", {Arg::buf(0)}, {f64s(std::vector<double>(10, 1.0))})}};
  EXPECT_THROW(count_profile(m, "sum", cfgs), Error);
}

// ---- closed forms ----

double taylor_gradient(double x, int64_t n) {
  IrModule m = corpus_module("taylor.ir");
  std::string g = synthesize_gradient(m, GradRequest{"taylor", canonical(m, "taylor"), GradMode::Combined, false}).function;
  ExecConfig c = call(g, {Arg::real(x), Arg::integer(n)});
  c.step_limit = 1'000'000'000;
  ExecTrace t = run(m, c);
  EXPECT_TRUE(t.ok) << t.error;
  return t.ret_f;
}

TEST(ClosedForm, TaylorGeometricSeries) {
  for (int64_t n : {1, 7, 100}) {
    double x = 0.5;
    EXPECT_NEAR(taylor_gradient(x, n), (1.0 - std::pow(x, static_cast<double>(n))) / (1.0 - x), 1e-12) << n;
  }
  EXPECT_NEAR(taylor_gradient(-0.3, 12), (1.0 - std::pow(-0.3, 12.0)) / 1.3, 1e-12);
}

TEST(ClosedForm, EulerDecaySensitivity) {
  IrModule m = corpus_module("euler.ir");
  const IrFunction& f = *m.find_function("euler_decay");
  std::string g =
      synthesize_gradient(m, GradRequest{"euler_decay", ActivitySpec::parse(f, "active,const,const", true),
                                         GradMode::Combined, false})
          .function;
  for (auto [h, steps] : {std::pair{0.1, int64_t{10}}, {0.01, int64_t{300}}, {0.05, int64_t{1}}}) {
    ExecTrace t = run(m, call(g, {Arg::real(0.7), Arg::real(h), Arg::integer(steps)}));
    ASSERT_TRUE(t.ok) << t.error;
    EXPECT_NEAR(t.ret_f, std::pow(1.0 - h, static_cast<double>(steps)), 1e-12);
  }
}

// Parseval: sum |X_k|^2 = N sum |x_j|^2, so the gradient is 2 N x.
TEST(ClosedForm, FftParseval) {
  IrModule m = corpus_module("fft.ir");
  std::string g = synthesize_gradient(m, GradRequest{"energy", canonical(m, "energy"), GradMode::Combined, false}).function;
  std::mt19937_64 rng(3);
  for (int64_t n : {1, 2, 16, 64}) {
    auto x = testing::uniform(static_cast<size_t>(2 * n), rng);
    ExecTrace t = run(m, call(g, {Arg::buf(0), Arg::buf(1), Arg::integer(n)},
                              {f64s(x), f64s(std::vector<double>(x.size(), 0.0))}));
    ASSERT_TRUE(t.ok) << t.error;
    for (size_t j = 0; j < x.size(); ++j)
      EXPECT_NEAR(t.buffers[1].values[j], 2.0 * static_cast<double>(n) * x[j], 1e-10) << n << " " << j;
  }
}

// ---- manifests and bench ----

TEST(Manifest, LoadsEveryCorpusKernel) {
  auto corpus = load_corpus(testing::corpus_dir());
  ASSERT_GE(corpus.size(), 14u);
  for (size_t i = 1; i < corpus.size(); ++i) EXPECT_LT(corpus[i - 1].name, corpus[i].name);
  for (const auto& k : corpus) {
    SCOPED_TRACE(k.name);
    IrModule m = load_kernel_module(k);
    const IrFunction* f = m.find_function(k.entry);
    ASSERT_NE(f, nullptr);
    EXPECT_EQ(k.args.size(), f->params.size());
    EXPECT_FALSE(k.activities.empty());
    for (const auto& a : k.activities) EXPECT_NO_THROW(manifest_spec(*f, a));
    EXPECT_GE(k.points, 5);
  }
}

TEST(Manifest, SizeExpressionsAndPoints) {
  auto k = testing::manifest("fft");
  ASSERT_EQ(k.args.size(), 2u);
  EXPECT_EQ(k.args[0].kind, ArgSpec::Kind::Buffer);
  EXPECT_EQ(k.args[0].size.eval(8), 16);
  EXPECT_EQ(k.args[1].size.eval(8), 8);
  std::mt19937_64 a(5), b(5);
  ExecConfig p = make_point(k, 8, a), q = make_point(k, 8, b);
  EXPECT_EQ(p.buffers, q.buffers);
  ASSERT_EQ(p.buffers[0].values.size(), 16u);
  for (double v : p.buffers[0].values) {
    EXPECT_GE(v, -1.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Manifest, MalformedManifestsAreRejected) {
  std::string dir = ::testing::TempDir();
  auto write = [&](const std::string& name, const std::string& body) {
    std::string path = dir + "/" + name;
    std::ofstream(path) << body;
    return path;
  };
  EXPECT_THROW(load_manifest(write("bad1.json", "{not json")), Error);
  EXPECT_THROW(load_manifest(write("bad2.json", R"({"kernel": "x"})")), Error);
  EXPECT_THROW(load_manifest(write("bad3.json",
                                   R"({"kernel": "x", "ir": "x.ir", "entry": "x", "activities": ["active"],
                                       "args": [{"int": "3*m"}]})")),
               Error);
  EXPECT_THROW(load_manifest(dir + "/missing.json"), Error);
}

TEST(Seed, EnvironmentOverride) {
  ::unsetenv("ADJOINTC_SEED");
  EXPECT_EQ(seed_from_env(11), 11u);
  ::setenv("ADJOINTC_SEED", "42", 1);
  EXPECT_EQ(seed_from_env(11), 42u);
  ::setenv("ADJOINTC_SEED", "oops", 1);
  EXPECT_THROW(seed_from_env(11), Error);
  ::unsetenv("ADJOINTC_SEED");
}

TEST(Pipelines, ShareConfigurationAndAgree) {
  auto k = testing::manifest("norm");
  IrModule m = load_kernel_module(k);
  GradRequest req{"norm", manifest_spec(*m.find_function("norm"), "dup,dup,const"), GradMode::Combined, true};
  PipelineResult e = pipeline(m, req, PipelineMode::Enzyme);
  PipelineResult r = pipeline(m, req, PipelineMode::Ref);
  EXPECT_EQ(e.gradient, r.gradient);
  EXPECT_EQ(pipeline_mode_name(parse_pipeline_mode("ref")), "ref");
  EXPECT_THROW(parse_pipeline_mode("fast"), Error);
  std::mt19937_64 rng(9);
  ExecConfig p = make_point(k, 16, rng);
  GradCheckReport ge = gradcheck_with(m, "norm", req.spec, e.module, e.gradient, p);
  GradCheckReport gr = gradcheck_with(m, "norm", req.spec, r.module, r.gradient, p);
  ASSERT_TRUE(ge.pass && gr.pass) << ge.error << gr.error;
  for (size_t i = 0; i < ge.entries.size(); ++i) EXPECT_NEAR(ge.entries[i].analytic, gr.entries[i].analytic, 1e-12);
}

TEST(Bench, SmallCorpusReport) {
  std::vector<KernelManifest> corpus;
  for (const char* k : {"relu3", "sum", "taylor"}) corpus.push_back(testing::manifest(k));
  BenchOptions o;
  o.seed = 17;
  BenchReport r = bench(corpus, o);
  EXPECT_TRUE(r.all_pass);
  ASSERT_EQ(r.kernels.size(), 3u);
  EXPECT_EQ(r.kernels[0].kernel, "relu3");
  EXPECT_EQ(r.kernels[2].kernel, "taylor");
  for (const auto& s : r.kernels) {
    EXPECT_TRUE(s.gradcheck_enzyme && s.gradcheck_ref) << s.kernel << ": " << s.error;
    EXPECT_LE(s.max_rel_error, 1e-4);
  }
  EXPECT_GE(r.geomean_ratio, 1.0 - 1e-12);
  std::string json = bench_report_json(r);
  EXPECT_NE(json.find("\"schema_version\": 1"), std::string::npos);
  EXPECT_NE(bench_report_table(r).find("geomean"), std::string::npos);

  BenchReport again = bench(corpus, o);
  EXPECT_EQ(bench_report_json(again), json);
}

}  // namespace
}  // namespace adjointc
