// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

// One PASS/FAIL line per acceptance criterion. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "adjointc/bench.hpp"
#include "adjointc/optimizer.hpp"
#include "adjointc/text.hpp"
#include "adjointc/typetree.hpp"

namespace adjointc {
namespace {

const std::string kCorpus = ADJOINTC_CORPUS_DIR;
const std::string kData = ADJOINTC_TEST_DATA;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      if (!pass) detail << "; ";
      pass = false;
      detail << what;
    }
  }
};

IrModule corpus_module(const std::string& file) { return parse_files({kCorpus + "/" + file}); }

ExecConfig call(const std::string& fn, std::vector<Arg> args, std::vector<Buffer> buffers = {}) {
  ExecConfig c;
  c.entry = fn;
  c.args = std::move(args);
  c.buffers = std::move(buffers);
  return c;
}

Buffer buf(TypeKind t, std::vector<double> v) { return Buffer{t, std::move(v)}; }

GradResult differentiate(IrModule& m, const std::string& fn, const std::string& tokens = "",
                         GradMode mode = GradMode::Combined) {
  const IrFunction& f = *m.find_function(fn);
  ActivitySpec spec = tokens.empty() ? ActivitySpec::canonical(f) : ActivitySpec::parse(f, tokens, f.ret_type.is_float());
  return synthesize_gradient(m, GradRequest{fn, spec, mode, false});
}

int count_in(const IrFunction& f, Opcode op, bool reverse_only = false) {
  int n = 0;
  for (const auto& b : f.blocks) {
    if (reverse_only && b.label.rfind("reverse.", 0) != 0) continue;
    for (const auto& i : b.insts) n += i.op == op;
  }
  return n;
}

// Ordinary least squares of log(steps) on log(n), computed here rather than by the library.
double slope_of(const std::vector<std::pair<double, double>>& pts) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto [n, s] : pts) {
    double x = std::log(n), y = std::log(s);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double k = static_cast<double>(pts.size());
  return (k * sxy - sx * sy) / (k * sxx - sx * sx);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---- 1 ----
void gradcheck_corpus(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  const uint64_t seed = seed_from_env();
  int checks = 0;
  for (const auto& k : load_corpus(kCorpus)) {
    IrModule m = load_kernel_module(k);
    const IrFunction& f = *m.find_function(k.entry);
    std::mt19937_64 rng(seed ^ std::hash<std::string>{}(k.name));
    const auto sizes = k.check_sizes.empty() ? std::vector<int64_t>{1} : k.check_sizes;
    for (const auto& act : k.activities) {
      GradRequest req{k.entry, manifest_spec(f, act), GradMode::Combined, true};
      PipelineResult pe = pipeline(m, req, PipelineMode::Enzyme);
      PipelineResult pr = pipeline(m, req, PipelineMode::Ref);
      for (int p = 0; p < std::max(5, k.points); ++p) {
        ExecConfig pt = make_point(k, sizes[static_cast<size_t>(p) % sizes.size()], rng);
        GradCheckOptions opt;
        opt.tol = 1e-4;
        for (const PipelineResult* r : {&pe, &pr}) {
          GradCheckReport g = gradcheck_with(m, k.entry, req.spec, r->module, r->gradient, pt, opt);
          ++checks;
          o.require(g.pass, k.name + "/" + act + " point " + std::to_string(p) + " err " +
                                std::to_string(g.max_rel_error) + (g.error.empty() ? "" : " " + g.error));
        }
      }
    }
  }
  double s = seconds_since(t0);
  o.require(s < 30.0, "took " + std::to_string(s) + " s");
  o.detail << (o.pass ? "" : "; ") << checks << " checks in both pipelines";
}

// ---- 2 ----
void norm_asymptotics(Outcome& o) {
  auto t0 = std::chrono::steady_clock::now();
  KernelManifest k = load_manifest(kCorpus + "/norm.json");
  IrModule m = load_kernel_module(k);
  const IrFunction& f = *m.find_function("norm");
  GradRequest req{"norm", ActivitySpec::canonical(f), GradMode::Combined, true};
  PipelineResult pe = pipeline(m, req, PipelineMode::Enzyme);
  PipelineResult pr = pipeline(m, req, PipelineMode::Ref);
  std::vector<std::pair<double, double>> se, sr;
  double worst = 0.0, oracle_worst = 0.0;
  std::mt19937_64 rng(seed_from_env());
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int64_t n : {64, 128, 256, 512}) {
    ExecConfig pt = make_point(k, n, rng);
    std::vector<double> w(static_cast<size_t>(n));
    for (auto& v : w) v = u(rng);
    std::vector<std::vector<double>> weights = {std::vector<double>(w.size(), 0.0), w};
    ExecConfig ce = gradient_config(f, req.spec, pe.gradient, pt, weights, 1.0);
    ExecTrace te = run(pe.module, ce);
    ExecTrace tr = run(pr.module, gradient_config(f, req.spec, pr.gradient, pt, weights, 1.0));
    if (!te.ok || !tr.ok) {
      o.require(false, "run failed at n=" + std::to_string(n) + ": " + te.error + tr.error);
      return;
    }
    se.emplace_back(static_cast<double>(n), static_cast<double>(te.steps));
    sr.emplace_back(static_cast<double>(n), static_cast<double>(tr.steps));
    // Arguments are interleaved (in, d_in, out, d_out, n).
    const size_t din = ce.args[1].buffer;
    const auto& ge = te.buffers[din].values;
    const auto& gr = tr.buffers[din].values;
    // VJP of x/|x|: w/|x| - x (w.x)/|x|^3.
    const auto& x = pt.buffers[0].values;
    double nn = 0, wx = 0;
    for (size_t i = 0; i < x.size(); ++i) {
      nn += x[i] * x[i];
      wx += w[i] * x[i];
    }
    double r = std::sqrt(nn);
    for (size_t i = 0; i < x.size(); ++i) {
      worst = std::max(worst, std::abs(ge[i] - gr[i]));
      oracle_worst = std::max(oracle_worst, std::abs(ge[i] - (w[i] / r - x[i] * wx / (r * r * r))));
    }
  }
  double ke = slope_of(se), kr = slope_of(sr);
  o.require(ke <= 1.15, "enzyme slope " + std::to_string(ke));
  o.require(kr >= 1.85, "ref slope " + std::to_string(kr));
  o.require(worst <= 1e-10, "pipelines differ by " + std::to_string(worst));
  o.require(oracle_worst <= 1e-10, "closed-form VJP differs by " + std::to_string(oracle_worst));
  double s = seconds_since(t0);
  o.require(s < 60.0, "took " + std::to_string(s) + " s");
  if (o.pass) o.detail << "slope enzyme " << ke << ", ref " << kr << ", max diff " << worst;
}

// ---- 3 ----
void memcpy_typing(Outcome& o) {
  IrModule d = corpus_module("memcpy_double.ir");
  GradResult rd = differentiate(d, "f");
  ExecTrace td = run(d, call(rd.function, {Arg::buf(0), Arg::buf(1), Arg::buf(2), Arg::buf(3)},
                             {buf(TypeKind::F64, {0.0}), buf(TypeKind::F64, {1.0}), buf(TypeKind::F64, {0.0}),
                              buf(TypeKind::F64, {0.0})}));
  o.require(td.ok, "double run: " + td.error);
  o.require(td.count("fadd.f64") == 1 && td.count("fadd.f32") == 0,
            "double accumulations " + std::to_string(td.count("fadd.f64")));
  o.require(td.ok && td.buffers[3].values == std::vector<double>{1.0} && td.buffers[1].values == std::vector<double>{0.0},
            "double values");

  IrModule s = corpus_module("memcpy_float.ir");
  GradResult rs = differentiate(s, "f");
  ExecTrace ts = run(s, call(rs.function, {Arg::buf(0), Arg::buf(1), Arg::buf(2), Arg::buf(3)},
                             {buf(TypeKind::F32, {0.0, 0.0}), buf(TypeKind::F32, {1.0, 2.0}),
                              buf(TypeKind::F32, {0.0, 0.0}), buf(TypeKind::F32, {0.0, 0.0})}));
  o.require(ts.ok, "float run: " + ts.error);
  o.require(ts.count("fadd.f32") == 2 && ts.count("fadd.f64") == 0,
            "float accumulations " + std::to_string(ts.count("fadd.f32")));
  o.require(ts.ok && ts.buffers[3].values == std::vector<double>{1.0, 2.0} &&
                ts.buffers[1].values == std::vector<double>{0.0, 0.0},
            "float values");
  if (o.pass) o.detail << "1 x fadd.f64, 2 x fadd.f32, exact shadows";
}

// ---- 4 ----
void sum_read_stream(Outcome& o) {
  IrModule m = corpus_module("sum.ir");
  GradResult r = differentiate(m, "sum");
  const IrFunction& g = *m.find_function(r.function);
  o.require(count_in(g, Opcode::Read, true) == 0, "read in a reverse block");
  o.require(r.plan.cached.size() == 1 && r.plan.cached.begin()->second.kind == CacheKind::Fixed &&
                r.plan.cached.begin()->second.length == 10,
            "plan is not one fixed 10-slot cache");

  std::mt19937_64 rng(seed_from_env());
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  ExecConfig c = call(r.function, {Arg::buf(0), Arg::buf(1)},
                      {buf(TypeKind::F64, std::vector<double>(10, 0.5)), buf(TypeKind::F64, std::vector<double>(10, 0.0))});
  for (int i = 0; i < 10; ++i) c.read_stream.push_back(u(rng));
  ExecTrace t = run(m, c);
  o.require(t.ok, t.error);
  if (!t.ok) return;
  o.require(t.buffers[1].values == c.read_stream, "d_x differs from the read stream");
  o.require(t.reads == 10, "reads " + std::to_string(t.reads));
  o.require(t.tape_allocs == std::vector<int64_t>{80}, "tape allocations differ from one 80-byte block");

  IrModule sm = corpus_module("sum.ir");
  GradResult split = differentiate(sm, "sum", "", GradMode::Split);
  o.require(count_in(*sm.find_function(split.function), Opcode::Read) == 0, "split gradient half reads");
  if (o.pass) o.detail << "10 reads, tape {80 bytes}, d_x == stream";
}

// ---- 5 ----
void relu3_structure(Outcome& o) {
  IrModule m = corpus_module("relu3.ir");
  const size_t forward = m.find_function("relu3")->blocks.size();
  GradResult r = differentiate(m, "relu3");
  const IrFunction& g = *m.find_function(r.function);
  size_t reverse = 0;
  int tape = 0;
  for (const auto& b : g.blocks) {
    reverse += b.label.rfind("reverse.", 0) == 0;
    for (const auto& i : b.insts) tape += (i.flags & (kFlagTape | kFlagCtl)) != 0;
  }
  o.require(reverse == forward, "reverse blocks " + std::to_string(reverse) + " vs " + std::to_string(forward));
  o.require(tape == 0 && r.plan.cached.empty(), "cache operations present");
  // relu(x)^3 differentiates to 3x^2 for x > 0 and 0 otherwise.
  for (double x : {2.0, -1.0}) {
    ExecTrace t = run(m, call(r.function, {Arg::real(x)}));
    double want = x > 0 ? 3 * x * x : 0.0;
    o.require(t.ok && std::abs(t.ret_f - want) <= 1e-12, "gradient at " + std::to_string(x));
    o.require(t.tape_allocs.empty(), "tape allocated at run time");
  }
  if (o.pass) o.detail << forward << " reverse blocks, no cache";
}

// ---- 6 ----
void geomean(Outcome& o) {
  BenchOptions bo;
  bo.seed = seed_from_env();
  BenchReport r = bench(load_corpus(kCorpus), bo);
  o.require(r.all_pass, "bench reported a failure");
  std::map<std::tuple<std::string, std::string, int64_t>, std::pair<int64_t, int64_t>> pairs;
  for (const auto& rec : r.records) {
    auto& p = pairs[{rec.kernel, rec.activity, rec.n}];
    (rec.mode == PipelineMode::Enzyme ? p.first : p.second) = rec.steps;
  }
  double logsum = 0;
  int count = 0;
  double norm256 = 0;
  for (const auto& [key, p] : pairs) {
    if (p.first <= 0 || p.second <= 0) continue;
    double ratio = static_cast<double>(p.second) / static_cast<double>(p.first);
    logsum += std::log(ratio);
    ++count;
    if (std::get<0>(key) == "norm" && std::get<2>(key) == 256) norm256 = ratio;
  }
  o.require(count > 0, "no paired records");
  double gm = count ? std::exp(logsum / count) : 0.0;
  o.require(std::abs(gm - r.geomean_ratio) <= 1e-9 * gm, "reported geomean " + std::to_string(r.geomean_ratio) +
                                                             " vs recomputed " + std::to_string(gm));
  o.require(gm >= 1.0, "geomean " + std::to_string(gm));
  o.require(norm256 > 2.0, "norm ratio at n=256 is " + std::to_string(norm256));
  if (o.pass) o.detail << "geomean " << gm << " over " << count << " pairs, norm@256 " << norm256;
}

// ---- 7 ----
void closed_forms(Outcome& o) {
  {
    IrModule m = corpus_module("taylor.ir");
    GradResult r = differentiate(m, "taylor", "active,const");
    ExecConfig c = call(r.function, {Arg::real(0.5), Arg::integer(10000)});
    c.step_limit = 1'000'000'000;
    ExecTrace t = run(m, c);
    double want = (1.0 - std::pow(0.5, 10000.0)) / 0.5;
    o.require(t.ok && std::abs(t.ret_f - want) <= 1e-8, "taylor " + std::to_string(t.ret_f) + " " + t.error);
  }
  {
    IrModule m = corpus_module("euler.ir");
    GradResult r = differentiate(m, "euler_decay", "active,const,const");
    for (auto [h, steps] : {std::pair{0.01, int64_t{100}}, {0.1, int64_t{37}}}) {
      ExecTrace t = run(m, call(r.function, {Arg::real(1.0), Arg::real(h), Arg::integer(steps)}));
      double want = std::pow(1.0 - h, static_cast<double>(steps));
      o.require(t.ok && std::abs(t.ret_f - want) <= 1e-10, "euler " + std::to_string(t.ret_f) + " " + t.error);
    }
  }
  {
    IrModule m = corpus_module("fft.ir");
    GradResult r = differentiate(m, "energy", "dup,const");
    std::mt19937_64 rng(seed_from_env());
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int64_t n : {8, 64, 256}) {
      std::vector<double> x(static_cast<size_t>(2 * n));
      for (auto& v : x) v = u(rng);
      ExecTrace t = run(m, call(r.function, {Arg::buf(0), Arg::buf(1), Arg::integer(n)},
                                {buf(TypeKind::F64, x), buf(TypeKind::F64, std::vector<double>(x.size(), 0.0))}));
      if (!t.ok) {
        o.require(false, "fft " + t.error);
        continue;
      }
      double worst = 0;
      for (size_t j = 0; j < x.size(); ++j)
        worst = std::max(worst, std::abs(t.buffers[1].values[j] - 2.0 * static_cast<double>(n) * x[j]));
      o.require(worst <= 1e-8, "fft n=" + std::to_string(n) + " off by " + std::to_string(worst));
    }
  }
  if (o.pass) o.detail << "taylor, euler and Parseval within tolerance";
}

// ---- 8 ----
void indirect_calls(Outcome& o) {
  struct Case {
    const char* file;
    const char* entry;
    const char* rhs;
  };
  std::mt19937_64 rng(seed_from_env());
  for (const Case& c : {Case{"euler.ir", "euler", "rhs_decay"}, Case{"rk4.ir", "rk4", "rhs_logistic"}}) {
    IrModule m = corpus_module(c.file);
    const IrFunction& f = *m.find_function(c.entry);
    ActivitySpec spec = ActivitySpec::parse(f, "active,active,const,dup", true);
    IrModule g = m;
    GradResult r = synthesize_gradient(g, GradRequest{c.entry, spec, GradMode::Combined, true});
    // Every function whose address is taken gets an (augmented, gradient) pair.
    for (const auto& fn : m.functions) {
      bool taken = false;
      for (const auto& h : m.functions)
        for (const auto& b : h.blocks)
          for (const auto& i : b.insts)
            for (const auto& a : i.operands) taken |= a.is_global() && a.name == fn.name;
      for (const auto& gl : m.globals)
        for (const auto& el : gl.elems) taken |= el.value.is_global() && el.value.name == fn.name;
      if (!taken) continue;
      const Global* sg = g.find_global(shadow_global_name(fn.name));
      o.require(sg && sg->elems.size() == 2 && g.find_function(sg->elems[0].value.name) &&
                    g.find_function(sg->elems[1].value.name),
                std::string("no shadow pair for @") + fn.name);
    }
    std::uniform_real_distribution<double> u0(0.2, 0.9), hh(0.005, 0.05);
    for (int p = 0; p < 5; ++p) {
      ExecConfig pt = call(c.entry, {Arg::real(u0(rng)), Arg::real(hh(rng)), Arg::integer(20), Arg::fn(c.rhs)});
      GradCheckReport rep = gradcheck_with(m, c.entry, spec, g, r.function, pt);
      o.require(rep.pass, std::string(c.entry) + " gradcheck " + std::to_string(rep.max_rel_error) + " " + rep.error);
    }
  }
  if (o.pass) o.detail << "euler and rk4 through callind, shadow pairs present";
}

// ---- 9 ----
bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

void analysis_hygiene(Outcome& o) {
  int files = 0, max_iter = 0;
  for (const auto& e : std::filesystem::directory_iterator(kCorpus)) {
    if (e.path().extension() != ".ir") continue;
    ++files;
    IrModule m = parse_files({e.path().string()});
    TypeEnv env = analyze_types(m);
    max_iter = std::max(max_iter, env.iterations);
    o.require(env.iterations < 1000, e.path().filename().string() + " iterations " + std::to_string(env.iterations));
    TypeEnv again = env;
    propagate(again, m);
    again.iterations = env.iterations;
    o.require(again == env, e.path().filename().string() + " not idempotent");
  }
  o.require(files >= 10, "too few corpus files");

  int runs = 0;
  for (const auto& k : load_corpus(kCorpus)) {
    IrModule m = load_kernel_module(k);
    IrModule opt = run_passes(m, default_pipeline());
    std::mt19937_64 rng(seed_from_env() ^ std::hash<std::string>{}(k.name));
    const auto sizes = k.check_sizes.empty() ? std::vector<int64_t>{1} : k.check_sizes;
    for (int i = 0; i < 10; ++i) {
      ExecConfig c = make_point(k, sizes[static_cast<size_t>(i) % sizes.size()], rng);
      c.entry = k.entry;
      ExecTrace a = run(m, c), b = run(opt, c);
      ++runs;
      bool same = a.ok && b.ok && same_bits(a.ret_f, b.ret_f) && a.ret_i == b.ret_i && a.buffers.size() == b.buffers.size();
      for (size_t j = 0; same && j < a.buffers.size(); ++j) {
        same = a.buffers[j].values.size() == b.buffers[j].values.size();
        for (size_t q = 0; same && q < a.buffers[j].values.size(); ++q)
          same = same_bits(a.buffers[j].values[q], b.buffers[j].values[q]);
      }
      o.require(same, k.name + " input " + std::to_string(i) + " changed by optimization");
    }
  }
  if (o.pass) o.detail << files << " files, max " << max_iter << " iterations, " << runs << " bit-exact runs";
}

// ---- 10 ----
void failure_paths(Outcome& o) {
  try {
    IrModule m = parse_files({kData + "/type_conflict.ir"});
    analyze_types(m);
    o.require(false, "no TypeConflict raised");
  } catch (const Error& e) {
    std::string msg = e.what();
    o.require(e.code() == ErrorCode::TypeConflict, "wrong code for conflict");
    o.require(msg.find("%p") != std::string::npos && msg.find("[0]") != std::string::npos,
              "diagnostic lacks value or path: " + msg);
  }
  try {
    IrModule m = parse_files({kData + "/missing.ir"});
    differentiate(m, "wrap");
    o.require(false, "no MissingDefinition raised");
  } catch (const Error& e) {
    o.require(e.code() == ErrorCode::MissingDefinition, std::string("wrong error: ") + e.what());
  }
  if (o.pass) o.detail << "TypeConflict names %p at [0]; MissingDefinition for @opaque";
}

}  // namespace
}  // namespace adjointc

int main() {
  using namespace adjointc;
  struct Criterion {
    const char* name;
    std::function<void(Outcome&)> check;
  };
  const std::vector<Criterion> criteria = {
      {"gradcheck every kernel, activity and point", gradcheck_corpus},
      {"norm slopes and pipeline agreement", norm_asymptotics},
      {"memcpy accumulation width", memcpy_typing},
      {"sum read stream cached once", sum_read_stream},
      {"relu3 gradient without cache", relu3_structure},
      {"ref/enzyme step geomean", geomean},
      {"closed-form derivatives", closed_forms},
      {"indirect calls and shadow pairs", indirect_calls},
      {"type fixed point and pass semantics", analysis_hygiene},
      {"diagnostics for conflicts and missing bodies", failure_paths},
  };
  int failures = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].check(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    double s = seconds_since(t0);
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << (i + 1) << "] " << criteria[i].name << " (" << s
              << " s): " << o.detail.str() << std::endl;
  }
  return failures;
}
