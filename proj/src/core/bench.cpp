// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include "adjointc/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <nlohmann/json.hpp>
#include <sstream>
#include <thread>

#include "adjointc/text.hpp"

namespace adjointc {

namespace fs = std::filesystem;
using nlohmann::json;

std::string_view pipeline_mode_name(PipelineMode m) { return m == PipelineMode::Enzyme ? "enzyme" : "ref"; }

PipelineMode parse_pipeline_mode(const std::string& s) {
  if (s == "enzyme") return PipelineMode::Enzyme;
  if (s == "ref") return PipelineMode::Ref;
  throw Error(ErrorCode::InvalidArgument, "unknown pipeline mode '" + s + "' (expected enzyme or ref)");
}

PipelineResult pipeline(const IrModule& m, const GradRequest& req, PipelineMode mode, const PipelineConfig& cfg) {
  PipelineResult r;
  r.module = mode == PipelineMode::Enzyme ? run_passes(m, cfg.passes, cfg.pass_options) : m;
  r.synthesis = synthesize_gradient(r.module, req, cfg.autodiff);
  r.gradient = r.synthesis.function;
  r.module = run_passes(r.module, cfg.passes, cfg.pass_options);
  if (mode == PipelineMode::Ref) r.module = run_passes(r.module, cfg.passes, cfg.pass_options);
  validate_or_throw(r.module);
  return r;
}

// ---- manifests ----------------------------------------------------------------

namespace {

[[noreturn]] void bad_manifest(const std::string& path, const std::string& why) {
  throw Error(ErrorCode::InvalidArgument, "manifest " + path + ": " + why);
}

SizeExpr parse_size(const json& j, const std::string& path) {
  SizeExpr e;
  if (j.is_number_integer()) {
    e.offset = j.get<int64_t>();
    return e;
  }
  if (!j.is_string()) bad_manifest(path, "size must be an integer or a string like \"n\" or \"2*n\"");
  std::string s = j.get<std::string>();
  if (s == "n") {
    e.scale = 1;
    return e;
  }
  auto star = s.find('*');
  if (star == std::string::npos || s.substr(star + 1) != "n") bad_manifest(path, "bad size expression '" + s + "'");
  try {
    e.scale = std::stoll(s.substr(0, star));
  } catch (const std::exception&) {
    bad_manifest(path, "bad size expression '" + s + "'");
  }
  return e;
}

void parse_range(const json& j, double& lo, double& hi, const std::string& path) {
  if (j.is_number()) {
    lo = hi = j.get<double>();
  } else if (j.is_array() && j.size() == 2) {
    lo = j[0].get<double>();
    hi = j[1].get<double>();
  } else {
    bad_manifest(path, "a range is a number or [lo, hi]");
  }
}

ArgSpec parse_arg(const json& j, const std::string& path) {
  ArgSpec a;
  if (j.contains("real")) {
    a.kind = ArgSpec::Kind::Real;
    a.type = j.value("type", std::string("f64")) == "f32" ? IrType(TypeKind::F32) : IrType(TypeKind::F64);
    parse_range(j["real"], a.lo, a.hi, path);
    if (j.contains("avoid")) {
      double lo, hi;
      parse_range(j["avoid"], lo, hi, path);
      a.avoid = std::make_pair(lo, hi);
    }
  } else if (j.contains("int")) {
    a.kind = ArgSpec::Kind::Int;
    a.type = TypeKind::I64;
    a.size = parse_size(j["int"], path);
  } else if (j.contains("buffer")) {
    a.kind = ArgSpec::Kind::Buffer;
    std::string t = j["buffer"].get<std::string>();
    if (t == "f64") a.type = TypeKind::F64;
    else if (t == "f32") a.type = TypeKind::F32;
    else if (t == "i64") a.type = TypeKind::I64;
    else if (t == "i32") a.type = TypeKind::I32;
    else bad_manifest(path, "unknown buffer element type '" + t + "'");
    if (!j.contains("length")) bad_manifest(path, "buffer needs a length");
    a.size = parse_size(j["length"], path);
    if (j.contains("range")) parse_range(j["range"], a.lo, a.hi, path);
    else if (j.contains("fill")) a.lo = a.hi = j["fill"].get<double>();
  } else if (j.contains("function")) {
    a.kind = ArgSpec::Kind::Function;
    a.type = TypeKind::Ptr;
    a.function = j["function"].get<std::string>();
  } else if (j.contains("null")) {
    a.kind = ArgSpec::Kind::Null;
    a.type = TypeKind::Ptr;
  } else {
    bad_manifest(path, "argument needs one of real, int, buffer, function, null");
  }
  return a;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

KernelManifest load_manifest(const std::string& path) {
  json j;
  try {
    j = json::parse(read_text(path));
  } catch (const json::exception& e) {
    bad_manifest(path, e.what());
  }
  KernelManifest k;
  try {
    k.name = j.at("kernel").get<std::string>();
    k.ir_path = (fs::path(path).parent_path() / j.at("ir").get<std::string>()).string();
    k.entry = j.at("entry").get<std::string>();
    for (const auto& a : j.at("activities")) k.activities.push_back(a.get<std::string>());
    for (const auto& a : j.at("args")) k.args.push_back(parse_arg(a, path));
    if (j.contains("read_stream")) {
      const json& r = j["read_stream"];
      k.read_length = parse_size(r.at("length"), path);
      parse_range(r.at("range"), k.read_lo, k.read_hi, path);
    }
    k.check_sizes = j.at("check_sizes").get<std::vector<int64_t>>();
    k.sizes = j.value("sizes", k.check_sizes);
    k.points = j.value("points", 5);
    k.tol = j.value("tol", 1e-4);
    if (j.contains("expect"))
      for (const auto& [key, v] : j["expect"].items()) k.expect[key] = v.get<double>();
  } catch (const json::exception& e) {
    bad_manifest(path, e.what());
  }
  if (k.activities.empty()) bad_manifest(path, "no activity patterns");
  if (k.check_sizes.empty()) bad_manifest(path, "no check sizes");
  return k;
}

std::vector<KernelManifest> load_corpus(const std::string& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::Io, dir + " is not a directory");
  std::vector<KernelManifest> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.path().extension() == ".json") out.push_back(load_manifest(e.path().string()));
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
  return out;
}

IrModule load_kernel_module(const KernelManifest& k) {
  IrModule m = parse_module(read_text(k.ir_path));
  if (!m.find_function(k.entry)) throw Error(ErrorCode::InvalidArgument, k.ir_path + " has no function @" + k.entry);
  return m;
}

ActivitySpec manifest_spec(const IrFunction& f, const std::string& tokens) {
  return ActivitySpec::parse(f, tokens, f.ret_type.is_float());
}

uint64_t seed_from_env(uint64_t fallback) {
  const char* s = std::getenv("ADJOINTC_SEED");
  if (!s || !*s) return fallback;
  try {
    return std::stoull(s, nullptr, 0);
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, std::string("ADJOINTC_SEED is not an integer: ") + s);
  }
}

ExecConfig make_point(const KernelManifest& k, int64_t n, std::mt19937_64& rng) {
  auto draw = [&](double lo, double hi) {
    return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  ExecConfig c;
  c.entry = k.entry;
  for (const auto& a : k.args) {
    switch (a.kind) {
      case ArgSpec::Kind::Real: {
        double v = draw(a.lo, a.hi);
        for (int tries = 0; a.avoid && v > a.avoid->first && v < a.avoid->second && tries < 1000; ++tries)
          v = draw(a.lo, a.hi);
        if (a.type == TypeKind::F32) v = static_cast<float>(v);
        c.args.push_back(Arg::real(v));
        break;
      }
      case ArgSpec::Kind::Int: c.args.push_back(Arg::integer(a.size.eval(n))); break;
      case ArgSpec::Kind::Buffer: {
        Buffer b;
        b.elem = a.type;
        int64_t len = a.size.eval(n);
        for (int64_t i = 0; i < len; ++i) {
          double v = draw(a.lo, a.hi);
          if (a.type == TypeKind::F32) v = static_cast<float>(v);
          if (a.type.is_int()) v = std::round(v);
          b.values.push_back(v);
        }
        c.buffers.push_back(std::move(b));
        c.args.push_back(Arg::buf(c.buffers.size() - 1));
        break;
      }
      case ArgSpec::Kind::Function: c.args.push_back(Arg::fn(a.function)); break;
      case ArgSpec::Kind::Null: c.args.push_back(Arg::null()); break;
    }
  }
  if (k.read_length)
    for (int64_t i = 0; i < k.read_length->eval(n); ++i) c.read_stream.push_back(draw(k.read_lo, k.read_hi));
  return c;
}

// ---- bench ----------------------------------------------------------------------

namespace {

double geomean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double s = 0.0;
  for (double x : xs) s += std::log(x);
  return std::exp(s / static_cast<double>(xs.size()));
}

struct KernelResult {
  std::vector<BenchRecord> records;
  std::vector<KernelSummary> summaries;
  std::vector<double> ratios;
};

uint64_t mix(uint64_t seed, const std::string& s) {
  uint64_t h = seed ^ 0x9e3779b97f4a7c15ULL;
  for (char c : s) h = (h ^ static_cast<uint8_t>(c)) * 0x100000001b3ULL;
  return h;
}

KernelResult bench_kernel(const KernelManifest& k, const BenchOptions& opts) {
  KernelResult out;
  IrModule m = load_kernel_module(k);
  const IrFunction& f = *m.find_function(k.entry);
  for (const auto& tokens : k.activities) {
    KernelSummary s;
    s.kernel = k.name;
    s.activity = tokens;
    std::mt19937_64 rng(mix(opts.seed, k.name + "/" + tokens));
    try {
      ActivitySpec spec = manifest_spec(f, tokens);
      GradRequest req{k.entry, spec, GradMode::Combined, true};
      std::map<PipelineMode, PipelineResult> built;
      for (PipelineMode mode : opts.modes) built.emplace(mode, pipeline(m, req, mode, opts.pipeline));

      // Correctness first: every point in every mode.
      std::vector<ExecConfig> points;
      for (int64_t n : k.check_sizes)
        for (int p = 0; p < k.points; ++p) points.push_back(make_point(k, n, rng));
      for (auto& [mode, pr] : built) {
        bool ok = true;
        for (size_t p = 0; p < points.size(); ++p) {
          GradCheckOptions go;
          go.tol = k.tol;
          go.weight_seed = mix(opts.seed, k.name + std::to_string(p));
          GradCheckReport rep = gradcheck_with(m, k.entry, spec, pr.module, pr.gradient, points[p], go);
          s.max_rel_error = std::max(s.max_rel_error, rep.max_rel_error);
          if (!rep.pass) {
            ok = false;
            if (s.error.empty())
              s.error = std::string(pipeline_mode_name(mode)) + " point " + std::to_string(p) + ": " +
                        (rep.error.empty() ? "max relative error " + std::to_string(rep.max_rel_error) : rep.error);
          }
        }
        (mode == PipelineMode::Enzyme ? s.gradcheck_enzyme : s.gradcheck_ref) = ok;
      }
      bool clean = true;
      for (auto& [mode, pr] : built) clean = clean && (mode == PipelineMode::Enzyme ? s.gradcheck_enzyme : s.gradcheck_ref);

      // Step counts over the size sweep, only once the gradients are known good.
      if (clean) {
        std::map<PipelineMode, std::vector<ProfileRow>> rows;
        for (int64_t n : k.sizes) {
          ExecConfig point = make_point(k, n, rng);
          std::vector<std::vector<double>> weights(f.params.size());
          for (size_t a = 0; a < f.params.size(); ++a)
            if (point.args[a].kind == Arg::Kind::Buffer)
              weights[a].assign(point.buffers[point.args[a].buffer].values.size(), 1.0);
          std::map<PipelineMode, int64_t> steps;
          for (auto& [mode, pr] : built) {
            ExecConfig g = gradient_config(f, spec, pr.gradient, point, weights, 1.0);
            ExecTrace t = run(pr.module, g);
            if (!t.ok) throw Error(ErrorCode::Runtime, "n=" + std::to_string(n) + ": " + t.error);
            steps[mode] = t.steps;
            rows[mode].push_back({n, t.steps});
            out.records.push_back({k.name, tokens, mode, n, t.steps, true});
          }
          if (steps.count(PipelineMode::Enzyme) && steps.count(PipelineMode::Ref))
            out.ratios.push_back(static_cast<double>(steps[PipelineMode::Ref]) /
                                 static_cast<double>(steps[PipelineMode::Enzyme]));
        }
        std::vector<double> mine(out.ratios.end() - static_cast<long>(std::min(out.ratios.size(), k.sizes.size())),
                                 out.ratios.end());
        s.geomean_ratio = geomean(mine);
        s.slope_enzyme = fit_log_slope(rows[PipelineMode::Enzyme]);
        s.slope_ref = fit_log_slope(rows[PipelineMode::Ref]);
      }
    } catch (const std::exception& e) {
      s.error = e.what();
      s.gradcheck_enzyme = s.gradcheck_ref = false;
    }
    out.summaries.push_back(std::move(s));
  }
  return out;
}

}  // namespace

BenchReport bench(const std::vector<KernelManifest>& corpus, const BenchOptions& opts) {
  std::vector<KernelResult> results(corpus.size());
  std::atomic<size_t> next{0};
  unsigned threads = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max<size_t>(1, corpus.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (size_t i; (i = next++) < corpus.size();) results[i] = bench_kernel(corpus[i], opts);
    });
  for (auto& t : pool) t.join();

  BenchReport r;
  r.seed = opts.seed;
  std::vector<double> ratios;
  r.all_pass = true;
  std::vector<size_t> order(corpus.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return corpus[a].name < corpus[b].name; });
  const bool both = opts.modes.size() == 2;
  for (size_t i : order) {
    auto& kr = results[i];
    r.records.insert(r.records.end(), kr.records.begin(), kr.records.end());
    ratios.insert(ratios.end(), kr.ratios.begin(), kr.ratios.end());
    for (auto& s : kr.summaries) {
      bool ok = s.error.empty();
      for (PipelineMode m : opts.modes) ok = ok && (m == PipelineMode::Enzyme ? s.gradcheck_enzyme : s.gradcheck_ref);
      r.all_pass = r.all_pass && ok;
      r.kernels.push_back(std::move(s));
    }
  }
  r.geomean_ratio = both ? geomean(ratios) : 0.0;
  return r;
}

std::string bench_report_json(const BenchReport& r) {
  json j;
  j["schema_version"] = 1;
  j["seed"] = r.seed;
  j["all_pass"] = r.all_pass;
  j["geomean_ratio"] = r.geomean_ratio;
  j["records"] = json::array();
  for (const auto& rec : r.records)
    j["records"].push_back({{"kernel", rec.kernel},
                            {"activity", rec.activity},
                            {"mode", std::string(pipeline_mode_name(rec.mode))},
                            {"n", rec.n},
                            {"steps", rec.steps},
                            {"gradcheck", rec.gradcheck}});
  j["kernels"] = json::array();
  for (const auto& s : r.kernels)
    j["kernels"].push_back({{"kernel", s.kernel},
                            {"activity", s.activity},
                            {"gradcheck_enzyme", s.gradcheck_enzyme},
                            {"gradcheck_ref", s.gradcheck_ref},
                            {"max_rel_error", s.max_rel_error},
                            {"geomean_ratio", s.geomean_ratio},
                            {"slope_enzyme", s.slope_enzyme},
                            {"slope_ref", s.slope_ref},
                            {"error", s.error}});
  return j.dump(2);
}

std::string bench_report_table(const BenchReport& r) {
  std::ostringstream os;
  size_t kw = 8, aw = 10;
  for (const auto& s : r.kernels) {
    kw = std::max(kw, s.kernel.size() + 2);
    aw = std::max(aw, s.activity.size() + 2);
  }
  const int kwi = static_cast<int>(kw), awi = static_cast<int>(aw);
  os << std::left << std::setw(kwi) << "kernel" << std::setw(awi) << "activity" << std::setw(8) << "check" << std::right
     << std::setw(12) << "ref/enzyme" << std::setw(10) << "slope.e" << std::setw(10) << "slope.r" << "\n";
  os << std::fixed << std::setprecision(3);
  for (const auto& s : r.kernels) {
    std::string check = s.error.empty() && s.gradcheck_enzyme && s.gradcheck_ref ? "ok" : "FAIL";
    os << std::left << std::setw(kwi) << s.kernel << std::setw(awi) << s.activity << std::setw(8) << check << std::right
       << std::setw(12) << s.geomean_ratio << std::setw(10) << s.slope_enzyme << std::setw(10) << s.slope_ref << "\n";
    if (!s.error.empty()) os << "  error: " << s.error << "\n";
  }
  os << "geomean ref/enzyme: " << r.geomean_ratio << "\n";
  return os.str();
}

}  // namespace adjointc
