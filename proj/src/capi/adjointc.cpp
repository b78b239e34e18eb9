// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include "adjointc/adjointc.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "adjointc/autodiff.hpp"
#include "adjointc/bench.hpp"
#include "adjointc/error.hpp"
#include "adjointc/gradcheck.hpp"
#include "adjointc/interp.hpp"
#include "adjointc/optimizer.hpp"
#include "adjointc/text.hpp"
#include "adjointc/typetree.hpp"

struct adc_module {
  adjointc::IrModule m;
};

namespace {

using adjointc::Error;
using adjointc::ErrorCode;
using json = nlohmann::json;

thread_local std::string g_last_error;

adc_status status_of(ErrorCode c) {
  switch (c) {
    case ErrorCode::Parse: return ADC_ERR_PARSE;
    case ErrorCode::Validation: return ADC_ERR_VALIDATION;
    case ErrorCode::TypeConflict: return ADC_ERR_TYPE_CONFLICT;
    case ErrorCode::Unsupported: return ADC_ERR_UNSUPPORTED;
    case ErrorCode::MissingDefinition: return ADC_ERR_MISSING_DEFINITION;
    case ErrorCode::SignatureMismatch: return ADC_ERR_SIGNATURE_MISMATCH;
    case ErrorCode::InvalidArgument: return ADC_ERR_INVALID_ARGUMENT;
    case ErrorCode::Runtime: return ADC_ERR_RUNTIME;
    case ErrorCode::Io: return ADC_ERR_IO;
  }
  return ADC_ERR_INTERNAL;
}

adc_status fail(adc_status s, std::string msg) {
  g_last_error = std::move(msg);
  return s;
}

template <class F>
adc_status guarded(F&& body) {
  g_last_error.clear();
  try {
    body();
    return ADC_OK;
  } catch (const Error& e) {
    return fail(status_of(e.code()), e.what());
  } catch (const json::exception& e) {
    return fail(ADC_ERR_INVALID_ARGUMENT, std::string("json: ") + e.what());
  } catch (const std::bad_alloc&) {
    return fail(ADC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(ADC_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(ADC_ERR_INTERNAL, "unknown exception");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw Error(ErrorCode::InvalidArgument, std::string(what) + " is null");
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

void put(char** out, const std::string& s) {
  if (out) *out = dup_string(s);
}

const adjointc::IrFunction& function_of(const adjointc::IrModule& m, const char* fn) {
  require(fn, "function name");
  const adjointc::IrFunction* f = m.find_function(fn);
  if (!f) throw Error(ErrorCode::InvalidArgument, std::string("no function @") + fn);
  return *f;
}

/// "dup,const" with an optional "ret:active" or "ret:const" token; NULL or ""
/// is the canonical pattern.
adjointc::ActivitySpec spec_of(const adjointc::IrFunction& f, const char* activity) {
  if (!activity || !*activity) return adjointc::ActivitySpec::canonical(f);
  std::string params;
  bool ret = f.ret_type.is_float();
  std::stringstream ss(activity);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.rfind("ret:", 0) == 0) {
      std::string r = tok.substr(4);
      if (r == "active") ret = true;
      else if (r == "const") ret = false;
      else throw Error(ErrorCode::InvalidArgument, "return activity must be active or const, got '" + r + "'");
      continue;
    }
    if (!params.empty()) params += ',';
    params += tok;
  }
  if (ret && !f.ret_type.is_float())
    throw Error(ErrorCode::InvalidArgument, "@" + f.name + " does not return a float; its return cannot be active");
  return adjointc::ActivitySpec::parse(f, params, ret);
}

adjointc::AutodiffOptions autodiff_of(const adc_grad_options* o) {
  adjointc::AutodiffOptions a;
  if (o) {
    a.cost.arith = o->cost_arith;
    a.cost.load = o->cost_load;
    a.cost.budget = o->cost_budget;
  }
  return a;
}

adjointc::Buffer buffer_of(const json& j) {
  adjointc::Buffer b;
  std::string elem = j.value("elem", std::string("f64"));
  auto t = adjointc::parse_type(elem);
  if (!t || !(t->is_float() || t->kind == adjointc::TypeKind::I64 || t->kind == adjointc::TypeKind::I32))
    throw Error(ErrorCode::InvalidArgument, "buffer element type must be f64, f32, i64 or i32, got '" + elem + "'");
  b.elem = *t;
  for (const auto& v : j.at("values")) b.values.push_back(v.get<double>());
  return b;
}

json buffer_json(const adjointc::Buffer& b) {
  return {{"elem", std::string(adjointc::type_name(b.elem))}, {"values", b.values}};
}

/// Config JSON typed against the parameters of `f`.
adjointc::ExecConfig config_of(const adjointc::IrFunction& f, const json& j) {
  using adjointc::Arg;
  adjointc::ExecConfig c;
  c.entry = f.name;
  if (j.contains("buffers"))
    for (const auto& b : j.at("buffers")) c.buffers.push_back(buffer_of(b));
  const json args = j.value("args", json::array());
  if (args.size() != f.params.size())
    throw Error(ErrorCode::InvalidArgument, "@" + f.name + " takes " + std::to_string(f.params.size()) +
                                                " arguments, got " + std::to_string(args.size()));
  for (size_t k = 0; k < args.size(); ++k) {
    const json& a = args[k];
    const adjointc::IrType t = f.params[k].type;
    const std::string where = "argument " + std::to_string(k) + " (%" + f.params[k].name + ")";
    if (a.is_number()) {
      if (t.is_float()) c.args.push_back(Arg::real(a.get<double>()));
      else if (t.is_ptr()) throw Error(ErrorCode::InvalidArgument, where + " is a pointer; pass a buffer");
      else c.args.push_back(Arg::integer(a.is_number_integer() ? a.get<int64_t>() : static_cast<int64_t>(a.get<double>())));
    } else if (a.is_null()) {
      c.args.push_back(Arg::null());
    } else if (a.is_object() && a.contains("function")) {
      c.args.push_back(Arg::fn(a.at("function").get<std::string>()));
    } else if (a.is_object() && a.contains("buffer")) {
      size_t idx = a.at("buffer").get<size_t>();
      if (idx >= c.buffers.size()) throw Error(ErrorCode::InvalidArgument, where + " names missing buffer " + std::to_string(idx));
      c.args.push_back(Arg::buf(idx));
    } else if (a.is_object() && a.contains("values")) {
      c.buffers.push_back(buffer_of(a));
      c.args.push_back(Arg::buf(c.buffers.size() - 1));
    } else {
      throw Error(ErrorCode::InvalidArgument, where + " has an unrecognized form: " + a.dump());
    }
  }
  if (j.contains("read_stream"))
    for (const auto& v : j.at("read_stream")) c.read_stream.push_back(v.get<double>());
  std::string mode = j.value("mode", std::string("strict"));
  if (mode == "strict") c.mode = adjointc::TrapMode::Strict;
  else if (mode == "counting") c.mode = adjointc::TrapMode::Counting;
  else throw Error(ErrorCode::InvalidArgument, "mode must be strict or counting, got '" + mode + "'");
  if (j.contains("step_limit")) c.step_limit = j.at("step_limit").get<int64_t>();
  return c;
}

json trace_json(const adjointc::ExecTrace& t) {
  json j;
  j["ok"] = t.ok;
  if (!t.ok) j["error"] = t.error;
  if (t.ret_type.is_float()) j["ret"] = t.ret_f;
  else if (t.ret_type.kind == adjointc::TypeKind::Void) j["ret"] = nullptr;
  else j["ret"] = t.ret_i;
  j["steps"] = t.steps;
  j["reads"] = t.reads;
  j["op_counts"] = t.op_counts;
  j["tape_allocs"] = t.tape_allocs;
  j["tape_reads"] = t.tape_reads;
  j["tape_writes"] = t.tape_writes;
  j["uninit_tape_reads"] = t.uninit_tape_reads;
  json bufs = json::array();
  for (const auto& b : t.buffers) bufs.push_back(buffer_json(b));
  j["buffers"] = bufs;
  if (!t.violations.empty()) j["violations"] = t.violations;
  return j;
}

json plan_json(const adjointc::TapePlan& p) {
  json cached = json::object();
  for (const auto& [v, e] : p.cached)
    cached[v] = {{"kind", std::string(adjointc::cache_kind_name(e.kind))}, {"length", e.length}, {"block", e.block}};
  return {{"cached", cached},        {"recompute", p.recompute}, {"control", p.control},
          {"loops", p.loops},        {"static_trips", p.static_trips}, {"reuse", p.reuse}};
}

}  // namespace

extern "C" {

const char* adc_version(void) { return "0.1.0"; }

const char* adc_status_name(adc_status s) {
  switch (s) {
    case ADC_OK: return "ok";
    case ADC_ERR_PARSE: return "parse";
    case ADC_ERR_VALIDATION: return "validation";
    case ADC_ERR_TYPE_CONFLICT: return "type-conflict";
    case ADC_ERR_UNSUPPORTED: return "unsupported";
    case ADC_ERR_MISSING_DEFINITION: return "missing-definition";
    case ADC_ERR_SIGNATURE_MISMATCH: return "signature-mismatch";
    case ADC_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case ADC_ERR_RUNTIME: return "runtime";
    case ADC_ERR_IO: return "io";
    case ADC_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* adc_last_error(void) { return g_last_error.c_str(); }

void adc_string_free(char* s) { std::free(s); }

adc_status adc_module_parse(const char* text, adc_module** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = nullptr;
    auto* h = new adc_module{adjointc::parse_module(text)};
    *out = h;
  });
}

adc_status adc_module_load_files(const char* const* paths, size_t count, adc_module** out) {
  return guarded([&] {
    require(out, "out");
    if (count > 0) require(paths, "paths");
    *out = nullptr;
    std::vector<std::string> ps;
    for (size_t i = 0; i < count; ++i) {
      require(paths[i], "path");
      ps.emplace_back(paths[i]);
    }
    if (ps.empty()) throw Error(ErrorCode::InvalidArgument, "no input files");
    auto* h = new adc_module{adjointc::parse_files(ps)};
    *out = h;
  });
}

adc_status adc_module_clone(const adc_module* m, adc_module** out) {
  return guarded([&] {
    require(m, "module");
    require(out, "out");
    *out = new adc_module{m->m};
  });
}

void adc_module_free(adc_module* m) { delete m; }

adc_status adc_module_print(const adc_module* m, char** out) {
  return guarded([&] {
    require(m, "module");
    require(out, "out");
    *out = dup_string(adjointc::print_module(m->m));
  });
}

adc_status adc_module_validate(const adc_module* m, char** diagnostics) {
  g_last_error.clear();
  adc_status s = guarded([&] {
    require(m, "module");
    auto diags = adjointc::validate(m->m);
    std::string text;
    for (const auto& d : diags) text += d.to_string() + "\n";
    put(diagnostics, text);
    if (!diags.empty()) throw Error(ErrorCode::Validation, diags.front().to_string());
  });
  return s;
}

adc_status adc_module_has_function(const adc_module* m, const char* fn, int* out) {
  return guarded([&] {
    require(m, "module");
    require(fn, "function name");
    require(out, "out");
    *out = m->m.find_function(fn) != nullptr;
  });
}

adc_status adc_types(const adc_module* m, char** out, int* iterations) {
  return guarded([&] {
    require(m, "module");
    adjointc::TypeEnv env = adjointc::analyze_types(m->m);
    if (iterations) *iterations = env.iterations;
    put(out, adjointc::dump_types(env, m->m));
  });
}

adc_status adc_activity(const adc_module* m, const char* fn, const char* activity, char** out) {
  return guarded([&] {
    require(m, "module");
    const auto& f = function_of(m->m, fn);
    auto spec = spec_of(f, activity);
    adjointc::TypeEnv env = adjointc::analyze_types(m->m);
    put(out, adjointc::dump_activity(adjointc::analyze_activity(m->m, f.name, spec, env)));
  });
}

adc_status adc_optimize(adc_module* m, const char* passes, size_t inline_threshold) {
  return guarded([&] {
    require(m, "module");
    auto ps = passes && *passes ? adjointc::parse_pipeline(passes) : adjointc::default_pipeline();
    adjointc::PassOptions po;
    po.inline_threshold = inline_threshold;
    m->m = adjointc::run_passes(m->m, ps, po);
  });
}

adc_status adc_expand_autodiff(adc_module* m, const adc_grad_options* opts, int* count) {
  return guarded([&] {
    require(m, "module");
    adjointc::IrModule scratch = m->m;
    int n = adjointc::expand_autodiff_intrinsics(scratch, autodiff_of(opts));
    m->m = std::move(scratch);
    if (count) *count = n;
  });
}

adc_status adc_register_custom_adjoint(adc_module* m, const char* fn, const char* augmented, const char* gradient) {
  return guarded([&] {
    require(m, "module");
    require(fn, "function name");
    require(augmented, "augmented name");
    require(gradient, "gradient name");
    adjointc::register_custom_adjoint(m->m, fn, augmented, gradient);
  });
}

void adc_grad_options_default(adc_grad_options* opts) {
  if (!opts) return;
  adjointc::CostModel c;
  opts->mode = ADC_MODE_COMBINED;
  opts->seed_param = 1;
  opts->cost_arith = c.arith;
  opts->cost_load = c.load;
  opts->cost_budget = c.budget;
}

adc_status adc_autodiff(adc_module* m, const char* fn, const char* activity, const adc_grad_options* opts,
                        char** gradient, char** plan) {
  return guarded([&] {
    require(m, "module");
    const auto& f = function_of(m->m, fn);
    adc_grad_options o;
    adc_grad_options_default(&o);
    if (opts) o = *opts;
    adjointc::GradRequest req{f.name, spec_of(f, activity),
                              o.mode == ADC_MODE_SPLIT ? adjointc::GradMode::Split : adjointc::GradMode::Combined,
                              o.seed_param != 0};
    adjointc::GradResult r = adjointc::synthesize_gradient(m->m, req, autodiff_of(&o));
    json pj = plan_json(r.plan);
    pj["gradient"] = r.function;
    if (!r.augmented.empty()) pj["augmented"] = r.augmented;
    put(gradient, r.function);
    put(plan, pj.dump(2));
  });
}

adc_status adc_pipeline(const adc_module* m, const char* fn, const char* activity, const char* mode,
                        const char* passes, const adc_grad_options* opts, adc_module** out, char** gradient) {
  return guarded([&] {
    require(m, "module");
    require(out, "out");
    *out = nullptr;
    const auto& f = function_of(m->m, fn);
    adjointc::PipelineConfig cfg;
    if (passes && *passes) cfg.passes = adjointc::parse_pipeline(passes);
    cfg.autodiff = autodiff_of(opts);
    adc_grad_options o;
    adc_grad_options_default(&o);
    if (opts) o = *opts;
    adjointc::GradRequest req{f.name, spec_of(f, activity),
                              o.mode == ADC_MODE_SPLIT ? adjointc::GradMode::Split : adjointc::GradMode::Combined,
                              o.seed_param != 0};
    auto pm = adjointc::parse_pipeline_mode(mode ? mode : "enzyme");
    adjointc::PipelineResult r = adjointc::pipeline(m->m, req, pm, cfg);
    put(gradient, r.gradient);
    *out = new adc_module{std::move(r.module)};
  });
}

adc_status adc_run(const adc_module* m, const char* config_json, char** trace) {
  return guarded([&] {
    require(m, "module");
    require(config_json, "config");
    json j = json::parse(config_json);
    std::string entry = j.value("entry", std::string());
    const auto& f = function_of(m->m, entry.c_str());
    adjointc::ExecTrace t = adjointc::run(m->m, config_of(f, j));
    put(trace, trace_json(t).dump(2));
    if (!t.ok) throw Error(ErrorCode::Runtime, t.error);
  });
}

adc_status adc_gradcheck(const adc_module* m, const char* fn, const char* activity, const char* config_json,
                         double tol, char** report, int* pass) {
  return guarded([&] {
    require(m, "module");
    require(config_json, "config");
    const auto& f = function_of(m->m, fn);
    auto spec = spec_of(f, activity);
    adjointc::GradCheckOptions go;
    go.tol = tol;
    adjointc::GradCheckReport r = adjointc::gradcheck(m->m, f.name, spec, config_of(f, json::parse(config_json)), go);
    json entries = json::array();
    for (const auto& e : r.entries)
      entries.push_back({{"name", e.name},
                         {"analytic", e.analytic},
                         {"numeric", e.numeric},
                         {"rel_error", e.rel_error},
                         {"pass", e.pass}});
    json rj = {{"function", r.function}, {"gradient", r.gradient},           {"tol", tol},
               {"pass", r.pass},         {"max_rel_error", r.max_rel_error}, {"entries", entries}};
    if (!r.error.empty()) rj["error"] = r.error;
    put(report, rj.dump(2));
    if (pass) *pass = r.pass;
  });
}

adc_status adc_profile(const adc_module* m, const char* fn, const char* configs_json, char** out) {
  return guarded([&] {
    require(m, "module");
    require(configs_json, "configs");
    const auto& f = function_of(m->m, fn);
    json arr = json::parse(configs_json);
    if (!arr.is_array()) throw Error(ErrorCode::InvalidArgument, "profile configs must be a JSON array");
    std::vector<std::pair<int64_t, adjointc::ExecConfig>> cfgs;
    for (const auto& c : arr) cfgs.emplace_back(c.value("n", int64_t{0}), config_of(f, c));
    adjointc::Profile p = adjointc::count_profile(m->m, f.name, cfgs);
    json rows = json::array();
    for (const auto& r : p.rows) rows.push_back({{"n", r.n}, {"steps", r.steps}});
    put(out, json{{"rows", rows}, {"slope", p.slope}}.dump(2));
  });
}

adc_status adc_bench(const char* corpus_dir, const char* modes, uint64_t seed, unsigned threads, char** report,
                     char** table) {
  return guarded([&] {
    require(corpus_dir, "corpus directory");
    adjointc::BenchOptions bo;
    bo.seed = seed;
    bo.threads = threads;
    if (modes && *modes) {
      bo.modes.clear();
      std::stringstream ss(modes);
      std::string tok;
      while (std::getline(ss, tok, ','))
        if (!tok.empty()) bo.modes.push_back(adjointc::parse_pipeline_mode(tok));
      if (bo.modes.empty()) throw Error(ErrorCode::InvalidArgument, "no pipeline modes given");
    }
    adjointc::BenchReport r = adjointc::bench(adjointc::load_corpus(corpus_dir), bo);
    put(report, adjointc::bench_report_json(r));
    put(table, adjointc::bench_report_table(r));
  });
}

adc_status adc_seed_from_env(uint64_t fallback, uint64_t* out) {
  return guarded([&] {
    require(out, "out");
    *out = adjointc::seed_from_env(fallback);
  });
}

}  // extern "C"
