// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Talks to the library only through adjointc.h.

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "adjointc/adjointc.h"

namespace {

using json = nlohmann::json;

/// Exit status for failed checks (gradcheck mismatch, invalid module, runtime trap).
constexpr int kCheckFailed = 1;
/// Exit status for library or usage errors.
constexpr int kError = 2;

struct ApiError : std::runtime_error {
  adc_status status;
  ApiError(adc_status s, const std::string& msg) : std::runtime_error(msg), status(s) {}
};

void check(adc_status s) {
  if (s != ADC_OK) throw ApiError(s, adc_last_error());
}

/// Owning wrapper for strings returned by the library.
class Str {
 public:
  Str() = default;
  Str(const Str&) = delete;
  Str& operator=(const Str&) = delete;
  ~Str() { adc_string_free(p_); }
  char** out() { return &p_; }
  std::string str() const { return p_ ? p_ : ""; }

 private:
  char* p_ = nullptr;
};

class Module {
 public:
  Module() = default;
  explicit Module(adc_module* m) : m_(m) {}
  Module(const Module&) = delete;
  Module& operator=(const Module&) = delete;
  ~Module() { adc_module_free(m_); }
  adc_module* get() const { return m_; }
  adc_module** out() { return &m_; }

 private:
  adc_module* m_ = nullptr;
};

void load(Module& m, const std::vector<std::string>& files) {
  std::vector<const char*> ps;
  for (const auto& f : files) ps.push_back(f.c_str());
  check(adc_module_load_files(ps.data(), ps.size(), m.out()));
}

void emit(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream os(path);
  if (!os) throw ApiError(ADC_ERR_IO, "cannot write " + path);
  os << text;
  if (!text.empty() && text.back() != '\n') os << '\n';
}

std::string print(const Module& m) {
  Str s;
  check(adc_module_print(m.get(), s.out()));
  return s.str();
}

// ---- argument lists ----
//
// Items are separated by top-level commas:
//   3.0  -2  null  @fn            scalar, null pointer, function address
//   [1;2;3]  f32[1;2]  i64[4;5]   literal buffer (f64 unless prefixed)
//   n  2*n  rand(n)  zeros(2*n)   size-dependent values, needs --sizes or --n
//   f32:rand(n)  ones(8)          generated buffers with an element type

std::vector<std::string> split_top(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  int depth = 0;
  for (char c : s) {
    if (c == '[' || c == '(') ++depth;
    if (c == ']' || c == ')') --depth;
    if (c == ',' && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else if (!std::isspace(static_cast<unsigned char>(c))) {
      cur += c;
    }
  }
  if (!cur.empty() || !out.empty()) out.push_back(cur);
  return out;
}

struct Sizes {
  std::optional<int64_t> n;
  std::mt19937_64* rng = nullptr;

  int64_t eval(const std::string& e) const {
    auto need_n = [&] {
      if (!n) throw ApiError(ADC_ERR_INVALID_ARGUMENT, "'" + e + "' uses n; pass --n or --sizes");
      return *n;
    };
    if (e == "n") return need_n();
    auto star = e.find('*');
    if (star != std::string::npos && e.substr(star + 1) == "n") return std::stoll(e.substr(0, star)) * need_n();
    try {
      size_t used = 0;
      int64_t v = std::stoll(e, &used);
      if (used == e.size()) return v;
    } catch (const std::exception&) {
    }
    throw ApiError(ADC_ERR_INVALID_ARGUMENT, "bad size expression '" + e + "'");
  }
};

double number(const std::string& s) {
  try {
    size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw ApiError(ADC_ERR_INVALID_ARGUMENT, "not a number: '" + s + "'");
}

std::vector<double> generated(const std::string& gen, int64_t len, std::mt19937_64& rng) {
  std::vector<double> v(static_cast<size_t>(std::max<int64_t>(0, len)));
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (auto& x : v) {
    if (gen == "rand") x = d(rng);
    else if (gen == "ones") x = 1.0;
    else if (gen == "zeros") x = 0.0;
    else throw ApiError(ADC_ERR_INVALID_ARGUMENT, "unknown generator '" + gen + "' (rand, zeros, ones)");
  }
  return v;
}

/// Values of a buffer item, or nullopt when `item` is not a buffer.
std::optional<json> buffer_item(const std::string& item, const Sizes& sz) {
  std::string elem = "f64", body = item;
  auto lb = item.find('[');
  auto colon = item.find(':');
  if (lb != std::string::npos && item.back() == ']') {
    if (lb > 0) elem = item.substr(0, lb);
    std::vector<double> vals;
    std::string inner = item.substr(lb + 1, item.size() - lb - 2);
    std::stringstream ss(inner);
    std::string tok;
    while (std::getline(ss, tok, ';'))
      if (!tok.empty()) vals.push_back(number(tok));
    return json{{"elem", elem}, {"values", vals}};
  }
  if (colon != std::string::npos) {
    elem = item.substr(0, colon);
    body = item.substr(colon + 1);
  }
  auto lp = body.find('(');
  if (lp == std::string::npos || body.back() != ')') return std::nullopt;
  std::string gen = body.substr(0, lp);
  int64_t len = sz.eval(body.substr(lp + 1, body.size() - lp - 2));
  return json{{"elem", elem}, {"values", generated(gen, len, *sz.rng)}};
}

json parse_args(const std::string& text, const Sizes& sz) {
  json args = json::array();
  for (const auto& item : split_top(text)) {
    if (item.empty()) throw ApiError(ADC_ERR_INVALID_ARGUMENT, "empty argument in '" + text + "'");
    if (item == "null") {
      args.push_back(nullptr);
    } else if (item[0] == '@') {
      args.push_back({{"function", item.substr(1)}});
    } else if (auto b = buffer_item(item, sz)) {
      args.push_back(*b);
    } else if (item == "n" || item.find("*n") != std::string::npos) {
      args.push_back(sz.eval(item));
    } else if (item.find_first_of(".eE") == std::string::npos && item != "inf" && item != "nan") {
      try {
        size_t used = 0;
        int64_t v = std::stoll(item, &used);
        if (used == item.size()) {
          // Integers stay integral so they can bind integer parameters; the
          // library converts them for float parameters.
          args.push_back(v);
          continue;
        }
      } catch (const std::exception&) {
      }
      args.push_back(number(item));
    } else {
      args.push_back(number(item));
    }
  }
  return args;
}

json parse_stream(const std::string& text, const Sizes& sz) {
  std::vector<double> vals;
  for (const auto& item : split_top(text)) {
    if (auto b = buffer_item(item, sz)) {
      for (double v : b->at("values")) vals.push_back(v);
    } else {
      vals.push_back(number(item));
    }
  }
  return vals;
}

struct RunInputs {
  std::string fn;
  std::string args;
  std::string stream;
  std::string mode = "strict";
  int64_t step_limit = 0;
  std::optional<int64_t> n;
  std::vector<int64_t> sizes;
};

json make_config(const RunInputs& in, std::optional<int64_t> n, std::mt19937_64& rng) {
  Sizes sz{n, &rng};
  json c;
  c["entry"] = in.fn;
  c["args"] = parse_args(in.args, sz);
  if (!in.stream.empty()) c["read_stream"] = parse_stream(in.stream, sz);
  c["mode"] = in.mode;
  if (in.step_limit > 0) c["step_limit"] = in.step_limit;
  if (n) c["n"] = *n;
  return c;
}

uint64_t seed() {
  uint64_t s = 0;
  check(adc_seed_from_env(20260101, &s));
  return s;
}

struct GradFlags {
  std::string mode = "combined";
  bool seed_param = false;
  int cost_arith = 0, cost_load = 0, cost_budget = 0;

  void add(CLI::App* c, bool with_mode) {
    adc_grad_options d;
    adc_grad_options_default(&d);
    cost_arith = d.cost_arith;
    cost_load = d.cost_load;
    cost_budget = d.cost_budget;
    if (with_mode)
      c->add_option("--mode", mode, "combined or split")->check(CLI::IsMember({"combined", "split"}))->capture_default_str();
    c->add_flag("--seed-param", seed_param, "take the return seed as a trailing parameter instead of 1.0");
    c->add_option("--cost-arith", cost_arith, "recompute cost of arithmetic, select and ptradd")->capture_default_str();
    c->add_option("--cost-load", cost_load, "recompute cost of a load")->capture_default_str();
    c->add_option("--cost-budget", cost_budget, "recompute when the cost per use is at most this")->capture_default_str();
  }

  adc_grad_options options() const {
    adc_grad_options o;
    adc_grad_options_default(&o);
    o.mode = mode == "split" ? ADC_MODE_SPLIT : ADC_MODE_COMBINED;
    o.seed_param = seed_param ? 1 : 0;
    o.cost_arith = cost_arith;
    o.cost_load = cost_load;
    o.cost_budget = cost_budget;
    return o;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"adjointc: reverse-mode differentiation of a typed SSA IR"};
  app.require_subcommand(1);
  app.set_version_flag("--version", adc_version());

  std::vector<std::string> inputs;
  std::string output;
  std::string fn, activity;
  auto add_inputs = [&](CLI::App* c) { c->add_option("inputs", inputs, "IR files, merged by symbol name")->required(); };

  auto* c_print = app.add_subcommand("print", "parse, validate and print a module");
  add_inputs(c_print);
  c_print->add_option("-o,--output", output, "output file (default stdout)");

  auto* c_validate = app.add_subcommand("validate", "report validation diagnostics");
  add_inputs(c_validate);

  auto* c_types = app.add_subcommand("types", "dump type trees of every value");
  add_inputs(c_types);
  c_types->add_option("-o,--output", output, "output file (default stdout)");

  auto* c_act = app.add_subcommand("activity", "print active values and instructions of a function");
  add_inputs(c_act);
  c_act->add_option("--fn", fn, "function to analyze")->required();
  c_act->add_option("--activity", activity, "e.g. dup,const,active[,ret:const]; default canonical");

  std::string passes;
  size_t inline_threshold = 64;
  auto* c_opt = app.add_subcommand("opt", "run optimization passes");
  add_inputs(c_opt);
  c_opt->add_option("--passes", passes, "comma list of simplify, dce, cse, licm, inline; default pipeline if empty");
  c_opt->add_option("--inline-threshold", inline_threshold, "maximum callee size to inline")->capture_default_str();
  c_opt->add_option("-o,--output", output, "output file (default stdout)");

  GradFlags gf;
  std::string plan_path;
  bool expand = false;
  std::vector<std::string> customs;
  auto* c_ad = app.add_subcommand("autodiff", "synthesize a gradient");
  add_inputs(c_ad);
  c_ad->add_option("--fn", fn, "function to differentiate (omit with --expand)");
  c_ad->add_option("--activity", activity, "e.g. dup,const,active[,ret:const]; default canonical");
  gf.add(c_ad, true);
  c_ad->add_flag("--expand", expand, "expand __enzyme_autodiff calls");
  c_ad->add_option("--custom", customs, "fn=augmented:gradient custom adjoint registration");
  c_ad->add_option("--plan", plan_path, "write the tape plan as JSON");
  c_ad->add_option("-o,--output", output, "output file (default stdout)");

  RunInputs ri;
  bool profile = false;
  int64_t n_value = 0;
  auto* c_run = app.add_subcommand("run", "interpret a function");
  add_inputs(c_run);
  c_run->add_option("--fn", ri.fn, "entry function")->required();
  c_run->add_option("--args", ri.args, "argument list, e.g. 3.0,[1;2;3],rand(n),@g");
  c_run->add_option("--read-stream", ri.stream, "values returned by successive read calls");
  c_run->add_option("--trap", ri.mode, "strict or counting")->check(CLI::IsMember({"strict", "counting"}));
  c_run->add_option("--step-limit", ri.step_limit, "abort after this many executed instructions");
  auto* n_opt = c_run->add_option("--n", n_value, "value of n in size expressions");
  c_run->add_option("--sizes", ri.sizes, "size sweep for --profile")->delimiter(',');
  c_run->add_flag("--profile", profile, "print step counts as JSON rows {n, steps}");

  double tol = 1e-4;
  RunInputs gi;
  int64_t gn = 0;
  auto* c_gc = app.add_subcommand("gradcheck", "compare a gradient against central differences");
  add_inputs(c_gc);
  c_gc->add_option("--fn", gi.fn, "function to check")->required();
  c_gc->add_option("--activity", activity, "e.g. dup,const,active[,ret:const]; default canonical");
  c_gc->add_option("--at", gi.args, "point, same syntax as run --args")->required();
  c_gc->add_option("--read-stream", gi.stream, "values returned by successive read calls");
  auto* gn_opt = c_gc->add_option("--n", gn, "value of n in size expressions");
  c_gc->add_option("--tol", tol, "relative error tolerance")->capture_default_str();

  std::string pmode = "enzyme";
  GradFlags pf;
  auto* c_pipe = app.add_subcommand("pipeline", "optimize and differentiate in enzyme or ref order");
  add_inputs(c_pipe);
  c_pipe->add_option("--fn", fn, "function to differentiate")->required();
  c_pipe->add_option("--activity", activity, "e.g. dup,const,active[,ret:const]; default canonical");
  c_pipe->add_option("--mode", pmode, "enzyme or ref")->check(CLI::IsMember({"enzyme", "ref"}))->capture_default_str();
  c_pipe->add_option("--passes", passes, "default pipeline if empty");
  pf.add(c_pipe, false);
  c_pipe->add_option("-o,--output", output, "output file (default stdout)");

  std::string corpus = "corpus", modes = "enzyme,ref", table_path;
  unsigned threads = 0;
  auto* c_bench = app.add_subcommand("bench", "gradcheck and count steps over a corpus");
  c_bench->add_option("--corpus", corpus, "directory of kernel manifests")->capture_default_str();
  c_bench->add_option("--modes", modes, "pipelines to run: enzyme, ref or both")->capture_default_str();
  c_bench->add_option("--out", output, "JSON report path (default stdout)");
  c_bench->add_option("--table", table_path, "also write a text table");
  c_bench->add_option("--threads", threads, "0 uses every core");

  CLI11_PARSE(app, argc, argv);

  try {
    std::mt19937_64 rng(seed());
    if (*c_print) {
      Module m;
      load(m, inputs);
      emit(print(m), output);
    } else if (*c_validate) {
      Module m;
      std::vector<const char*> ps;
      for (const auto& f : inputs) ps.push_back(f.c_str());
      adc_status ls = adc_module_load_files(ps.data(), ps.size(), m.out());
      if (ls == ADC_ERR_VALIDATION) {
        std::cout << adc_last_error() << "\n";
        return kCheckFailed;
      }
      check(ls);
      Str d;
      adc_status s = adc_module_validate(m.get(), d.out());
      std::cout << (s == ADC_OK ? "ok\n" : d.str());
      return s == ADC_OK ? 0 : kCheckFailed;
    } else if (*c_types) {
      Module m;
      load(m, inputs);
      Str d;
      int iters = 0;
      check(adc_types(m.get(), d.out(), &iters));
      emit(d.str() + "; fixed point after " + std::to_string(iters) + " iterations\n", output);
    } else if (*c_act) {
      Module m;
      load(m, inputs);
      Str d;
      check(adc_activity(m.get(), fn.c_str(), activity.c_str(), d.out()));
      emit(d.str(), "");
    } else if (*c_opt) {
      Module m;
      load(m, inputs);
      check(adc_optimize(m.get(), passes.c_str(), inline_threshold));
      emit(print(m), output);
    } else if (*c_ad) {
      Module m;
      load(m, inputs);
      for (const auto& c : customs) {
        auto eq = c.find('='), colon = c.find(':');
        if (eq == std::string::npos || colon == std::string::npos || colon < eq)
          throw ApiError(ADC_ERR_INVALID_ARGUMENT, "--custom expects fn=augmented:gradient, got '" + c + "'");
        check(adc_register_custom_adjoint(m.get(), c.substr(0, eq).c_str(), c.substr(eq + 1, colon - eq - 1).c_str(),
                                          c.substr(colon + 1).c_str()));
      }
      adc_grad_options o = gf.options();
      if (expand) {
        int count = 0;
        check(adc_expand_autodiff(m.get(), &o, &count));
        std::cerr << "expanded " << count << " autodiff call(s)\n";
      }
      if (!fn.empty()) {
        Str g, plan;
        check(adc_autodiff(m.get(), fn.c_str(), activity.c_str(), &o, g.out(), plan.out()));
        std::cerr << "gradient: @" << g.str() << "\n";
        if (!plan_path.empty()) emit(plan.str(), plan_path);
      } else if (!expand) {
        throw ApiError(ADC_ERR_INVALID_ARGUMENT, "autodiff needs --fn or --expand");
      }
      emit(print(m), output);
    } else if (*c_run) {
      Module m;
      load(m, inputs);
      std::optional<int64_t> n;
      if (*n_opt) n = n_value;
      if (profile) {
        json cfgs = json::array();
        if (ri.sizes.empty()) cfgs.push_back(make_config(ri, n.value_or(0), rng));
        for (int64_t s : ri.sizes) cfgs.push_back(make_config(ri, s, rng));
        Str out;
        check(adc_profile(m.get(), ri.fn.c_str(), cfgs.dump().c_str(), out.out()));
        emit(out.str(), "");
      } else {
        Str out;
        adc_status s = adc_run(m.get(), make_config(ri, n, rng).dump().c_str(), out.out());
        emit(out.str(), "");
        if (s == ADC_ERR_RUNTIME) {
          std::cerr << "error[runtime]: " << adc_last_error() << "\n";
          return kCheckFailed;
        }
        check(s);
      }
    } else if (*c_gc) {
      Module m;
      load(m, inputs);
      std::optional<int64_t> n;
      if (*gn_opt) n = gn;
      Str rep;
      int pass = 0;
      check(adc_gradcheck(m.get(), gi.fn.c_str(), activity.c_str(), make_config(gi, n, rng).dump().c_str(), tol,
                          rep.out(), &pass));
      emit(rep.str(), "");
      return pass ? 0 : kCheckFailed;
    } else if (*c_pipe) {
      Module m;
      load(m, inputs);
      adc_grad_options o = pf.options();
      Module out;
      Str g;
      check(adc_pipeline(m.get(), fn.c_str(), activity.c_str(), pmode.c_str(), passes.c_str(), &o, out.out(), g.out()));
      std::cerr << "gradient: @" << g.str() << "\n";
      emit(print(out), output);
    } else if (*c_bench) {
      Str rep, table;
      check(adc_bench(corpus.c_str(), modes.c_str(), seed(), threads, rep.out(), table.out()));
      emit(rep.str(), output);
      if (!table_path.empty()) emit(table.str(), table_path);
      std::cerr << table.str();
      json r = json::parse(rep.str());
      return r.value("all_pass", false) ? 0 : kCheckFailed;
    }
  } catch (const ApiError& e) {
    std::cerr << "error[" << adc_status_name(e.status) << "]: " << e.what() << "\n";
    return kError;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return 0;
}
