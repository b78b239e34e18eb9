// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include "adjointc/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace adjointc {

namespace {

bool shadowed(ActivityToken t) { return t == ActivityToken::Dup || t == ActivityToken::DupNoNeed; }

const IrFunction& function_or_throw(const IrModule& m, const std::string& fn) {
  const IrFunction* f = m.find_function(fn);
  if (!f) throw Error(ErrorCode::InvalidArgument, "no function @" + fn);
  return *f;
}

/// Buffer index behind parameter k, or -1.
int buffer_of(const ExecConfig& point, size_t k) {
  if (k >= point.args.size() || point.args[k].kind != Arg::Kind::Buffer) return -1;
  return static_cast<int>(point.args[k].buffer);
}

struct Objective {
  const IrModule& m;
  const IrFunction& f;
  const ActivitySpec& spec;
  const std::vector<std::vector<double>>& weights;
  double ret_seed;

  double operator()(const ExecConfig& cfg, std::string& error) const {
    ExecTrace t = run(m, cfg);
    if (!t.ok) {
      if (error.empty()) error = t.error;
      return 0.0;
    }
    double j = 0.0;
    if (spec.active_return && f.ret_type.is_float()) j += ret_seed * t.ret_f;
    for (size_t k = 0; k < f.params.size(); ++k) {
      int b = buffer_of(cfg, k);
      if (!shadowed(spec.params[k]) || b < 0) continue;
      const auto& vals = t.buffers[static_cast<size_t>(b)].values;
      for (size_t i = 0; i < vals.size() && i < weights[k].size(); ++i) j += weights[k][i] * vals[i];
    }
    return j;
  }
};

/// f32 inputs use a step near sqrt(eps_f32); the divisor is the perturbation
/// that survives rounding to the element type.
double step_for(double x, bool single) { return (single ? 1e-3 : 1e-6) * std::max(1.0, std::fabs(x)); }

double rounded(double v, bool single) { return single ? static_cast<double>(static_cast<float>(v)) : v; }

double rel_error(double a, double n) { return std::fabs(a - n) / std::max({1.0, std::fabs(a), std::fabs(n)}); }

std::vector<std::vector<double>> draw_weights(const IrFunction& f, const ActivitySpec& spec, const ExecConfig& point,
                                              const GradCheckOptions& opts) {
  std::vector<std::vector<double>> w(f.params.size());
  std::mt19937_64 rng(opts.weight_seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (size_t k = 0; k < f.params.size(); ++k) {
    int b = buffer_of(point, k);
    if (!shadowed(spec.params[k]) || b < 0) continue;
    const Buffer& buf = point.buffers.at(static_cast<size_t>(b));
    if (k < opts.weights.size() && !opts.weights[k].empty()) {
      w[k] = opts.weights[k];
      w[k].resize(buf.values.size(), 0.0);
      continue;
    }
    for (size_t i = 0; i < buf.values.size(); ++i) {
      double v = dist(rng);
      w[k].push_back(buf.elem.is_float() ? v : 0.0);
    }
  }
  return w;
}

GradCheckReport check(const IrModule& m, const IrFunction& f, const ActivitySpec& spec, const IrModule& gm,
                      const std::string& gradient, const ExecConfig& point0, const GradCheckOptions& opts) {
  GradCheckReport rep;
  rep.function = f.name;
  rep.gradient = gradient;
  if (point0.args.size() != f.params.size())
    throw Error(ErrorCode::InvalidArgument, "@" + f.name + " takes " + std::to_string(f.params.size()) +
                                                " arguments, point has " + std::to_string(point0.args.size()));
  bool has_output = spec.active_return && f.ret_type.is_float();
  for (size_t k = 0; k < f.params.size(); ++k)
    if (shadowed(spec.params[k]) && buffer_of(point0, k) >= 0) has_output = true;
  if (!has_output)
    throw Error(ErrorCode::InvalidArgument,
                "@" + f.name + " has no float output to compare: no active return and no dup buffer");

  ExecConfig point = point0;
  point.entry = f.name;
  auto weights = draw_weights(f, spec, point, opts);
  Objective J{m, f, spec, weights, opts.ret_seed};

  ExecConfig gcfg = gradient_config(f, spec, gradient, point, weights, opts.ret_seed);
  rep.gradient_trace = run(gm, gcfg);
  if (!rep.gradient_trace.ok) {
    rep.error = "gradient: " + rep.gradient_trace.error;
    return rep;
  }
  if (rep.gradient_trace.uninit_tape_reads > 0) {
    rep.error = "gradient read " + std::to_string(rep.gradient_trace.uninit_tape_reads) + " unwritten tape slots";
    return rep;
  }

  int actives = 0;
  for (size_t k = 0; k < f.params.size(); ++k)
    if (spec.params[k] == ActivityToken::Active) ++actives;
  const bool out_buffer = actives >= 2;
  const Buffer* dout = out_buffer ? &rep.gradient_trace.buffers.back() : nullptr;
  const int dout_stride = dout && dout->elem == TypeKind::F32 ? 2 : 1;

  auto add = [&](std::string name, double analytic, ExecConfig plus, ExecConfig minus, double width) {
    GradEntry e;
    e.name = std::move(name);
    e.analytic = analytic;
    double jp = J(plus, rep.error), jm = J(minus, rep.error);
    e.numeric = (jp - jm) / width;
    e.rel_error = rel_error(e.analytic, e.numeric);
    e.pass = e.rel_error <= opts.tol;
    rep.entries.push_back(std::move(e));
  };

  int active_index = 0;
  for (size_t k = 0; k < f.params.size(); ++k) {
    const ActivityToken tok = spec.params[k];
    const std::string& pname = f.params[k].name;
    if (tok == ActivityToken::Active) {
      const bool single = f.params[k].type == TypeKind::F32;
      double x = point.args[k].f;
      double h = step_for(x, single);
      ExecConfig p = point, q = point;
      p.args[k].f = rounded(x + h, single);
      q.args[k].f = rounded(x - h, single);
      double a = out_buffer ? dout->values.at(static_cast<size_t>(active_index * dout_stride)) : rep.gradient_trace.ret_f;
      ++active_index;
      double width = p.args[k].f - q.args[k].f;
      add(pname, a, std::move(p), std::move(q), width);
    } else if (shadowed(tok)) {
      int b = buffer_of(point, k);
      if (b < 0) continue;
      const Buffer& buf = point.buffers[static_cast<size_t>(b)];
      if (!buf.elem.is_float()) continue;
      // Shadow argument position: every parameter before k, plus their shadows, plus k itself.
      size_t slot = k + 1;
      for (size_t j = 0; j < k; ++j)
        if (shadowed(spec.params[j])) ++slot;
      size_t sb = gcfg.args.at(slot).buffer;
      const auto& grad = rep.gradient_trace.buffers.at(sb).values;
      for (size_t i = 0; i < buf.values.size(); ++i) {
        const bool single = buf.elem == TypeKind::F32;
        double x = buf.values[i];
        double h = step_for(x, single);
        ExecConfig p = point, q = point;
        double hi = rounded(x + h, single), lo = rounded(x - h, single);
        p.buffers[static_cast<size_t>(b)].values[i] = hi;
        q.buffers[static_cast<size_t>(b)].values[i] = lo;
        add(pname + "[" + std::to_string(i) + "]", grad.at(i), std::move(p), std::move(q), hi - lo);
      }
    }
  }
  if (!rep.error.empty()) return rep;
  rep.pass = true;
  for (const auto& e : rep.entries) {
    rep.max_rel_error = std::max(rep.max_rel_error, e.rel_error);
    rep.pass = rep.pass && e.pass;
  }
  return rep;
}

}  // namespace

ExecConfig gradient_config(const IrFunction& f, const ActivitySpec& spec, const std::string& gradient,
                           const ExecConfig& point, const std::vector<std::vector<double>>& weights,
                           double ret_seed) {
  ExecConfig g = point;
  g.entry = gradient;
  g.args.clear();
  int actives = 0;
  bool f32_active = false;
  for (size_t k = 0; k < f.params.size(); ++k) {
    g.args.push_back(point.args.at(k));
    if (spec.params[k] == ActivityToken::Active) {
      ++actives;
      f32_active = f32_active || f.params[k].type == TypeKind::F32;
    }
    if (!shadowed(spec.params[k])) continue;
    if (point.args.at(k).kind == Arg::Kind::Function) {
      g.args.push_back(Arg::fn(shadow_global_name(point.args[k].function)));
      continue;
    }
    int b = buffer_of(point, k);
    if (b < 0) {
      g.args.push_back(Arg::null());
      continue;
    }
    Buffer s = point.buffers[static_cast<size_t>(b)];
    for (size_t i = 0; i < s.values.size(); ++i) s.values[i] = k < weights.size() && i < weights[k].size() ? weights[k][i] : 0.0;
    g.buffers.push_back(std::move(s));
    g.args.push_back(Arg::buf(g.buffers.size() - 1));
  }
  if (spec.active_return && f.ret_type.is_float()) g.args.push_back(Arg::real(ret_seed));
  if (actives >= 2) {
    Buffer out;
    out.elem = f32_active ? IrType(TypeKind::F32) : IrType(TypeKind::F64);
    out.values.assign(static_cast<size_t>(actives * (f32_active ? 2 : 1)), 0.0);
    g.buffers.push_back(std::move(out));
    g.args.push_back(Arg::buf(g.buffers.size() - 1));
  }
  return g;
}

GradCheckReport gradcheck(const IrModule& m, const std::string& fn, const ActivitySpec& spec, const ExecConfig& point,
                          const GradCheckOptions& opts) {
  const IrFunction& f = function_or_throw(m, fn);
  IrModule gm = m;
  GradRequest req{fn, spec, GradMode::Combined, true};
  GradResult res = synthesize_gradient(gm, req, opts.autodiff);
  return check(m, f, spec, gm, res.function, point, opts);
}

GradCheckReport gradcheck_with(const IrModule& m, const std::string& fn, const ActivitySpec& spec,
                               const IrModule& grad_module, const std::string& gradient, const ExecConfig& point,
                               const GradCheckOptions& opts) {
  const IrFunction& f = function_or_throw(m, fn);
  function_or_throw(grad_module, gradient);
  return check(m, f, spec, grad_module, gradient, point, opts);
}

double fit_log_slope(const std::vector<ProfileRow>& rows) {
  if (rows.size() < 2) return 0.0;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(rows.size());
  for (const auto& r : rows) {
    double x = std::log2(static_cast<double>(r.n)), y = std::log2(static_cast<double>(std::max<int64_t>(1, r.steps)));
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  double den = n * sxx - sx * sx;
  return den == 0.0 ? 0.0 : (n * sxy - sx * sy) / den;
}

Profile count_profile(const IrModule& m, const std::string& fn,
                      const std::vector<std::pair<int64_t, ExecConfig>>& cfgs) {
  Profile p;
  for (const auto& [n, cfg0] : cfgs) {
    ExecConfig cfg = cfg0;
    cfg.entry = fn;
    ExecTrace t = run(m, cfg);
    if (!t.ok) throw Error(ErrorCode::Runtime, "@" + fn + " at n=" + std::to_string(n) + ": " + t.error);
    p.rows.push_back({n, t.steps});
  }
  p.slope = fit_log_slope(p.rows);
  return p;
}

}  // namespace adjointc
