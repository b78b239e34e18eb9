// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>
#include <sstream>

#include "ad/emitter.hpp"
#include "adjointc/autodiff.hpp"
#include "adjointc/text.hpp"

namespace adjointc {

std::string_view cache_kind_name(CacheKind k) {
  switch (k) {
    case CacheKind::Scalar: return "scalar";
    case CacheKind::Fixed: return "fixed";
    case CacheKind::Stack: return "stack";
  }
  return "?";
}

std::string shadow_global_name(const std::string& fn) { return fn + "_shadow"; }

namespace ad {

PairNames pair_names(const IrFunction& f, const ActivitySpec& spec) {
  std::string suffix = spec == ActivitySpec::canonical(f) ? "" : "." + spec.key();
  return {"augmented_" + f.name + suffix, "gradient_" + f.name + suffix, spec};
}

int active_scalar_count(const IrFunction& f, const ActivitySpec& spec) {
  int n = 0;
  for (size_t k = 0; k < f.params.size() && k < spec.params.size(); ++k)
    if (spec.params[k] == ActivityToken::Active) ++n;
  return n;
}

IrType gradient_return_type(const IrFunction& f, const ActivitySpec& spec) {
  if (active_scalar_count(f, spec) != 1) return TypeKind::Void;
  for (size_t k = 0; k < f.params.size(); ++k)
    if (spec.params[k] == ActivityToken::Active) return f.params[k].type;
  return TypeKind::Void;
}

SynthOutput synthesize(Context& cx, const std::string& fn, const ActivitySpec& spec, GradMode mode,
                       bool seed_param, const PairNames& names) {
  Emitter e(cx, fn, spec, mode, seed_param, names);
  return e.run();
}

PairNames Context::require_pair(const std::string& fn, const ActivitySpec& spec) {
  const IrFunction* g = m.find_function(fn);
  if (!g) throw Error(ErrorCode::MissingDefinition, "MissingDefinition: @" + fn + " is not defined");
  if (auto ca = m.custom_adjoints.find(fn); ca != m.custom_adjoints.end()) {
    check_custom_adjoint(m, fn);
    ActivitySpec canon = ActivitySpec::canonical(*g);
    for (size_t k = 0; k < canon.params.size(); ++k)
      if (canon.params[k] == ActivityToken::Dup && spec.params[k] != ActivityToken::Dup)
        throw Error(ErrorCode::Unsupported, "Unsupported: custom adjoint of @" + fn + " needs a shadow for argument " +
                                                std::to_string(k));
    return {ca->second.augmented, ca->second.gradient, canon};
  }
  if (g->is_declaration)
    throw Error(ErrorCode::MissingDefinition,
                "MissingDefinition: @" + fn + " is a declaration without a body or custom adjoint");
  PairNames pn = pair_names(*g, spec);
  if (started.count(pn.gradient) || m.find_function(pn.gradient)) return pn;
  started.insert(pn.gradient);
  SynthOutput out = synthesize(*this, fn, spec, GradMode::Split, true, pn);
  for (auto& f : out.functions) m.functions.push_back(std::move(f));
  return pn;
}

std::string Context::require_shadow_global(const std::string& fn) {
  std::string name = shadow_global_name(fn);
  if (m.find_global(name)) return name;
  const IrFunction* f = m.find_function(fn);
  PairNames pn = require_pair(fn, ActivitySpec::canonical(*f));
  if (m.find_global(name)) return name;
  Global g;
  g.name = name;
  g.elems = {GlobalElem{TypeKind::Ptr, Operand::global(pn.augmented)},
             GlobalElem{TypeKind::Ptr, Operand::global(pn.gradient)}};
  m.globals.push_back(std::move(g));
  return name;
}

std::string Context::require_helper(const std::string& kind, IrType t) {
  const std::string ty(type_name(t));
  const std::string name = "__adc_" + kind + "_" + ty;
  if (m.find_function(name)) return name;
  std::ostringstream os;
  if (kind == "push") {
    os << "define void @" << name << "(ptr %h, " << ty << " %v) {\n"
       << "entry:\n"
       << "  %cntp = ptradd %h, 16\n"
       << "  %cnt = load i64 %cntp !tape !ctl\n"
       << "  %capp = ptradd %h, 8\n"
       << "  %cap = load i64 %capp !tape !ctl\n"
       << "  %full = icmp sge i64 %cnt, %cap\n"
       << "  condbr %full, %grow, %put\n"
       << "grow:\n"
       << "  %old = load ptr %h !tape !ctl\n"
       << "  %cap2 = imul i64 %cap, 2\n"
       << "  %bytes = imul i64 %cap2, 8\n"
       << "  %new = alloc %bytes !tape\n"
       << "  %oldbytes = imul i64 %cap, 8\n"
       << "  memcpy %new, %old, %oldbytes\n"
       << "  free %old\n"
       << "  store ptr %new, %h !tape !ctl\n"
       << "  store i64 %cap2, %capp !tape !ctl\n"
       << "  br %put\n"
       << "put:\n"
       << "  %buf = load ptr %h !tape !ctl\n"
       << "  %off = imul i64 %cnt, 8\n"
       << "  %slot = ptradd %buf, %off\n"
       << "  store " << ty << " %v, %slot !tape\n"
       << "  %cnt1 = iadd i64 %cnt, 1\n"
       << "  store i64 %cnt1, %cntp !tape !ctl\n"
       << "  ret void\n"
       << "}\n";
  } else if (kind == "memcpy_adj") {
    const int w = static_cast<int>(t.size());
    os << "define void @" << name << "(ptr %ds, ptr %dd, i64 %n) {\n"
       << "entry:\n"
       << "  %cnt = sdiv i64 %n, " << w << "\n"
       << "  %any = icmp sgt i64 %cnt, 0\n"
       << "  condbr %any, %loop, %done\n"
       << "loop:\n"
       << "  %k = phi i64 [0, %entry], [%k1, %loop]\n"
       << "  %off = imul i64 %k, " << w << "\n"
       << "  %a = ptradd %ds, %off\n"
       << "  %b = ptradd %dd, %off\n"
       << "  %x = load " << ty << " %a\n"
       << "  %y = load " << ty << " %b\n"
       << "  %s = fadd " << ty << " %x, %y\n"
       << "  store " << ty << " %s, %a\n"
       << "  store " << ty << " 0.0, %b\n"
       << "  %k1 = iadd i64 %k, 1\n"
       << "  %more = icmp slt i64 %k1, %cnt\n"
       << "  condbr %more, %loop, %done\n"
       << "done:\n"
       << "  ret void\n"
       << "}\n";
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown helper " + kind);
  }
  IrModule h = parse_module(os.str(), false);
  m.functions.push_back(std::move(h.functions.at(0)));
  return name;
}

}  // namespace ad

namespace {

std::string combined_name(const IrModule& m, const IrFunction& f, const ActivitySpec& spec) {
  std::string base = "grad_" + f.name;
  if (!m.find_function(base)) return base;
  std::string name = base + "." + spec.key();
  for (int n = 1; m.find_function(name); ++n) name = base + "." + spec.key() + "." + std::to_string(n);
  return name;
}

/// Functions whose address appears as an operand or a global initializer.
std::set<std::string> address_taken(const IrModule& m) {
  std::set<std::string> out;
  auto note = [&](const Operand& o) {
    if (o.is_global() && m.find_function(o.name)) out.insert(o.name);
  };
  for (const auto& f : m.functions)
    for (const auto& b : f.blocks)
      for (const auto& i : b.insts)
        for (const auto& o : i.operands) note(o);
  for (const auto& g : m.globals)
    for (const auto& e : g.elems) note(e.value);
  return out;
}

bool has_float_interface(const IrFunction& f) {
  if (f.ret_type.is_float()) return true;
  for (const auto& p : f.params)
    if (p.type.is_float() || p.type.is_ptr()) return true;
  return false;
}

/// A gradient that calls through a pointer may receive any address-taken
/// function, so each differentiable one gets its shadow pair.
void add_shadow_pairs(ad::Context& cx, const IrModule& original) {
  bool indirect = false;
  for (const auto& f : cx.m.functions) {
    if (original.find_function(f.name)) continue;
    for (const auto& b : f.blocks)
      for (const auto& i : b.insts) indirect |= i.op == Opcode::CallInd;
  }
  if (!indirect) return;
  for (const auto& name : address_taken(original)) {
    const IrFunction& f = *original.find_function(name);
    if (f.is_declaration && !original.custom_adjoints.count(name)) continue;
    if (!has_float_interface(f)) continue;
    cx.require_shadow_global(name);
  }
}

std::string signature_text(const std::vector<IrType>& params, IrType ret) {
  std::string s = "(";
  for (size_t k = 0; k < params.size(); ++k) s += (k ? ", " : "") + std::string(type_name(params[k]));
  return s + ") -> " + std::string(type_name(ret));
}

}  // namespace

GradResult synthesize_gradient(IrModule& m, const GradRequest& req, const AutodiffOptions& opts) {
  const IrFunction* f = m.find_function(req.fn);
  if (!f) throw Error(ErrorCode::InvalidArgument, "no function @" + req.fn);
  if (f->is_declaration)
    throw Error(ErrorCode::MissingDefinition,
                "MissingDefinition: @" + req.fn + " is a declaration without a body or custom adjoint");
  check_spec(*f, req.spec);
  IrModule scratch = m;
  ad::Context cx(scratch, opts);
  GradResult res;
  ad::PairNames names;
  if (req.mode == GradMode::Combined) {
    names = {"", combined_name(m, *f, req.spec), req.spec};
  } else {
    names = ad::pair_names(*f, req.spec);
    if (m.find_function(names.gradient))
      throw Error(ErrorCode::InvalidArgument, "@" + names.gradient + " already exists");
    cx.started.insert(names.gradient);
  }
  ad::SynthOutput out = ad::synthesize(cx, req.fn, req.spec, req.mode, req.seed_param, names);
  for (auto& g : out.functions) scratch.functions.push_back(std::move(g));
  add_shadow_pairs(cx, m);
  std::vector<Diagnostic> diags = validate(scratch);
  if (!diags.empty())
    throw Error(ErrorCode::Validation, "synthesized gradient is malformed: " + diags[0].to_string());
  m = std::move(scratch);
  res.function = names.gradient;
  res.augmented = names.augmented;
  res.plan = std::move(out.plan);
  res.needed = std::move(out.needed);
  return res;
}

std::set<std::string> differential_use(const IrModule& m, const GradRequest& req, const AutodiffOptions& opts) {
  IrModule copy = m;
  return synthesize_gradient(copy, req, opts).needed;
}

TapePlan plan_tape(const IrModule& m, const GradRequest& req, const AutodiffOptions& opts) {
  IrModule copy = m;
  return synthesize_gradient(copy, req, opts).plan;
}

void check_custom_adjoint(const IrModule& m, const std::string& fn) {
  auto it = m.custom_adjoints.find(fn);
  if (it == m.custom_adjoints.end())
    throw Error(ErrorCode::InvalidArgument, "@" + fn + " has no custom adjoint");
  const IrFunction* f = m.find_function(fn);
  const IrFunction* a = m.find_function(it->second.augmented);
  const IrFunction* g = m.find_function(it->second.gradient);
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::SignatureMismatch, "SignatureMismatch: custom adjoint of @" + fn + ": " + why);
  };
  if (!f) fail("@" + fn + " is not defined");
  if (!a) fail("augmented function @" + it->second.augmented + " is not defined");
  if (!g) fail("gradient function @" + it->second.gradient + " is not defined");
  ActivitySpec canon = ActivitySpec::canonical(*f);
  std::vector<IrType> inter;
  for (size_t k = 0; k < f->params.size(); ++k) {
    inter.push_back(f->params[k].type);
    if (canon.params[k] == ActivityToken::Dup) inter.push_back(TypeKind::Ptr);
  }
  std::vector<IrType> grad = inter;
  if (canon.active_return) grad.push_back(f->ret_type);
  grad.push_back(TypeKind::Ptr);
  if (ad::active_scalar_count(*f, canon) >= 2) grad.push_back(TypeKind::Ptr);
  IrType gret = ad::gradient_return_type(*f, canon);
  auto types = [](const IrFunction& x) {
    std::vector<IrType> t;
    for (const auto& p : x.params) t.push_back(p.type);
    return t;
  };
  if (types(*a) != inter || a->ret_type != TypeKind::Ptr)
    fail("@" + a->name + " should be " + signature_text(inter, TypeKind::Ptr) + ", found " +
         signature_text(types(*a), a->ret_type));
  if (types(*g) != grad || g->ret_type != gret)
    fail("@" + g->name + " should be " + signature_text(grad, gret) + ", found " + signature_text(types(*g), g->ret_type));
}

void register_custom_adjoint(IrModule& m, const std::string& fn, const std::string& augmented,
                             const std::string& gradient) {
  auto saved = m.custom_adjoints;
  m.custom_adjoints[fn] = CustomAdjoint{augmented, gradient};
  try {
    check_custom_adjoint(m, fn);
  } catch (...) {
    m.custom_adjoints = std::move(saved);
    throw;
  }
}

int expand_autodiff_intrinsics(IrModule& m, const AutodiffOptions& opts) {
  struct Site {
    std::string fn;
    size_t block;
    size_t index;
  };
  std::vector<Site> sites;
  for (const auto& f : m.functions)
    for (size_t b = 0; b < f.blocks.size(); ++b)
      for (size_t i = 0; i < f.blocks[b].insts.size(); ++i) {
        const Instruction& inst = f.blocks[b].insts[i];
        if (inst.op == Opcode::Call && inst.callee == kAutodiffIntrinsic) sites.push_back({f.name, b, i});
      }
  std::map<std::pair<std::string, std::string>, std::string> made;
  for (const auto& s : sites) {
    Instruction call = m.find_function(s.fn)->blocks[s.block].insts[s.index];
    if (call.operands.empty() || !call.operands[0].is_global() || !m.find_function(call.operands[0].name))
      throw Error(ErrorCode::InvalidArgument, "first argument of " + std::string(kAutodiffIntrinsic) +
                                                  " in @" + s.fn + " must name a function");
    const IrFunction target = *m.find_function(call.operands[0].name);
    ActivitySpec spec;
    std::vector<Operand> args;
    std::vector<IrType> types;
    size_t k = 1;
    for (const auto& p : target.params) {
      if (k >= call.operands.size())
        throw Error(ErrorCode::SignatureMismatch, "SignatureMismatch: too few arguments for @" + target.name +
                                                      " in " + std::string(kAutodiffIntrinsic));
      std::optional<ActivityToken> tok = k < call.arg_tokens.size() ? call.arg_tokens[k] : std::nullopt;
      ActivityToken t = tok ? *tok : p.type.is_float() ? ActivityToken::Active : ActivityToken::Const;
      spec.params.push_back(t);
      args.push_back(call.operands[k]);
      types.push_back(p.type);
      ++k;
      if (t == ActivityToken::Dup || t == ActivityToken::DupNoNeed) {
        if (k >= call.operands.size())
          throw Error(ErrorCode::SignatureMismatch,
                      "SignatureMismatch: missing shadow for %" + p.name + " of @" + target.name);
        args.push_back(call.operands[k]);
        types.push_back(TypeKind::Ptr);
        ++k;
      }
    }
    if (k != call.operands.size())
      throw Error(ErrorCode::SignatureMismatch, "SignatureMismatch: too many arguments for @" + target.name + " in " +
                                                    std::string(kAutodiffIntrinsic));
    spec.active_return = target.ret_type.is_float();
    check_spec(target, spec);
    if (ad::active_scalar_count(target, spec) >= 2)
      throw Error(ErrorCode::SignatureMismatch, "SignatureMismatch: " + std::string(kAutodiffIntrinsic) +
                                                    " returns one value but @" + target.name +
                                                    " has several active scalars");
    IrType gret = ad::gradient_return_type(target, spec);
    if (gret != call.type)
      throw Error(ErrorCode::SignatureMismatch, "SignatureMismatch: " + std::string(kAutodiffIntrinsic) + " call in @" +
                                                    s.fn + " has type " + std::string(type_name(call.type)) +
                                                    " but the gradient returns " + std::string(type_name(gret)));
    auto key = std::make_pair(target.name, spec.key());
    auto it = made.find(key);
    if (it == made.end()) {
      GradRequest req;
      req.fn = target.name;
      req.spec = spec;
      req.mode = GradMode::Combined;
      req.seed_param = true;
      it = made.emplace(key, synthesize_gradient(m, req, opts).function).first;
    }
    if (spec.active_return) {
      args.push_back(target.ret_type == TypeKind::F32 ? Operand::float_lit(1.0) : Operand::float_lit(1.0));
      types.push_back(target.ret_type);
    }
    Instruction repl = ad::make_call(call.type, call.result, it->second, args, types);
    repl.line = call.line;
    m.find_function(s.fn)->blocks[s.block].insts[s.index] = repl;
  }
  return static_cast<int>(sites.size());
}

}  // namespace adjointc
