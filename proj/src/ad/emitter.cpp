// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include "ad/emitter.hpp"

#include <algorithm>

#include "opt/util.hpp"

namespace adjointc::ad {

namespace {

/// Functions `root` can reach through calls or address-taking, plus `root`.
std::set<std::string> reachable_functions(const IrModule& m, const std::string& root) {
  std::set<std::string> seen;
  std::vector<std::string> work{root};
  auto visit_operand = [&](const Operand& o) {
    if (o.is_global() && m.find_function(o.name)) work.push_back(o.name);
  };
  while (!work.empty()) {
    std::string n = work.back();
    work.pop_back();
    if (!seen.insert(n).second) continue;
    const IrFunction* f = m.find_function(n);
    if (!f) continue;
    for (const auto& b : f->blocks)
      for (const auto& i : b.insts) {
        if (i.op == Opcode::Call) work.push_back(i.callee);
        for (const auto& o : i.operands) visit_operand(o);
      }
  }
  for (const auto& g : m.globals)
    for (const auto& e : g.elems) visit_operand(e.value);
  for (const auto& [fn, ca] : m.custom_adjoints)
    if (seen.count(fn)) {
      seen.insert(ca.augmented);
      seen.insert(ca.gradient);
    }
  return seen;
}

}  // namespace

Emitter::Emitter(Context& cx, const std::string& fn, const ActivitySpec& spec, GradMode mode, bool seed_param,
                 PairNames names)
    : cx_(cx), fn_(fn), spec_(spec), mode_(mode), seed_param_(seed_param), names_(std::move(names)) {}

std::string Emitter::fresh(const std::string& base) { return opt::fresh(base, used_); }

void Emitter::analyze() {
  const IrFunction* src = cx_.m.find_function(fn_);
  if (!src) throw Error(ErrorCode::InvalidArgument, "no function @" + fn_);
  if (src->is_declaration)
    throw Error(ErrorCode::MissingDefinition,
                "MissingDefinition: @" + fn_ + " is a declaration without a custom adjoint");
  check_spec(*src, spec_);
  P_ = prepare(*src);

  // Callers contribute argument types, so the whole original module is analyzed.
  const IrModule& base = cx_.original.find_function(fn_) ? cx_.original : cx_.m;
  std::set<std::string> keep = reachable_functions(cx_.m, fn_);
  work_.globals = base.globals;
  work_.custom_adjoints = base.custom_adjoints;
  for (const auto& f : base.functions) work_.functions.push_back(f.name == fn_ ? P_.fn : f);
  for (const auto& name : keep)
    if (!work_.find_function(name) && cx_.m.find_function(name)) work_.functions.push_back(*cx_.m.find_function(name));
  env_ = analyze_types(work_);
  act_ = analyze_activity(work_, fn_, spec_, env_);
  aa_ = std::make_unique<AliasAnalysis>(work_, *work_.find_function(fn_), &env_);
  used_ = opt::used_names(P_.fn);
  primal_names_ = used_;
  for (size_t k = 0; k < P_.fn.params.size(); ++k) param_token_[P_.fn.params[k].name] = spec_.params[k];

  rev_.resize(P_.fn.blocks.size());
  for (size_t b = 0; b < P_.fn.blocks.size(); ++b) rev_[b].label = fresh("reverse." + P_.fn.blocks[b].label);
}

void Emitter::assign_params() {
  for (const auto& p : P_.fn.params) {
    grad_params_.push_back(p);
    aug_params_.push_back(p);
    ActivityToken t = param_token_.at(p.name);
    if (t == ActivityToken::Dup || t == ActivityToken::DupNoNeed) {
      std::string s = fresh("d_" + p.name);
      shadow_[p.name] = s;
      shadow_names_.insert(s);
      Param sp{s, TypeKind::Ptr, p.noalias, false};
      grad_params_.push_back(sp);
      aug_params_.push_back(sp);
    }
  }
  if (spec_.active_return && (mode_ == GradMode::Split || seed_param_)) {
    seed_ = fresh("d_ret");
    grad_params_.push_back(Param{seed_, P_.fn.ret_type, false, false});
  }
  frame_ = fresh("tape");
  if (mode_ == GradMode::Split) {
    grad_params_.push_back(Param{frame_, TypeKind::Ptr, false, false});
    frame_size_ = 8;
  }
  if (active_scalar_count(P_.fn, spec_) >= 2) {
    out_ = fresh("d_out");
    grad_params_.push_back(Param{out_, TypeKind::Ptr, false, false});
  }
  adj_ = fresh("adj");
}

bool Emitter::has_shadow(const Operand& o) const {
  if (o.is_local()) return shadow_.count(o.name) || act_.has_shadow(o.name);
  if (o.is_global()) return cx_.m.find_function(o.name) != nullptr;
  return false;
}

Operand Emitter::shadow_of(const Operand& o) {
  if (o.kind == Operand::Kind::Null) return o;
  if (o.is_global()) {
    if (!cx_.m.find_function(o.name))
      throw Error(ErrorCode::Unsupported, "Unsupported: @" + fn_ + ": global @" + o.name + " has no shadow");
    return Operand::global(cx_.require_shadow_global(o.name));
  }
  if (!o.is_local())
    throw Error(ErrorCode::Unsupported, "Unsupported: @" + fn_ + ": literal pointer has no shadow");
  if (auto it = shadow_.find(o.name); it != shadow_.end()) return Operand::local(it->second);
  if (P_.fn.param_index(o.name) || !act_.has_shadow(o.name))
    throw Error(ErrorCode::Unsupported, "Unsupported: @" + fn_ + ": pointer %" + o.name +
                                            " needs a shadow but is not differentiable memory");
  std::string s = fresh("d." + o.name);
  shadow_[o.name] = s;
  shadow_names_.insert(s);
  return Operand::local(s);
}

ActivitySpec Emitter::call_spec(const Instruction& I, size_t first) const {
  ActivitySpec s;
  for (size_t k = first; k < I.operands.size(); ++k) {
    const IrType t = I.arg_types[k];
    const Operand& o = I.operands[k];
    if (t.is_float()) s.params.push_back(o.is_local() && act_.is_active(o.name) ? ActivityToken::Active
                                                                                 : ActivityToken::Const);
    else if (t.is_ptr()) s.params.push_back(has_shadow(o) ? ActivityToken::Dup : ActivityToken::Const);
    else s.params.push_back(ActivityToken::Const);
  }
  s.active_return = I.type.is_float() && I.has_result() && act_.is_active(I.result);
  return s;
}

bool Emitter::store_elided(const Instruction& I) const {
  if (!I.type.is_float()) return false;
  const Operand& p = I.operands[1];
  PointerRoot r = aa_->root(p);
  if (r.kind != PointerRoot::Kind::Param || param_token_.at(r.name) != ActivityToken::DupNoNeed) return false;
  for (const auto& b : P_.fn.blocks)
    for (const auto& i : b.insts) {
      auto touches = [&](const Operand& q) { return aa_->alias(q, p) != AliasVerdict::NoAlias; };
      if (i.op == Opcode::Load && touches(i.operands[0])) return false;
      if (i.op == Opcode::Memcpy && touches(i.operands[1])) return false;
      if (i.op == Opcode::Call || i.op == Opcode::CallInd)
        for (size_t k = 0; k < i.operands.size(); ++k)
          if (k < i.arg_types.size() && i.arg_types[k].is_ptr() && touches(i.operands[k])) return false;
    }
  return true;
}

std::vector<std::pair<int64_t, BaseType>> Emitter::elements(const Operand& d, const Operand& s, int64_t n) const {
  std::map<int64_t, BaseType> out;
  bool any = false;
  for (const Operand* o : {&d, &s}) {
    if (o->kind == Operand::Kind::Null || o->is_literal()) continue;
    TypeTree t;
    try {
      t = query(env_, work_, fn_, (o->is_local() ? "%" : "@") + o->name);
    } catch (const Error&) {
      continue;
    }
    TypeTree w = t.pointee_window(n);
    for (const auto& [path, kind] : w.entries()) {
      if (path.size() != 1 || kind == BaseType::Unknown) continue;
      any = true;
      if (path[0] == kAnyOffset) {
        int64_t step = base_type_span(kind);
        for (int64_t off = 0; off + step <= n; off += step) out.emplace(off, kind);
      } else if (path[0] + base_type_span(kind) <= n) {
        out[path[0]] = kind;
      }
    }
  }
  if (!any)
    throw Error(ErrorCode::Unsupported, "Unsupported: @" + fn_ + ": cannot deduce the element types of memcpy %" +
                                            (d.is_local() ? d.name : std::string("?")));
  return {out.begin(), out.end()};
}

void Emitter::forward_call(const Instruction& I, const std::string& id, BasicBlock& out) {
  const bool ind = I.op == Opcode::CallInd;
  const size_t first = ind ? 1 : 0;
  CallSite cs;
  cs.indirect = ind;
  for (size_t k = first; k < I.operands.size(); ++k) {
    cs.args.push_back(I.operands[k]);
    cs.types.push_back(I.arg_types[k]);
  }
  std::string augmented;
  if (!ind) {
    if (!cx_.m.find_function(I.callee))
      throw Error(ErrorCode::MissingDefinition, "MissingDefinition: @" + I.callee + " is not defined");
    PairNames pn = cx_.require_pair(I.callee, call_spec(I, 0));
    cs.spec = pn.spec;
    cs.gradient = pn.gradient;
    augmented = pn.augmented;
    cs.grad_ret = gradient_return_type(*cx_.m.find_function(I.callee), pn.spec);
  } else {
    IrFunction sig;
    sig.ret_type = I.type;
    for (auto t : cs.types) sig.params.push_back(Param{"", t, false, false});
    cs.spec = ActivitySpec::canonical(sig);
    cs.grad_ret = gradient_return_type(sig, cs.spec);
    cs.fn_ptr = I.operands[0];
  }

  std::vector<Operand> args;
  std::vector<IrType> types;
  for (size_t k = 0; k < cs.args.size(); ++k) {
    args.push_back(cs.args[k]);
    types.push_back(cs.types[k]);
    ActivityToken t = cs.spec.params[k];
    if (t == ActivityToken::Dup || t == ActivityToken::DupNoNeed) {
      if (has_shadow(cs.args[k])) args.push_back(shadow_of(cs.args[k]));
      else if (ind) args.push_back(Operand::null());
      else
        throw Error(ErrorCode::Unsupported, "Unsupported: @" + fn_ + ": argument " + std::to_string(k) +
                                                " of @" + I.callee + " needs a shadow");
      types.push_back(TypeKind::Ptr);
    }
  }
  cs.tape = fresh("tape." + (I.has_result() ? I.result : (ind ? std::string("ind") : I.callee)));
  if (!ind) {
    out.insts.push_back(make_call(TypeKind::Ptr, cs.tape, augmented, args, types));
  } else {
    Operand sfp = shadow_of(I.operands[0]);
    std::string aug = fresh("aug." + (I.operands[0].is_local() ? I.operands[0].name : std::string("fn")));
    out.insts.push_back(make_load(TypeKind::Ptr, aug, sfp));
    out.insts.push_back(make_callind(TypeKind::Ptr, cs.tape, Operand::local(aug), args, types));
  }
  if (I.has_result()) out.insts.push_back(make_load(I.type, I.result, Operand::local(cs.tape), kFlagTape));
  calls_[id] = std::move(cs);
}

void Emitter::forward_inst(const BasicBlock& src, size_t idx, BasicBlock& out) {
  const Instruction& I = src.insts[idx];
  const std::string id = instruction_id(src, idx);
  const bool active = act_.active_instructions.count(id) != 0;
  auto shadowed = [&](const Instruction& i) { return i.has_result() && act_.has_shadow(i.result); };
  auto shadow_res = [&](const Instruction& i) { return shadow_of(Operand::local(i.result)).name; };
  switch (I.op) {
    case Opcode::Phi: {
      out.insts.push_back(I);
      if (I.type.is_ptr() && shadowed(I)) {
        Instruction s = I;
        s.result = shadow_res(I);
        s.flags = kFlagNone;
        for (auto& o : s.operands) o = shadow_of(o);
        out.insts.push_back(s);
      }
      return;
    }
    case Opcode::Alloc:
      out.insts.push_back(I);
      if (shadowed(I)) out.insts.push_back(make(Opcode::Alloc, TypeKind::Ptr, shadow_res(I), {I.operands[0]}));
      return;
    case Opcode::PtrAdd:
      out.insts.push_back(I);
      if (shadowed(I))
        out.insts.push_back(make(Opcode::PtrAdd, TypeKind::Ptr, shadow_res(I), {shadow_of(I.operands[0]), I.operands[1]}));
      return;
    case Opcode::Select:
      out.insts.push_back(I);
      if (I.type.is_ptr() && shadowed(I))
        out.insts.push_back(make(Opcode::Select, TypeKind::Ptr, shadow_res(I),
                                 {I.operands[0], shadow_of(I.operands[1]), shadow_of(I.operands[2])}));
      return;
    case Opcode::Load:
      out.insts.push_back(I);
      if (I.type.is_ptr() && shadowed(I))
        out.insts.push_back(make_load(TypeKind::Ptr, shadow_res(I), shadow_of(I.operands[0])));
      return;
    case Opcode::Store:
      if (I.type.is_ptr()) {
        out.insts.push_back(I);
        if (has_shadow(I.operands[1])) {
          Operand v = has_shadow(I.operands[0]) ? shadow_of(I.operands[0]) : I.operands[0];
          out.insts.push_back(make_store(TypeKind::Ptr, v, shadow_of(I.operands[1])));
        }
      } else if (!store_elided(I)) {
        out.insts.push_back(I);
      }
      return;
    case Opcode::Memcpy:
      out.insts.push_back(I);
      if (active && has_shadow(I.operands[0]) && has_shadow(I.operands[1]) &&
          I.operands[2].kind == Operand::Kind::Int) {
        for (auto [off, kind] : elements(I.operands[0], I.operands[1], I.operands[2].ival)) {
          if (kind != BaseType::Pointer) continue;
          std::string a = fresh("d.mcs"), v = fresh("d.mcv"), b = fresh("d.mcd");
          out.insts.push_back(make(Opcode::PtrAdd, TypeKind::Ptr, a, {shadow_of(I.operands[1]), Operand::int_lit(off)}));
          out.insts.push_back(make_load(TypeKind::Ptr, v, Operand::local(a)));
          out.insts.push_back(make(Opcode::PtrAdd, TypeKind::Ptr, b, {shadow_of(I.operands[0]), Operand::int_lit(off)}));
          out.insts.push_back(make_store(TypeKind::Ptr, Operand::local(v), Operand::local(b)));
        }
      }
      return;
    case Opcode::Free: {
      PointerRoot r = aa_->root(I.operands[0]);
      if (r.kind == PointerRoot::Kind::Alloc) freed_allocs_.insert(r.name);
      else end_frees_.push_back(I.operands[0]);
      return;
    }
    case Opcode::Call:
    case Opcode::CallInd:
      if (active) forward_call(I, id, out);
      else out.insts.push_back(I);
      return;
    case Opcode::Ret:
      if (mode_ == GradMode::Combined) {
        out.insts.push_back(make_br(rev_[P_.ret_block].label));
      } else {
        if (!I.operands.empty())
          out.insts.push_back(make_store(I.type, I.operands[0], Operand::local(frame_), kFlagTape));
        out.insts.push_back(make_ret(TypeKind::Ptr, Operand::local(frame_)));
      }
      return;
    default:
      out.insts.push_back(I);
      return;
  }
}

void Emitter::emit_forward() {
  for (const auto& b : P_.fn.blocks) {
    BasicBlock out;
    out.label = b.label;
    for (size_t i = 0; i < b.insts.size(); ++i) forward_inst(b, i, out);
    fwd_.push_back(std::move(out));
  }
  for (size_t b = 0; b < fwd_.size(); ++b)
    for (const auto& i : fwd_[b].insts)
      if (i.has_result()) {
        FwdDef d;
        d.block = static_cast<int>(b);
        d.inst = i;
        d.shadow_load = i.op == Opcode::Load && shadow_names_.count(i.result);
        fdef_[i.result] = std::move(d);
      }
}

SynthOutput Emitter::run() {
  analyze();
  assign_params();
  emit_forward();
  emit_reverse();
  place_cache_writes();
  SynthOutput out;
  out.functions = assemble();
  for (int b = 0; b < static_cast<int>(P_.choice.size()); ++b)
    if (P_.choice[b].kind == ChoiceKind::Record) plan_.control.insert(P_.fn.blocks[b].label);
  for (const auto& lf : P_.loops) {
    const std::string& h = P_.fn.blocks[lf.header].label;
    if (lf.trips >= 0) plan_.static_trips[h] = lf.trips;
    else plan_.loops.insert(h);
  }
  out.plan = plan_;
  out.needed = needed_;
  return out;
}

}  // namespace adjointc::ad
