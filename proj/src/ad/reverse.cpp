// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "ad/emitter.hpp"

namespace adjointc::ad {

namespace {

/// Condition under which a predecessor was taken; `negate` flips it.
struct Taken {
  Operand cond;
  bool negate = false;
  bool always = false;
};

}  // namespace

void Emitter::reverse_memcpy(const Instruction& I) {
  const Operand& d = I.operands[0];
  const Operand& s = I.operands[1];
  const Operand& n = I.operands[2];
  if (!has_shadow(d)) return;
  const bool src_shadow = has_shadow(s);
  Operand sd = mat(shadow_of(d));
  Operand ss = src_shadow ? mat(shadow_of(s)) : Operand::null();
  if (n.kind == Operand::Kind::Int) {
    for (auto [off, kind] : elements(d, s, n.ival)) {
      if (!is_float_base(kind)) continue;
      IrType t = kind == BaseType::Float64 ? TypeKind::F64 : TypeKind::F32;
      Operand pd = emit(Opcode::PtrAdd, TypeKind::Ptr, "dmc.d", {sd, Operand::int_lit(off)});
      if (src_shadow) {
        Operand ps = emit(Opcode::PtrAdd, TypeKind::Ptr, "dmc.s", {ss, Operand::int_lit(off)});
        Operand a = emit_load(t, "dmc.a", ps);
        Operand b = emit_load(t, "dmc.b", pd);
        Operand sum = emit(Opcode::FAdd, t, "dmc.sum", {a, b});
        out_insts_->push_back(make_store(t, sum, ps));
      }
      out_insts_->push_back(make_store(t, Operand::float_lit(0.0), pd));
    }
    return;
  }
  std::set<BaseType> kinds;
  for (auto [off, kind] : elements(d, s, 64)) kinds.insert(kind);
  if (kinds.size() != 1 || !is_float_base(*kinds.begin()) || !src_shadow)
    throw Error(ErrorCode::Unsupported,
                "Unsupported: @" + fn_ + ": memcpy of dynamic size needs a single float element type");
  IrType t = *kinds.begin() == BaseType::Float64 ? TypeKind::F64 : TypeKind::F32;
  std::string helper = cx_.require_helper("memcpy_adj", t);
  out_insts_->push_back(make_call(TypeKind::Void, "", helper, {ss, sd, mat(n)},
                                  {TypeKind::Ptr, TypeKind::Ptr, TypeKind::I64}));
}

void Emitter::reverse_call(const Instruction& I, const std::string& id) {
  const CallSite cs = calls_.at(id);
  Operand d = Operand::float_lit(0.0);
  if (I.has_result() && I.type.is_float() && act_.is_active(I.result)) d = take(I.result);

  std::vector<Operand> args;
  std::vector<IrType> types;
  for (size_t k = 0; k < cs.args.size(); ++k) {
    args.push_back(mat(cs.args[k]));
    types.push_back(cs.types[k]);
    ActivityToken t = cs.spec.params[k];
    if (t == ActivityToken::Dup || t == ActivityToken::DupNoNeed) {
      args.push_back(has_shadow(cs.args[k]) ? mat(shadow_of(cs.args[k])) : Operand::null());
      types.push_back(TypeKind::Ptr);
    }
  }
  if (cs.spec.active_return) {
    args.push_back(d);
    types.push_back(I.type);
  }
  args.push_back(mat(Operand::local(cs.tape)));
  types.push_back(TypeKind::Ptr);

  std::vector<size_t> actives;
  for (size_t k = 0; k < cs.args.size(); ++k)
    if (cs.spec.params[k] == ActivityToken::Active) actives.push_back(k);
  Operand out;
  if (actives.size() >= 2) {
    out = scratch(8 * static_cast<int64_t>(actives.size()));
    args.push_back(out);
    types.push_back(TypeKind::Ptr);
  }
  std::string res = cs.grad_ret.is_void() ? "" : fresh("dcall");
  if (!cs.indirect) {
    out_insts_->push_back(make_call(cs.grad_ret, res, cs.gradient, args, types));
  } else {
    Operand sfp = mat(shadow_of(cs.fn_ptr));
    Operand slot8 = emit(Opcode::PtrAdd, TypeKind::Ptr, "grad.fn.p", {sfp, Operand::int_lit(8)});
    Operand g = emit_load(TypeKind::Ptr, "grad.fn", slot8);
    out_insts_->push_back(make_callind(cs.grad_ret, res, g, args, types));
  }
  if (actives.size() == 1) {
    acc(cs.args[actives[0]], Operand::local(res));
  } else {
    for (size_t j = 0; j < actives.size(); ++j) {
      IrType t = cs.types[actives[j]];
      if (!accumulates(cs.args[actives[j]])) continue;
      Operand p = emit(Opcode::PtrAdd, TypeKind::Ptr, "dcall.p", {out, Operand::int_lit(8 * static_cast<int64_t>(j))});
      acc(cs.args[actives[j]], emit_load(t, "dcall.v", p));
    }
  }
}

void Emitter::reverse_inst(const BasicBlock& src, size_t idx) {
  const Instruction& I = src.insts[idx];
  const std::string id = instruction_id(src, idx);
  if (I.op == Opcode::Alloc) {
    if (freed_allocs_.count(I.result)) {
      out_insts_->push_back(make(Opcode::Free, TypeKind::Void, "", {mat(Operand::local(I.result))}));
      if (has_shadow(Operand::local(I.result)))
        out_insts_->push_back(make(Opcode::Free, TypeKind::Void, "", {mat(shadow_of(Operand::local(I.result)))}));
    }
    return;
  }
  if (!act_.active_instructions.count(id)) return;
  const auto& o = I.operands;
  const IrType t = I.type;
  auto act = [&](const Operand& x) { return accumulates(x); };
  auto lit = [](double v) { return Operand::float_lit(v); };
  switch (I.op) {
    case Opcode::FAdd: {
      Operand d = take(I.result);
      acc(o[0], d);
      acc(o[1], d);
      break;
    }
    case Opcode::FSub: {
      Operand d = take(I.result);
      acc(o[0], d);
      acc(o[1], d, true);
      break;
    }
    case Opcode::FNeg: {
      Operand d = take(I.result);
      acc(o[0], d, true);
      break;
    }
    case Opcode::FMul: {
      Operand d = take(I.result);
      if (act(o[0])) acc(o[0], emit(Opcode::FMul, t, "dm", {d, mat(o[1])}));
      if (act(o[1])) acc(o[1], emit(Opcode::FMul, t, "dm", {d, mat(o[0])}));
      break;
    }
    case Opcode::FDiv: {
      Operand d = take(I.result);
      if (act(o[0])) acc(o[0], emit(Opcode::FDiv, t, "dq", {d, mat(o[1])}));
      if (act(o[1])) {
        Operand q = emit(Opcode::FDiv, t, "dq", {d, mat(o[1])});
        acc(o[1], emit(Opcode::FMul, t, "dq", {q, mat(Operand::local(I.result))}), true);
      }
      break;
    }
    case Opcode::Pow: {
      Operand d = take(I.result);
      if (act(o[0])) {
        Operand x = mat(o[0]);
        Operand c = mat(o[1]);
        Operand cm1 = o[1].is_literal() ? lit(o[1].as_float() - 1.0) : emit(Opcode::FSub, t, "dp", {c, lit(1.0)});
        Operand pw = emit(Opcode::Pow, t, "dp", {x, cm1});
        Operand sc = emit(Opcode::FMul, t, "dp", {c, pw});
        acc(o[0], emit(Opcode::FMul, t, "dp", {d, sc}));
      }
      if (act(o[1])) {
        Operand lx = emit(Opcode::Log, t, "dp", {mat(o[0])});
        Operand zl = emit(Opcode::FMul, t, "dp", {mat(Operand::local(I.result)), lx});
        acc(o[1], emit(Opcode::FMul, t, "dp", {d, zl}));
      }
      break;
    }
    case Opcode::Sin: {
      Operand d = take(I.result);
      Operand c = emit(Opcode::Cos, t, "ds", {mat(o[0])});
      acc(o[0], emit(Opcode::FMul, t, "ds", {d, c}));
      break;
    }
    case Opcode::Cos: {
      Operand d = take(I.result);
      Operand s = emit(Opcode::Sin, t, "dc", {mat(o[0])});
      acc(o[0], emit(Opcode::FMul, t, "dc", {d, s}), true);
      break;
    }
    case Opcode::Exp: {
      Operand d = take(I.result);
      acc(o[0], emit(Opcode::FMul, t, "de", {d, mat(Operand::local(I.result))}));
      break;
    }
    case Opcode::Log: {
      Operand d = take(I.result);
      acc(o[0], emit(Opcode::FDiv, t, "dl", {d, mat(o[0])}));
      break;
    }
    case Opcode::Sqrt: {
      Operand d = take(I.result);
      Operand two = emit(Opcode::FMul, t, "dr", {lit(2.0), mat(Operand::local(I.result))});
      acc(o[0], emit(Opcode::FDiv, t, "dr", {d, two}));
      break;
    }
    case Opcode::Fabs: {
      Operand d = take(I.result);
      std::string neg = fresh("da.neg");
      out_insts_->push_back(make_cmp(Opcode::FCmp, Predicate::Olt, t, neg, mat(o[0]), lit(0.0)));
      Operand nd = emit(Opcode::FNeg, t, "da", {d});
      acc(o[0], emit(Opcode::Select, t, "da", {Operand::local(neg), nd, d}));
      break;
    }
    case Opcode::Select: {
      if (!t.is_float()) break;
      Operand d = take(I.result);
      if (!act(o[1]) && !act(o[2])) break;
      Operand c = mat(o[0]);
      if (act(o[1])) acc(o[1], emit(Opcode::Select, t, "dsel", {c, d, lit(0.0)}));
      if (act(o[2])) acc(o[2], emit(Opcode::Select, t, "dsel", {c, lit(0.0), d}));
      break;
    }
    case Opcode::Load: {
      if (!t.is_float() || !act_.is_active(I.result)) break;
      Operand d = take(I.result);
      Operand sp = mat(shadow_of(o[0]));
      Operand old = emit_load(t, "dld", sp);
      Operand sum = emit(Opcode::FAdd, t, "dld", {old, d});
      out_insts_->push_back(make_store(t, sum, sp));
      break;
    }
    case Opcode::Store: {
      if (!t.is_float()) break;
      Operand sp = mat(shadow_of(o[1]));
      Operand v = emit_load(t, "dst", sp);
      out_insts_->push_back(make_store(t, lit(0.0), sp));
      acc(o[0], v);
      break;
    }
    case Opcode::Memcpy:
      reverse_memcpy(I);
      break;
    case Opcode::Call:
    case Opcode::CallInd:
      if (calls_.count(id)) reverse_call(I, id);
      break;
    default:
      break;
  }
}

void Emitter::reverse_block(int b) {
  cur_ = b;
  memo_.clear();
  cost_memo_.clear();
  RevBlock& rb = rev_[b];
  out_insts_ = &rb.body;
  const BasicBlock& src = P_.fn.blocks[b];

  if (b == P_.ret_block && spec_.active_return) {
    const Operand& rv = src.terminator().operands[0];
    Operand seed = seed_.empty() ? Operand::float_lit(1.0) : Operand::local(seed_);
    acc(rv, seed);
  }
  for (size_t i = src.insts.size(); i-- > 0;)
    if (src.insts[i].op != Opcode::Phi) reverse_inst(src, i);

  const Choice& c = P_.choice[b];
  std::vector<Taken> taken(c.preds.size());
  Operand header_riv;
  auto label = [&](int p) { return rev_[p].label; };
  switch (c.kind) {
    case ChoiceKind::Entry:
      break;
    case ChoiceKind::Single:
      taken[0].always = true;
      rb.tail.push_back(make_br(label(c.preds[0])));
      break;
    case ChoiceKind::Header: {
      int L = P_.li->innermost[b];
      Operand riv = header_riv = riv_load(L);
      std::string is0 = fresh("first." + src.label);
      out_insts_->push_back(make_cmp(Opcode::ICmp, Predicate::Eq, TypeKind::I64, is0, riv, Operand::int_lit(0)));
      taken[0] = {Operand::local(is0), false, false};
      taken[1] = {Operand::local(is0), true, false};
      rb.tail.push_back(make_condbr(Operand::local(is0), label(c.preds[0]), label(c.preds[1])));
      break;
    }
    case ChoiceKind::Cond: {
      Operand cond = mat(Operand::local(c.value));
      taken[0] = {cond, false, false};
      taken[1] = {cond, true, false};
      rb.tail.push_back(make_condbr(cond, label(c.preds[0]), label(c.preds[1])));
      break;
    }
    case ChoiceKind::Record: {
      Operand pid = mat(Operand::local(c.value));
      std::vector<Operand> eq(c.preds.size());
      for (size_t k = 0; k + 1 < c.preds.size(); ++k) {
        std::string e = fresh("from." + src.label);
        out_insts_->push_back(make_cmp(Opcode::ICmp, Predicate::Eq, TypeKind::I64, e, pid,
                                       Operand::int_lit(static_cast<int64_t>(k))));
        eq[k] = Operand::local(e);
        taken[k] = {eq[k], false, false};
      }
      if (c.preds.size() == 2) {
        taken[1] = {eq[0], true, false};
        rb.tail.push_back(make_condbr(eq[0], label(c.preds[0]), label(c.preds[1])));
      } else {
        // Chain of tests; the last predecessor is the fallback.
        for (size_t k = 0; k + 1 < c.preds.size(); ++k) {
          std::string next = k + 2 < c.preds.size() ? fresh(rb.label + ".sw") : label(c.preds.back());
          Instruction br = make_condbr(eq[k], label(c.preds[k]), next);
          if (k == 0) {
            rb.tail.push_back(br);
          } else {
            rb.extra.back().insts.push_back(br);
          }
          if (k + 2 < c.preds.size()) {
            BasicBlock sw;
            sw.label = next;
            rb.extra.push_back(sw);
          }
        }
        // The fallback is taken when every earlier test failed.
        Operand any = eq[0];
        for (size_t k = 1; k + 1 < c.preds.size(); ++k) {
          std::string o = fresh("from.any");
          out_insts_->push_back(make(Opcode::Select, TypeKind::I1, o, {any, Operand::int_lit(1), eq[k]}));
          any = Operand::local(o);
        }
        taken.back() = {any, true, false};
      }
      break;
    }
  }

  // Phi adjoints: read every slot first, then route each to the incoming value.
  std::vector<std::pair<const Instruction*, Operand>> ds;
  for (const auto& I : src.insts) {
    if (I.op != Opcode::Phi) break;
    if (I.type.is_float() && act_.is_active(I.result)) ds.emplace_back(&I, take(I.result));
  }
  for (const auto& [I, d] : ds) {
    for (size_t k = 0; k < I->operands.size(); ++k) {
      const Operand& a = I->operands[k];
      if (!accumulates(a)) continue;
      int p = P_.cfg->block(I->labels[k]);
      size_t j = std::find(c.preds.begin(), c.preds.end(), p) - c.preds.begin();
      const Taken& tk = taken.at(j);
      if (tk.always) {
        acc(a, d);
        continue;
      }
      Operand zero = Operand::float_lit(0.0);
      acc(a, emit(Opcode::Select, I->type, "dphi", {tk.cond, tk.negate ? zero : d, tk.negate ? d : zero}));
    }
  }

  if (auto ex = P_.exits.find(b); ex != P_.exits.end()) {
    for (const auto& e : ex->second) {
      Operand last = e.trip.empty()
                         ? Operand::int_lit(P_.loops[e.loop].trips - 1)
                         : emit(Opcode::ISub, TypeKind::I64, "last", {mat(Operand::local(e.trip)), Operand::int_lit(1)});
      out_insts_->push_back(make_store(TypeKind::I64, last, Operand::local(riv_slot(e.loop))));
    }
  }
  if (c.kind == ChoiceKind::Header) {
    Operand dec = emit(Opcode::ISub, TypeKind::I64, "rv.dec", {header_riv, Operand::int_lit(1)});
    out_insts_->push_back(make_store(TypeKind::I64, dec, Operand::local(riv_slot(P_.li->innermost[b]))));
  }
  if (c.kind == ChoiceKind::Entry) {
    for (const auto& f : end_frees_) {
      out_insts_->push_back(make(Opcode::Free, TypeKind::Void, "", {mat(f)}));
      if (has_shadow(f)) out_insts_->push_back(make(Opcode::Free, TypeKind::Void, "", {mat(shadow_of(f))}));
    }
    std::vector<const Param*> act_params;
    for (size_t k = 0; k < P_.fn.params.size(); ++k)
      if (spec_.params[k] == ActivityToken::Active) act_params.push_back(&P_.fn.params[k]);
    std::vector<Operand> vals;
    for (const Param* p : act_params) vals.push_back(emit_load(p->type, "grad." + p->name, Operand::local(slot(p->name))));
    if (vals.size() == 1) {
      rb.tail.push_back(make_ret(act_params[0]->type, vals[0]));
    } else {
      for (size_t j = 0; j < vals.size(); ++j) {
        Operand p = emit(Opcode::PtrAdd, TypeKind::Ptr, "grad.out", {Operand::local(out_), Operand::int_lit(8 * static_cast<int64_t>(j))});
        out_insts_->push_back(make_store(act_params[j]->type, vals[j], p));
      }
      rb.tail.push_back(make_ret(TypeKind::Void, std::nullopt));
    }
  }
}

void Emitter::emit_reverse() {
  for (size_t k = P_.cfg->rpo.size(); k-- > 0;) reverse_block(P_.cfg->rpo[k]);
}

}  // namespace adjointc::ad
