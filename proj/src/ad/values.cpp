// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "ad/emitter.hpp"

namespace adjointc::ad {

namespace {

constexpr int64_t kMaxFixedSlots = int64_t{1} << 26;
constexpr int kMaxCostDepth = 24;

}  // namespace

bool Emitter::is_gradient_param(const std::string& v) const {
  return std::any_of(grad_params_.begin(), grad_params_.end(), [&](const Param& p) { return p.name == v; });
}

bool Emitter::available(const std::string& v) const {
  if (mode_ != GradMode::Combined) return false;
  auto it = fdef_.find(v);
  if (it == fdef_.end()) return false;
  int b = it->second.block;
  return P_.li->innermost[b] == -1 && P_.dom->dominates(b, P_.ret_block);
}

IrType Emitter::type_of(const Operand& o) const {
  switch (o.kind) {
    case Operand::Kind::Float: return TypeKind::F64;
    case Operand::Kind::Int: return TypeKind::I64;
    case Operand::Kind::Null:
    case Operand::Kind::Global: return TypeKind::Ptr;
    case Operand::Kind::Local: break;
  }
  if (auto it = fdef_.find(o.name); it != fdef_.end()) return it->second.inst.type;
  for (const auto& p : grad_params_)
    if (p.name == o.name) return p.type;
  for (const auto& p : P_.fn.params)
    if (p.name == o.name) return p.type;
  throw Error(ErrorCode::Unsupported, "Unsupported: @" + fn_ + ": unknown value %" + o.name);
}

Operand Emitter::emit(Opcode op, IrType t, const std::string& base, std::vector<Operand> ops) {
  // Fold integer arithmetic on literals so index math stays small.
  if ((op == Opcode::IAdd || op == Opcode::IMul || op == Opcode::ISub) && ops[0].kind == Operand::Kind::Int &&
      ops[1].kind == Operand::Kind::Int) {
    int64_t a = ops[0].ival, b = ops[1].ival;
    return Operand::int_lit(op == Opcode::IAdd ? a + b : op == Opcode::ISub ? a - b : a * b);
  }
  if (op == Opcode::IMul) {
    if (ops[1].kind == Operand::Kind::Int && ops[1].ival == 1) return ops[0];
    if (ops[0].kind == Operand::Kind::Int && ops[0].ival == 1) return ops[1];
  }
  if (op == Opcode::IAdd) {
    if (ops[1].kind == Operand::Kind::Int && ops[1].ival == 0) return ops[0];
    if (ops[0].kind == Operand::Kind::Int && ops[0].ival == 0) return ops[1];
  }
  if (op == Opcode::PtrAdd && ops[1].kind == Operand::Kind::Int && ops[1].ival == 0) return ops[0];
  std::string name = fresh(base);
  out_insts_->push_back(make(op, t, name, std::move(ops)));
  return Operand::local(name);
}

Operand Emitter::emit_load(IrType t, const std::string& base, Operand p, uint32_t flags) {
  std::string name = fresh(base);
  out_insts_->push_back(make_load(t, name, std::move(p), flags));
  return Operand::local(name);
}

std::string Emitter::riv_slot(int L) {
  auto it = rivs_.find(L);
  if (it == rivs_.end()) {
    it = rivs_.emplace(L, std::make_pair(fresh("riv." + P_.fn.blocks[P_.loops[L].header].label), adj_size_)).first;
    adj_size_ += 8;
  }
  return it->second.first;
}

Operand Emitter::riv_load(int L) {
  std::string s = riv_slot(L);
  return emit_load(TypeKind::I64, "rv." + P_.fn.blocks[P_.loops[L].header].label, Operand::local(s));
}

int Emitter::cost(const std::string& v, int depth) {
  if (is_gradient_param(v) || available(v) || memo_.count(v) || caches_.count(v)) return 0;
  if (auto it = cost_memo_.find(v); it != cost_memo_.end()) return it->second;
  auto def = fdef_.find(v);
  if (def == fdef_.end() || depth > kMaxCostDepth) return kInfiniteCost;
  const CostModel& cm = cx_.opts.cost;
  const Instruction& I = def->second.inst;
  auto operand_cost = [&](const Operand& o) { return o.is_local() ? cost(o.name, depth + 1) : 0; };
  int c = kInfiniteCost;
  if (I.op == Opcode::Phi) {
    auto a = P_.affine.find(v);
    if (a != P_.affine.end() && P_.li->contains(a->second.loop, cur_))
      c = cm.arith + operand_cost(a->second.start);
  } else if (is_pure(I.op)) {
    c = cm.arith;
    for (const auto& o : I.operands) c += operand_cost(o);
  } else if (I.op == Opcode::Load && mode_ == GradMode::Combined && !def->second.shadow_load &&
             primal_names_.count(v) && !aa_->may_be_written(I.operands[0])) {
    c = cm.load + operand_cost(I.operands[0]);
  }
  c = std::min(c, kInfiniteCost);
  cost_memo_[v] = c;
  return c;
}

Operand Emitter::mat(const Operand& o, bool top) {
  if (!o.is_local()) return o;
  const std::string& v = o.name;
  if (top && (fdef_.count(v) || P_.fn.param_index(v))) needed_.insert(v);
  if (is_gradient_param(v)) return o;
  if (auto it = memo_.find(v); it != memo_.end()) return it->second;
  if (available(v)) return o;
  if (!fdef_.count(v))
    throw Error(ErrorCode::Unsupported, "Unsupported: @" + fn_ + ": value %" + v + " is not available in the reverse pass");
  Operand r = !caches_.count(v) && cost(v, 0) <= cx_.opts.cost.budget ? recompute(v) : cache_read(v);
  memo_[v] = r;
  return r;
}

Operand Emitter::recompute(const std::string& v) {
  const FwdDef d = fdef_.at(v);
  if (primal_names_.count(v)) plan_.recompute.insert(v);
  if (d.inst.op == Opcode::Phi) {
    const Affine& a = P_.affine.at(v);
    Operand riv = riv_load(a.loop);
    Operand scaled = emit(Opcode::IMul, TypeKind::I64, v + ".k", {riv, Operand::int_lit(a.step)});
    return emit(Opcode::IAdd, TypeKind::I64, v + ".rc", {mat(a.start, false), scaled});
  }
  Instruction I = d.inst;
  for (auto& op : I.operands) op = mat(op, false);
  I.result = fresh(v + ".rc");
  I.flags = kFlagNone;
  out_insts_->push_back(I);
  return Operand::local(I.result);
}

Emitter::Cache& Emitter::cache_for(const std::string& v) {
  if (auto it = caches_.find(v); it != caches_.end()) return it->second;
  const FwdDef& d = fdef_.at(v);
  Cache c;
  c.type = d.inst.type;
  c.block = d.block;
  std::vector<int> nest = P_.li->nest(d.block);
  int64_t slots = 1;
  bool fixed = !nest.empty();
  for (int L : nest) {
    if (P_.loops[L].trips < 0 || slots > kMaxFixedSlots / std::max<int64_t>(1, P_.loops[L].trips)) {
      fixed = false;
      break;
    }
    slots *= P_.loops[L].trips;
  }
  if (nest.empty()) {
    c.kind = CacheKind::Scalar;
    c.field = frame_size_;
    frame_size_ += 8;
    c.ptr = fresh("tape.f." + v);
  } else if (fixed) {
    c.kind = CacheKind::Fixed;
    c.length = slots;
    c.ptr = fresh("tape.a." + v);
    if (mode_ == GradMode::Split) {
      c.field = frame_size_;
      frame_size_ += 8;
    }
  } else {
    c.kind = CacheKind::Stack;
    c.length = 8;
    if (mode_ == GradMode::Split) {
      c.field = frame_size_;
      frame_size_ += 8;
    }
    c.ptr = fresh("tape.s." + v);
    c.count = fresh(c.ptr + ".cnt");
  }
  plan_.cached[v] = CacheEntry{c.kind, c.length, P_.fn.blocks[c.block].label};
  cache_order_.push_back(v);
  return caches_.emplace(v, c).first->second;
}

Operand Emitter::cache_read(const std::string& v) {
  const Cache c = cache_for(v);
  switch (c.kind) {
    case CacheKind::Scalar:
      return emit_load(c.type, v + ".t", Operand::local(c.ptr), kFlagTape);
    case CacheKind::Fixed: {
      Operand idx = Operand::int_lit(0);
      for (int L : P_.li->nest(c.block)) {
        Operand i = P_.li->contains(L, cur_) ? riv_load(L) : Operand::int_lit(P_.loops[L].trips - 1);
        Operand scaled = emit(Opcode::IMul, TypeKind::I64, v + ".ix", {idx, Operand::int_lit(P_.loops[L].trips)});
        idx = emit(Opcode::IAdd, TypeKind::I64, v + ".ix", {scaled, i});
      }
      Operand off = emit(Opcode::IMul, TypeKind::I64, v + ".off", {idx, Operand::int_lit(8)});
      Operand p = emit(Opcode::PtrAdd, TypeKind::Ptr, v + ".tp", {Operand::local(c.ptr), off});
      return emit_load(c.type, v + ".t", p, kFlagTape);
    }
    case CacheKind::Stack: {
      Operand cnt = emit_load(TypeKind::I64, v + ".n", Operand::local(c.count), kFlagTape);
      Operand buf = emit_load(TypeKind::Ptr, v + ".buf", Operand::local(c.ptr), kFlagTape);
      Operand top = emit(Opcode::ISub, TypeKind::I64, v + ".top", {cnt, Operand::int_lit(1)});
      Operand off = emit(Opcode::IMul, TypeKind::I64, v + ".off", {top, Operand::int_lit(8)});
      Operand p = emit(Opcode::PtrAdd, TypeKind::Ptr, v + ".tp", {buf, off});
      return emit_load(c.type, v + ".t", p, kFlagTape);
    }
  }
  return {};
}

// ---- adjoint slots ------------------------------------------------------------

std::string Emitter::slot(const std::string& v) {
  auto it = slots_.find(v);
  if (it == slots_.end()) {
    it = slots_.emplace(v, std::make_pair(fresh("adj." + v), adj_size_)).first;
    adj_size_ += 8;
  }
  return it->second.first;
}

bool Emitter::accumulates(const Operand& o) const { return o.is_local() && act_.is_active(o.name); }

void Emitter::acc(const Operand& o, Operand delta, bool subtract) {
  if (!accumulates(o)) return;
  IrType t = type_of(o);
  Operand p = Operand::local(slot(o.name));
  Operand old = emit_load(t, "da." + o.name, p);
  Operand sum = emit(subtract ? Opcode::FSub : Opcode::FAdd, t, "da." + o.name, {old, std::move(delta)});
  out_insts_->push_back(make_store(t, sum, p));
}

Operand Emitter::take(const std::string& v) {
  IrType t = type_of(Operand::local(v));
  Operand p = Operand::local(slot(v));
  Operand d = emit_load(t, "d." + v, p);
  out_insts_->push_back(make_store(t, Operand::float_lit(0.0), p));
  return d;
}

Operand Emitter::scratch(int64_t bytes) {
  if (scratch_name_.empty()) scratch_name_ = fresh("dscratch");
  scratch_size_ = std::max(scratch_size_, bytes);
  return Operand::local(scratch_name_);
}

}  // namespace adjointc::ad
