// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>

#include "ad/emitter.hpp"

namespace adjointc::ad {

void Emitter::place_cache_writes() {
  for (const auto& v : cache_order_) {
    const Cache& c = caches_.at(v);
    auto& insts = fwd_[c.block].insts;
    auto def = std::find_if(insts.begin(), insts.end(), [&](const Instruction& i) { return i.result == v; });
    size_t pos = static_cast<size_t>(def - insts.begin()) + 1;
    if (def->op == Opcode::Phi)
      while (pos < insts.size() && insts[pos].op == Opcode::Phi) ++pos;

    std::vector<Instruction> w;
    out_insts_ = &w;
    switch (c.kind) {
      case CacheKind::Scalar:
        w.push_back(make_store(c.type, Operand::local(v), Operand::local(c.ptr), kFlagTape));
        break;
      case CacheKind::Fixed: {
        Operand idx = Operand::int_lit(0);
        for (int L : P_.li->nest(c.block)) {
          Operand scaled = emit(Opcode::IMul, TypeKind::I64, v + ".wix", {idx, Operand::int_lit(P_.loops[L].trips)});
          idx = emit(Opcode::IAdd, TypeKind::I64, v + ".wix", {scaled, Operand::local(P_.loops[L].iv)});
        }
        Operand off = emit(Opcode::IMul, TypeKind::I64, v + ".woff", {idx, Operand::int_lit(8)});
        Operand p = emit(Opcode::PtrAdd, TypeKind::Ptr, v + ".wp", {Operand::local(c.ptr), off});
        w.push_back(make_store(c.type, Operand::local(v), p, kFlagTape));
        break;
      }
      case CacheKind::Stack: {
        std::string push = cx_.require_helper("push", c.type);
        w.push_back(make_call(TypeKind::Void, "", push, {Operand::local(c.ptr), Operand::local(v)},
                              {TypeKind::Ptr, c.type}));
        break;
      }
    }
    insts.insert(insts.begin() + static_cast<long>(pos), w.begin(), w.end());
  }
  out_insts_ = nullptr;
}

namespace {

Instruction tape_alloc(const std::string& name, Operand size) {
  Instruction i = make(Opcode::Alloc, TypeKind::Ptr, name, {std::move(size)});
  i.flags = kFlagTape;
  return i;
}

}  // namespace

std::vector<Instruction> Emitter::forward_setup() {
  std::vector<Instruction> out;
  out_insts_ = &out;
  if (frame_size_ > 0) out.push_back(tape_alloc(frame_, Operand::int_lit(frame_size_)));
  for (const auto& v : cache_order_) {
    const Cache& c = caches_.at(v);
    switch (c.kind) {
      case CacheKind::Scalar:
        out.push_back(make(Opcode::PtrAdd, TypeKind::Ptr, c.ptr, {Operand::local(frame_), Operand::int_lit(c.field)}));
        break;
      case CacheKind::Fixed:
        out.push_back(tape_alloc(c.ptr, Operand::int_lit(8 * c.length)));
        if (mode_ == GradMode::Split) {
          Operand f = emit(Opcode::PtrAdd, TypeKind::Ptr, c.ptr + ".field", {Operand::local(frame_), Operand::int_lit(c.field)});
          out.push_back(make_store(TypeKind::Ptr, Operand::local(c.ptr), f, kFlagTape));
        }
        break;
      case CacheKind::Stack: {
        // Header [buf, cap, count] in its own allocation.
        out.push_back(tape_alloc(c.ptr, Operand::int_lit(24)));
        if (mode_ == GradMode::Split) {
          Operand f = emit(Opcode::PtrAdd, TypeKind::Ptr, c.ptr + ".field", {Operand::local(frame_), Operand::int_lit(c.field)});
          out.push_back(make_store(TypeKind::Ptr, Operand::local(c.ptr), f, kFlagTape));
        }
        out.push_back(make(Opcode::PtrAdd, TypeKind::Ptr, c.count, {Operand::local(c.ptr), Operand::int_lit(16)}));
        std::string buf = fresh(c.ptr + ".init");
        out.push_back(tape_alloc(buf, Operand::int_lit(8 * c.length)));
        out.push_back(make_store(TypeKind::Ptr, Operand::local(buf), Operand::local(c.ptr), kFlagTape | kFlagCtl));
        Operand cap = emit(Opcode::PtrAdd, TypeKind::Ptr, c.ptr + ".cap", {Operand::local(c.ptr), Operand::int_lit(8)});
        out.push_back(make_store(TypeKind::I64, Operand::int_lit(c.length), cap, kFlagTape | kFlagCtl));
        out.push_back(make_store(TypeKind::I64, Operand::int_lit(0), Operand::local(c.count), kFlagTape | kFlagCtl));
        break;
      }
    }
  }
  out_insts_ = nullptr;
  return out;
}

std::vector<Instruction> Emitter::reverse_setup() {
  std::vector<Instruction> out;
  out_insts_ = &out;
  int64_t total = adj_size_;
  if (!scratch_name_.empty()) total += scratch_size_;
  if (total > 0) {
    out.push_back(make(Opcode::Alloc, TypeKind::Ptr, adj_, {Operand::int_lit(total)}));
    for (const auto& [v, s] : slots_)
      out.push_back(make(Opcode::PtrAdd, TypeKind::Ptr, s.first, {Operand::local(adj_), Operand::int_lit(s.second)}));
    for (const auto& [L, s] : rivs_)
      out.push_back(make(Opcode::PtrAdd, TypeKind::Ptr, s.first, {Operand::local(adj_), Operand::int_lit(s.second)}));
    if (!scratch_name_.empty())
      out.push_back(make(Opcode::PtrAdd, TypeKind::Ptr, scratch_name_, {Operand::local(adj_), Operand::int_lit(adj_size_)}));
  }
  if (mode_ == GradMode::Split) {
    for (const auto& v : cache_order_) {
      const Cache& c = caches_.at(v);
      Operand field = Operand::int_lit(c.field);
      switch (c.kind) {
        case CacheKind::Scalar:
          out.push_back(make(Opcode::PtrAdd, TypeKind::Ptr, c.ptr, {Operand::local(frame_), field}));
          break;
        case CacheKind::Fixed: {
          Operand f = emit(Opcode::PtrAdd, TypeKind::Ptr, c.ptr + ".field", {Operand::local(frame_), field});
          out.push_back(make_load(TypeKind::Ptr, c.ptr, f, kFlagTape));
          break;
        }
        case CacheKind::Stack: {
          Operand f = emit(Opcode::PtrAdd, TypeKind::Ptr, c.ptr + ".field", {Operand::local(frame_), field});
          out.push_back(make_load(TypeKind::Ptr, c.ptr, f, kFlagTape));
          out.push_back(make(Opcode::PtrAdd, TypeKind::Ptr, c.count, {Operand::local(c.ptr), Operand::int_lit(16)}));
          break;
        }
      }
    }
  }
  out_insts_ = nullptr;
  return out;
}

std::vector<Instruction> Emitter::epilogue() {
  std::vector<Instruction> out;
  out_insts_ = &out;
  for (const auto& v : cache_order_) {
    const Cache& c = caches_.at(v);
    if (c.kind == CacheKind::Fixed) {
      out.push_back(make(Opcode::Free, TypeKind::Void, "", {Operand::local(c.ptr)}));
    } else if (c.kind == CacheKind::Stack) {
      Operand buf = emit_load(TypeKind::Ptr, c.ptr + ".last", Operand::local(c.ptr), kFlagTape);
      out.push_back(make(Opcode::Free, TypeKind::Void, "", {buf}));
      out.push_back(make(Opcode::Free, TypeKind::Void, "", {Operand::local(c.ptr)}));
    }
  }
  if (frame_size_ > 0) out.push_back(make(Opcode::Free, TypeKind::Void, "", {Operand::local(frame_)}));
  if (adj_size_ + scratch_size_ > 0) out.push_back(make(Opcode::Free, TypeKind::Void, "", {Operand::local(adj_)}));
  out_insts_ = nullptr;
  return out;
}

std::vector<IrFunction> Emitter::assemble() {
  // Stack pops close the reverse of each defining block.
  for (const auto& v : cache_order_) {
    const Cache& c = caches_.at(v);
    if (c.kind != CacheKind::Stack) continue;
    RevBlock& rb = rev_[c.block];
    out_insts_ = &rb.body;
    Operand n = emit_load(TypeKind::I64, v + ".pn", Operand::local(c.count), kFlagTape | kFlagCtl);
    Operand m = emit(Opcode::ISub, TypeKind::I64, v + ".pn", {n, Operand::int_lit(1)});
    rb.body.push_back(make_store(TypeKind::I64, m, Operand::local(c.count), kFlagTape | kFlagCtl));
  }
  std::vector<Instruction> teardown = epilogue();
  std::vector<Instruction> fsetup = forward_setup();
  std::vector<Instruction> rsetup = reverse_setup();

  std::vector<BasicBlock> reverse;
  for (size_t k = P_.cfg->rpo.size(); k-- > 0;) {
    int b = P_.cfg->rpo[k];
    RevBlock& rb = rev_[b];
    BasicBlock out;
    out.label = rb.label;
    out.insts = std::move(rb.body);
    if (P_.choice[b].kind == ChoiceKind::Entry) out.insts.insert(out.insts.end(), teardown.begin(), teardown.end());
    out.insts.insert(out.insts.end(), rb.tail.begin(), rb.tail.end());
    reverse.push_back(std::move(out));
    for (auto& e : rb.extra) reverse.push_back(std::move(e));
  }

  IrType gret = gradient_return_type(P_.fn, spec_);
  std::vector<IrFunction> fns;
  if (mode_ == GradMode::Combined) {
    IrFunction g;
    g.name = names_.gradient;
    g.ret_type = gret;
    g.params = grad_params_;
    g.fast = P_.fn.fast;
    g.blocks = std::move(fwd_);
    auto& entry = g.blocks[0].insts;
    std::vector<Instruction> setup = std::move(rsetup);
    setup.insert(setup.end(), fsetup.begin(), fsetup.end());
    entry.insert(entry.begin(), setup.begin(), setup.end());
    for (auto& b : reverse) g.blocks.push_back(std::move(b));
    fns.push_back(std::move(g));
  } else {
    IrFunction a;
    a.name = names_.augmented;
    a.ret_type = TypeKind::Ptr;
    a.params = aug_params_;
    a.fast = P_.fn.fast;
    a.blocks = std::move(fwd_);
    a.blocks[0].insts.insert(a.blocks[0].insts.begin(), fsetup.begin(), fsetup.end());
    fns.push_back(std::move(a));

    IrFunction g;
    g.name = names_.gradient;
    g.ret_type = gret;
    g.params = grad_params_;
    g.fast = P_.fn.fast;
    BasicBlock start;
    start.label = fresh("start");
    start.insts = std::move(rsetup);
    start.insts.push_back(make_br(rev_[P_.ret_block].label));
    g.blocks.push_back(std::move(start));
    for (auto& b : reverse) g.blocks.push_back(std::move(b));
    fns.push_back(std::move(g));
  }
  return fns;
}

}  // namespace adjointc::ad
