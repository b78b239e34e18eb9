// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include "adjointc/alias.hpp"

#include <set>

namespace adjointc {

AliasAnalysis::AliasAnalysis(const IrModule& m, const IrFunction& f, const TypeEnv* env)
    : m_(m), f_(f), env_(env) {
  for (const auto& b : f.blocks)
    for (const auto& inst : b.insts)
      if (inst.has_result()) defs_[inst.result] = &inst;
}

PointerRoot AliasAnalysis::root(const Operand& p) const {
  using K = PointerRoot::Kind;
  if (p.kind == Operand::Kind::Null) return {K::Null, "", false};
  if (p.is_global()) return {K::Global, p.name, false};
  if (!p.is_local()) return {};
  if (auto it = cache_.find(p.name); it != cache_.end()) return it->second;
  if (auto idx = f_.param_index(p.name)) {
    const Param& prm = f_.params[*idx];
    return cache_[p.name] = {K::Param, prm.name, prm.noalias};
  }
  auto d = defs_.find(p.name);
  if (d == defs_.end()) return {};
  const Instruction& inst = *d->second;
  cache_[p.name] = {};  // breaks phi cycles
  PointerRoot r;
  switch (inst.op) {
    case Opcode::Alloc:
      r = {K::Alloc, inst.result, false};
      break;
    case Opcode::PtrAdd:
      r = root(inst.operands[0]);
      break;
    case Opcode::Phi:
    case Opcode::Select: {
      std::optional<PointerRoot> common;
      bool mixed = false;
      for (size_t i = inst.op == Opcode::Select ? 1 : 0; i < inst.operands.size(); ++i) {
        const Operand& o = inst.operands[i];
        if (o.is_local() && o.name == inst.result) continue;
        PointerRoot ro = root(o);
        if (ro.kind == K::Null) continue;
        if (!common) common = ro;
        else if (!(*common == ro)) mixed = true;
      }
      if (common && !mixed) r = *common;
      break;
    }
    default:
      break;
  }
  return cache_[p.name] = r;
}

namespace {

std::set<BaseType> pointee_kinds(const TypeTree& t) {
  std::set<BaseType> out;
  for (const auto& [path, k] : t.entries())
    if (path.size() == 1) out.insert(k);
  return out;
}

}  // namespace

AliasVerdict AliasAnalysis::alias(const Operand& a, const Operand& b) const {
  using K = PointerRoot::Kind;
  PointerRoot ra = root(a), rb = root(b);
  if (ra.kind == K::Null || rb.kind == K::Null) return AliasVerdict::NoAlias;
  bool distinct = false;
  if (ra.kind != K::Unknown && rb.kind != K::Unknown) {
    if (!(ra == rb)) {
      if (ra.kind == K::Alloc || rb.kind == K::Alloc) distinct = true;
      else if (ra.kind == K::Global && rb.kind == K::Global) distinct = true;
      else if (ra.noalias || rb.noalias) distinct = true;
    }
  } else if ((ra.kind == K::Param && ra.noalias) || (rb.kind == K::Param && rb.noalias)) {
    distinct = true;
  }
  if (distinct) return AliasVerdict::NoAlias;

  if (env_ && a.is_local() && b.is_local()) {
    auto fit = env_->values.find(f_.name);
    if (fit != env_->values.end()) {
      auto ta = fit->second.find(a.name), tb = fit->second.find(b.name);
      if (ta != fit->second.end() && tb != fit->second.end()) {
        auto ka = pointee_kinds(ta->second), kb = pointee_kinds(tb->second);
        bool overlap = false;
        for (BaseType k : ka) overlap |= kb.count(k) != 0;
        if (!ka.empty() && !kb.empty() && !overlap) return AliasVerdict::NoAlias;
      }
    }
  }
  return AliasVerdict::MayAlias;
}

bool AliasAnalysis::writes(const Instruction& inst, const Operand& p) const {
  switch (inst.op) {
    case Opcode::Store:
      return alias(inst.operands[1], p) == AliasVerdict::MayAlias;
    case Opcode::Memcpy:
    case Opcode::Free:
      return alias(inst.operands[0], p) == AliasVerdict::MayAlias;
    case Opcode::Call:
    case Opcode::CallInd: {
      if (inst.op == Opcode::Call) {
        const IrFunction* callee = m_.find_function(inst.callee);
        if (callee && callee->readonly) return false;
      }
      if (root(p).kind == PointerRoot::Kind::Unknown) return true;
      size_t first = inst.op == Opcode::CallInd ? 1 : 0;
      for (size_t i = first; i < inst.operands.size(); ++i)
        if (inst.arg_types[i].is_ptr() && alias(inst.operands[i], p) == AliasVerdict::MayAlias) return true;
      return false;
    }
    default:
      return false;
  }
}

bool AliasAnalysis::may_be_written(const Operand& p) const {
  for (const auto& b : f_.blocks)
    for (const auto& inst : b.insts)
      if (writes(inst, p)) return true;
  return false;
}

}  // namespace adjointc
