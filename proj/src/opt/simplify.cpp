// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <optional>

#include "adjointc/cfg.hpp"
#include "adjointc/optimizer.hpp"
#include "opt/util.hpp"

namespace adjointc {

namespace {

bool is_lit(const Operand& o) { return o.kind == Operand::Kind::Int || o.kind == Operand::Kind::Float; }
bool lit_eq(const Operand& o, double v) { return is_lit(o) && o.as_float() == v; }

double rnd(IrType t, double v) { return t.kind == TypeKind::F32 ? static_cast<double>(static_cast<float>(v)) : v; }

int64_t wrap(IrType t, int64_t v) {
  if (t.kind == TypeKind::I1) return v & 1;
  if (t.kind == TypeKind::I32) return static_cast<int32_t>(static_cast<uint32_t>(v));
  return v;
}

std::optional<Operand> fold(const Instruction& inst, bool fast) {
  const auto& o = inst.operands;
  IrType t = inst.type;
  auto F = [&](double v) { return Operand::float_lit(rnd(t, v)); };
  auto I = [&](int64_t v) { return Operand::int_lit(wrap(t, v)); };
  switch (inst.op) {
    case Opcode::FAdd: case Opcode::FSub: case Opcode::FMul: case Opcode::FDiv: case Opcode::Pow: {
      if (is_lit(o[0]) && is_lit(o[1])) {
        double a = rnd(t, o[0].as_float()), b = rnd(t, o[1].as_float());
        switch (inst.op) {
          case Opcode::FAdd: return F(a + b);
          case Opcode::FSub: return F(a - b);
          case Opcode::FMul: return F(a * b);
          case Opcode::FDiv: return F(a / b);
          default: return F(std::pow(a, b));
        }
      }
      if (inst.op == Opcode::Pow && lit_eq(o[1], 1.0) && fast) return o[0];
      if (!fast) return std::nullopt;
      if (inst.op == Opcode::FAdd) {
        if (lit_eq(o[1], 0.0)) return o[0];
        if (lit_eq(o[0], 0.0)) return o[1];
      }
      if (inst.op == Opcode::FSub && lit_eq(o[1], 0.0)) return o[0];
      if (inst.op == Opcode::FMul) {
        if (lit_eq(o[1], 1.0)) return o[0];
        if (lit_eq(o[0], 1.0)) return o[1];
        if (lit_eq(o[0], 0.0) || lit_eq(o[1], 0.0)) return F(0.0);
      }
      if (inst.op == Opcode::FDiv && lit_eq(o[1], 1.0)) return o[0];
      return std::nullopt;
    }
    case Opcode::FNeg: case Opcode::Sin: case Opcode::Cos: case Opcode::Exp: case Opcode::Log:
    case Opcode::Sqrt: case Opcode::Fabs: {
      if (!is_lit(o[0])) return std::nullopt;
      double a = rnd(t, o[0].as_float());
      switch (inst.op) {
        case Opcode::FNeg: return F(-a);
        case Opcode::Sin: return F(std::sin(a));
        case Opcode::Cos: return F(std::cos(a));
        case Opcode::Exp: return F(std::exp(a));
        case Opcode::Log: return F(std::log(a));
        case Opcode::Sqrt: return F(std::sqrt(a));
        default: return F(std::fabs(a));
      }
    }
    case Opcode::SIToFP:
      if (o[0].kind == Operand::Kind::Int) return F(static_cast<double>(o[0].ival));
      return std::nullopt;
    case Opcode::IAdd: case Opcode::ISub: case Opcode::IMul: case Opcode::SDiv: {
      bool la = o[0].kind == Operand::Kind::Int, lb = o[1].kind == Operand::Kind::Int;
      if (la && lb) {
        uint64_t a = static_cast<uint64_t>(o[0].ival), b = static_cast<uint64_t>(o[1].ival);
        switch (inst.op) {
          case Opcode::IAdd: return I(static_cast<int64_t>(a + b));
          case Opcode::ISub: return I(static_cast<int64_t>(a - b));
          case Opcode::IMul: return I(static_cast<int64_t>(a * b));
          default:
            if (o[1].ival == 0 || (o[1].ival == -1 && o[0].ival == INT64_MIN)) return std::nullopt;
            return I(o[0].ival / o[1].ival);
        }
      }
      auto is = [](const Operand& x, int64_t v) { return x.kind == Operand::Kind::Int && x.ival == v; };
      if (inst.op == Opcode::IAdd) {
        if (is(o[1], 0)) return o[0];
        if (is(o[0], 0)) return o[1];
      }
      if (inst.op == Opcode::ISub && is(o[1], 0)) return o[0];
      if (inst.op == Opcode::IMul) {
        if (is(o[1], 1)) return o[0];
        if (is(o[0], 1)) return o[1];
        if (is(o[0], 0) || is(o[1], 0)) return I(0);
      }
      if (inst.op == Opcode::SDiv && is(o[1], 1)) return o[0];
      return std::nullopt;
    }
    case Opcode::ICmp: {
      if (o[0].kind != Operand::Kind::Int || o[1].kind != Operand::Kind::Int) {
        if (o[0] == o[1] && o[0].is_local()) {
          switch (inst.pred) {
            case Predicate::Eq: case Predicate::Sle: case Predicate::Sge: return Operand::int_lit(1);
            case Predicate::Ne: case Predicate::Slt: case Predicate::Sgt: return Operand::int_lit(0);
            default: break;
          }
        }
        return std::nullopt;
      }
      int64_t a = o[0].ival, b = o[1].ival;
      bool r = false;
      switch (inst.pred) {
        case Predicate::Eq: r = a == b; break;
        case Predicate::Ne: r = a != b; break;
        case Predicate::Slt: r = a < b; break;
        case Predicate::Sle: r = a <= b; break;
        case Predicate::Sgt: r = a > b; break;
        case Predicate::Sge: r = a >= b; break;
        default: return std::nullopt;
      }
      return Operand::int_lit(r);
    }
    case Opcode::FCmp: {
      if (!is_lit(o[0]) || !is_lit(o[1])) return std::nullopt;
      IrType at = inst.arg_types[0];
      double a = rnd(at, o[0].as_float()), b = rnd(at, o[1].as_float());
      bool r = false;
      switch (inst.pred) {
        case Predicate::Oeq: r = a == b; break;
        case Predicate::One: r = a < b || a > b; break;
        case Predicate::Olt: r = a < b; break;
        case Predicate::Ole: r = a <= b; break;
        case Predicate::Ogt: r = a > b; break;
        case Predicate::Oge: r = a >= b; break;
        default: return std::nullopt;
      }
      return Operand::int_lit(r);
    }
    case Opcode::Select:
      if (o[0].kind == Operand::Kind::Int) return o[0].ival ? o[1] : o[2];
      if (o[1] == o[2]) return o[1];
      return std::nullopt;
    case Opcode::Phi: {
      std::optional<Operand> v;
      for (const auto& x : o) {
        if (x.is_local() && x.name == inst.result) continue;
        if (!v) v = x;
        else if (!(*v == x)) return std::nullopt;
      }
      return v;
    }
    default:
      return std::nullopt;
  }
}

bool fold_instructions(IrFunction& f) {
  std::map<std::string, Operand> repl;
  for (auto& b : f.blocks) {
    std::vector<Instruction> kept;
    for (auto& inst : b.insts) {
      if (inst.has_result()) {
        if (auto r = fold(inst, f.fast)) {
          repl.emplace(inst.result, *r);
          continue;
        }
      }
      kept.push_back(std::move(inst));
    }
    b.insts = std::move(kept);
  }
  opt::substitute(f, repl);
  return !repl.empty();
}

bool fold_branches(IrFunction& f) {
  bool changed = false;
  for (auto& b : f.blocks) {
    Instruction& t = b.terminator();
    if (t.op != Opcode::CondBr) continue;
    std::optional<size_t> taken;
    if (t.operands[0].kind == Operand::Kind::Int) taken = t.operands[0].ival ? 0 : 1;
    else if (t.labels[0] == t.labels[1]) taken = 0;
    if (!taken) continue;
    std::string keep = t.labels[*taken], drop = t.labels[1 - *taken];
    if (drop != keep)
      if (BasicBlock* d = f.find_block(drop)) opt::remove_phi_edge(*d, b.label);
    Instruction br;
    br.op = Opcode::Br;
    br.labels = {keep};
    br.line = t.line;
    t = br;
    changed = true;
  }
  return changed;
}

/// Folds a block into its unique predecessor when that predecessor jumps only to it.
bool merge_blocks(IrFunction& f) {
  Cfg cfg(f);
  for (int bi = 1; bi < cfg.size(); ++bi) {
    if (cfg.pred[bi].size() != 1) continue;
    int a = cfg.pred[bi][0];
    if (a == bi || cfg.succ[a].size() != 1 || f.blocks[a].terminator().op != Opcode::Br) continue;
    BasicBlock victim = std::move(f.blocks[bi]);
    std::map<std::string, Operand> repl;
    BasicBlock& into = f.blocks[a];
    into.insts.pop_back();
    for (auto& inst : victim.insts) {
      if (inst.op == Opcode::Phi) repl.emplace(inst.result, inst.operands.at(0));
      else into.insts.push_back(std::move(inst));
    }
    std::string from = victim.label, to = into.label;
    f.blocks.erase(f.blocks.begin() + bi);
    for (auto& b : f.blocks) opt::rename_phi_edge(b, from, to);
    opt::substitute(f, repl);
    return true;
  }
  return false;
}

/// Removes a block holding only `br C` by retargeting its predecessors to C.
bool skip_forwarders(IrFunction& f) {
  Cfg cfg(f);
  for (int bi = 1; bi < cfg.size(); ++bi) {
    const BasicBlock& b = f.blocks[bi];
    if (b.insts.size() != 1 || b.insts[0].op != Opcode::Br) continue;
    int c = cfg.block(b.insts[0].labels[0]);
    if (c == bi || cfg.pred[bi].empty()) continue;
    bool clash = false;
    for (int p : cfg.pred[bi])
      for (int q : cfg.pred[c]) clash |= p == q;
    if (clash) continue;
    std::string label = b.label;
    std::vector<std::string> preds;
    for (int p : cfg.pred[bi]) preds.push_back(cfg.labels[p]);
    for (auto& inst : f.blocks[c].insts) {
      if (inst.op != Opcode::Phi) continue;
      for (size_t k = 0; k < inst.labels.size(); ++k) {
        if (inst.labels[k] != label) continue;
        Operand v = inst.operands[k];
        inst.labels.erase(inst.labels.begin() + static_cast<long>(k));
        inst.operands.erase(inst.operands.begin() + static_cast<long>(k));
        for (const auto& p : preds) {
          inst.labels.push_back(p);
          inst.operands.push_back(v);
        }
        break;
      }
    }
    std::string target = cfg.labels[c];
    for (int p : cfg.pred[bi])
      for (auto& l : f.blocks[p].terminator().labels)
        if (l == label) l = target;
    f.blocks.erase(f.blocks.begin() + bi);
    return true;
  }
  return false;
}

}  // namespace

bool simplify(IrFunction& f) {
  if (f.is_declaration) return false;
  bool any = false;
  for (bool changed = true; changed;) {
    changed = fold_instructions(f);
    changed |= fold_branches(f);
    changed |= opt::remove_unreachable_blocks(f);
    changed |= merge_blocks(f);
    changed |= skip_forwarders(f);
    any |= changed;
  }
  return any;
}

}  // namespace adjointc
