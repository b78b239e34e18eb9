// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include "opt/util.hpp"

#include <algorithm>

#include "adjointc/cfg.hpp"

namespace adjointc::opt {

void substitute(IrFunction& f, const std::map<std::string, Operand>& repl) {
  if (repl.empty()) return;
  auto resolve = [&](Operand o) {
    for (int guard = 0; o.is_local() && guard < 1000; ++guard) {
      auto it = repl.find(o.name);
      if (it == repl.end()) break;
      o = it->second;
    }
    return o;
  };
  for (auto& b : f.blocks)
    for (auto& inst : b.insts)
      for (auto& o : inst.operands)
        if (o.is_local()) o = resolve(o);
}

void remove_phi_edge(BasicBlock& block, const std::string& pred) {
  for (auto& inst : block.insts) {
    if (inst.op != Opcode::Phi) continue;
    for (size_t k = 0; k < inst.labels.size();) {
      if (inst.labels[k] == pred) {
        inst.labels.erase(inst.labels.begin() + static_cast<long>(k));
        inst.operands.erase(inst.operands.begin() + static_cast<long>(k));
      } else {
        ++k;
      }
    }
  }
}

void rename_phi_edge(BasicBlock& block, const std::string& from, const std::string& to) {
  for (auto& inst : block.insts)
    if (inst.op == Opcode::Phi)
      for (auto& l : inst.labels)
        if (l == from) l = to;
}

bool remove_unreachable_blocks(IrFunction& f) {
  Cfg cfg(f);
  std::vector<BasicBlock> kept;
  std::set<std::string> dead;
  for (int b = 0; b < cfg.size(); ++b) {
    if (cfg.reachable[b]) kept.push_back(std::move(f.blocks[b]));
    else dead.insert(cfg.labels[b]);
  }
  f.blocks = std::move(kept);
  if (dead.empty()) return false;
  for (auto& b : f.blocks)
    for (const auto& d : dead) remove_phi_edge(b, d);
  return true;
}

std::set<std::string> used_names(const IrFunction& f) {
  std::set<std::string> s;
  for (const auto& p : f.params) s.insert(p.name);
  for (const auto& b : f.blocks) {
    s.insert(b.label);
    for (const auto& inst : b.insts)
      if (inst.has_result()) s.insert(inst.result);
  }
  return s;
}

std::string fresh(const std::string& base, std::set<std::string>& used) {
  std::string name = base;
  for (int n = 1; used.count(name); ++n) name = base + "." + std::to_string(n);
  used.insert(name);
  return name;
}

bool side_effect_free(const Instruction& inst, const IrModule* m) {
  if (is_pure(inst.op)) return true;
  switch (inst.op) {
    case Opcode::Phi:
    case Opcode::Load:
    case Opcode::Alloc:
      return true;
    case Opcode::Call: {
      if (!m) return false;
      const IrFunction* c = m->find_function(inst.callee);
      if (!c || !c->readonly) return false;
      for (const auto& b : c->blocks)
        for (const auto& i : b.insts)
          if (i.op == Opcode::Read || i.op == Opcode::CallInd) return false;
      return true;
    }
    default:
      return false;
  }
}

}  // namespace adjointc::opt
