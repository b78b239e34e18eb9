// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include "adjointc/cfg.hpp"
#include "adjointc/optimizer.hpp"
#include "adjointc/text.hpp"
#include "opt/util.hpp"

namespace adjointc {

bool cse(IrFunction& f) {
  if (f.is_declaration) return false;
  Cfg cfg(f);
  DomTree dom(cfg);
  std::map<std::string, std::vector<std::pair<int, std::string>>> seen;
  std::map<std::string, Operand> repl;
  for (int b : cfg.rpo) {
    for (const auto& inst : f.blocks[b].insts) {
      if (!is_pure(inst.op) || !inst.has_result()) continue;
      Instruction probe = inst;
      probe.result = "_";
      probe.line = 0;
      for (auto& o : probe.operands)
        if (o.is_local())
          if (auto it = repl.find(o.name); it != repl.end()) o = it->second;
      std::string key = print_instruction(probe);
      auto& cands = seen[key];
      bool hit = false;
      for (const auto& [db, name] : cands) {
        if (dom.dominates(db, b)) {
          repl.emplace(inst.result, Operand::local(name));
          hit = true;
          break;
        }
      }
      if (!hit) cands.emplace_back(b, inst.result);
    }
  }
  if (repl.empty()) return false;
  for (auto& b : f.blocks) {
    std::vector<Instruction> kept;
    for (auto& inst : b.insts)
      if (!inst.has_result() || !repl.count(inst.result)) kept.push_back(std::move(inst));
    b.insts = std::move(kept);
  }
  opt::substitute(f, repl);
  return true;
}

}  // namespace adjointc
