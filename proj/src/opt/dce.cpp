// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <set>

#include "adjointc/optimizer.hpp"
#include "opt/util.hpp"

namespace adjointc {

bool dce(IrFunction& f, const IrModule& m) {
  if (f.is_declaration) return false;
  std::map<std::string, const Instruction*> defs;
  for (const auto& b : f.blocks)
    for (const auto& inst : b.insts)
      if (inst.has_result()) defs[inst.result] = &inst;

  std::set<const Instruction*> live;
  std::vector<const Instruction*> work;
  for (const auto& b : f.blocks)
    for (const auto& inst : b.insts)
      if (!opt::side_effect_free(inst, &m) || !inst.has_result()) work.push_back(&inst);
  while (!work.empty()) {
    const Instruction* i = work.back();
    work.pop_back();
    if (!live.insert(i).second) continue;
    for (const auto& o : i->operands) {
      if (!o.is_local()) continue;
      auto it = defs.find(o.name);
      if (it != defs.end() && !live.count(it->second)) work.push_back(it->second);
    }
  }

  bool changed = false;
  for (auto& b : f.blocks) {
    std::vector<Instruction> kept;
    for (auto& inst : b.insts) {
      if (live.count(&inst)) kept.push_back(std::move(inst));
      else changed = true;
    }
    b.insts = std::move(kept);
  }
  return changed;
}

}  // namespace adjointc
