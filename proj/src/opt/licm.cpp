// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <memory>

#include "adjointc/alias.hpp"
#include "adjointc/cfg.hpp"
#include "adjointc/optimizer.hpp"
#include "opt/util.hpp"

namespace adjointc {

namespace {

struct Site {
  int block;
  size_t index;
};

void create_preheader(IrFunction& f, const Cfg& cfg, const Loop& loop) {
  std::set<std::string> used = opt::used_names(f);
  const std::string header = cfg.labels[loop.header];
  const std::string ph = opt::fresh(header + ".ph", used);
  std::vector<std::string> outside;
  for (int p : cfg.pred[loop.header])
    if (!loop.blocks.count(p)) outside.push_back(cfg.labels[p]);

  BasicBlock pre;
  pre.label = ph;
  BasicBlock& h = f.blocks[loop.header];
  for (auto& inst : h.insts) {
    if (inst.op != Opcode::Phi) continue;
    Instruction np;
    np.op = Opcode::Phi;
    np.type = inst.type;
    np.result = opt::fresh(inst.result + ".ph", used);
    std::vector<Operand> ops;
    std::vector<std::string> labels;
    for (size_t k = 0; k < inst.labels.size(); ++k) {
      if (std::find(outside.begin(), outside.end(), inst.labels[k]) != outside.end()) {
        np.operands.push_back(inst.operands[k]);
        np.labels.push_back(inst.labels[k]);
      } else {
        ops.push_back(inst.operands[k]);
        labels.push_back(inst.labels[k]);
      }
    }
    if (np.operands.size() == 1) {
      ops.push_back(np.operands[0]);
    } else {
      ops.push_back(Operand::local(np.result));
      pre.insts.push_back(np);
    }
    labels.push_back(ph);
    inst.operands = std::move(ops);
    inst.labels = std::move(labels);
  }
  Instruction br;
  br.op = Opcode::Br;
  br.labels = {header};
  pre.insts.push_back(br);
  for (const auto& o : outside)
    for (auto& l : f.find_block(o)->terminator().labels)
      if (l == header) l = ph;
  f.blocks.insert(f.blocks.begin() + loop.header, std::move(pre));
}

}  // namespace

bool licm(IrFunction& f, const IrModule& m) {
  if (f.is_declaration) return false;
  std::unique_ptr<TypeEnv> env;
  try {
    env = std::make_unique<TypeEnv>(analyze_types(m));
  } catch (const Error&) {
    env.reset();
  }
  return opt::licm_with(f, m, env.get());
}

bool opt::licm_with(IrFunction& f, const IrModule& m, const TypeEnv* env) {
  if (f.is_declaration) return false;
  bool any = false;
  for (int round = 0; round < 10000; ++round) {
    Cfg cfg(f);
    DomTree dom(cfg);
    LoopInfo li(cfg, dom);
    if (!li.reducible) return any;
    AliasAnalysis aa(m, f, env);
    std::map<std::string, int> def_block;
    for (int b = 0; b < cfg.size(); ++b)
      for (const auto& inst : f.blocks[b].insts)
        if (inst.has_result()) def_block[inst.result] = b;

    bool moved = false;
    for (int L = static_cast<int>(li.loops.size()) - 1; L >= 0 && !moved; --L) {
      const Loop& loop = li.loops[L];
      std::vector<int> exiting;
      for (auto [from, to] : loop.exits) exiting.push_back(from);
      auto every_iteration = [&](int b) {
        for (int l : loop.latches)
          if (!dom.dominates(b, l)) return false;
        return true;
      };
      auto guaranteed = [&](int b) {
        if (!every_iteration(b)) return false;
        for (int e : exiting)
          if (!dom.dominates(b, e)) return false;
        return true;
      };
      auto clobbered = [&](const Operand& p) {
        for (int b : loop.blocks)
          for (const auto& inst : f.blocks[b].insts)
            if (aa.writes(inst, p)) return true;
        return false;
      };

      std::set<std::string> hoisted;
      std::vector<Site> sites;
      for (int b : cfg.rpo) {
        if (!loop.blocks.count(b)) continue;
        const auto& insts = f.blocks[b].insts;
        for (size_t i = 0; i < insts.size(); ++i) {
          const Instruction& inst = insts[i];
          if (!inst.has_result() || inst.op == Opcode::Phi) continue;
          bool invariant = true;
          for (const auto& o : inst.operands) {
            if (!o.is_local()) continue;
            auto it = def_block.find(o.name);
            bool outside = it == def_block.end() || !loop.blocks.count(it->second);
            if (!outside && !hoisted.count(o.name)) invariant = false;
          }
          if (!invariant) continue;
          bool ok = false;
          if (is_pure(inst.op)) {
            ok = every_iteration(b);
          } else if (inst.op == Opcode::Load) {
            ok = guaranteed(b) && !clobbered(inst.operands[0]);
          } else if (inst.op == Opcode::Call && opt::side_effect_free(inst, &m)) {
            ok = guaranteed(b);
            for (size_t k = 0; ok && k < inst.operands.size(); ++k)
              if (inst.arg_types[k].is_ptr() && clobbered(inst.operands[k])) ok = false;
          }
          if (!ok) continue;
          hoisted.insert(inst.result);
          sites.push_back({b, i});
        }
      }
      if (sites.empty()) continue;

      int pre = loop.preheader.value_or(-1);
      if (pre < 0 || cfg.succ[pre].size() != 1) {
        create_preheader(f, cfg, loop);
        moved = true;
        break;
      }
      std::vector<Instruction> moving;
      for (const auto& s : sites) moving.push_back(f.blocks[s.block].insts[s.index]);
      for (auto& b : f.blocks) {
        std::vector<Instruction> kept;
        for (auto& inst : b.insts)
          if (!inst.has_result() || !hoisted.count(inst.result))
            kept.push_back(std::move(inst));
        b.insts = std::move(kept);
      }
      auto& dst = f.blocks[pre].insts;
      dst.insert(dst.end() - 1, moving.begin(), moving.end());
      moved = true;
    }
    if (!moved) break;
    any = true;
  }
  return any;
}

}  // namespace adjointc
