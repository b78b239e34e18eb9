// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <functional>

#include "adjointc/optimizer.hpp"
#include "opt/util.hpp"

namespace adjointc {

namespace {

/// Functions that can reach themselves through direct calls.
std::set<std::string> recursive_functions(const IrModule& m) {
  std::map<std::string, std::set<std::string>> calls;
  for (const auto& f : m.functions)
    for (const auto& b : f.blocks)
      for (const auto& inst : b.insts)
        if (inst.op == Opcode::Call) calls[f.name].insert(inst.callee);
  std::set<std::string> out;
  for (const auto& f : m.functions) {
    std::set<std::string> seen;
    std::vector<std::string> work(calls[f.name].begin(), calls[f.name].end());
    while (!work.empty()) {
      std::string g = work.back();
      work.pop_back();
      if (g == f.name) {
        out.insert(f.name);
        break;
      }
      if (!seen.insert(g).second) continue;
      for (const auto& h : calls[g]) work.push_back(h);
    }
  }
  return out;
}

/// Replaces the call at `caller.blocks[bi].insts[ii]` with a renamed copy of `callee`.
void inline_site(IrFunction& caller, size_t bi, size_t ii, const IrFunction& callee) {
  std::set<std::string> used = opt::used_names(caller);
  const std::string prefix = callee.name + ".";
  std::map<std::string, std::string> rename;
  auto fresh_for = [&](const std::string& n) {
    auto it = rename.find(n);
    if (it != rename.end()) return it->second;
    return rename[n] = opt::fresh(prefix + n, used);
  };
  Instruction call = caller.blocks[bi].insts[ii];
  std::map<std::string, Operand> arg_of;
  for (size_t k = 0; k < callee.params.size(); ++k) arg_of[callee.params[k].name] = call.operands[k];
  std::map<std::string, std::string> block_rename;
  for (const auto& b : callee.blocks) {
    block_rename[b.label] = opt::fresh(prefix + b.label, used);
    for (const auto& inst : b.insts)
      if (inst.has_result()) fresh_for(inst.result);
  }
  auto block_name = [&](const std::string& l) { return block_rename.at(l); };

  BasicBlock& head = caller.blocks[bi];
  BasicBlock tail;
  tail.label = opt::fresh(head.label + ".cont", used);
  tail.insts.assign(head.insts.begin() + static_cast<long>(ii) + 1, head.insts.end());
  head.insts.resize(ii);
  Instruction jump;
  jump.op = Opcode::Br;
  jump.labels = {block_name(callee.blocks[0].label)};
  head.insts.push_back(jump);

  std::vector<std::pair<Operand, std::string>> returns;
  std::vector<BasicBlock> body;
  for (const auto& b : callee.blocks) {
    BasicBlock nb;
    nb.label = block_name(b.label);
    for (const auto& inst : b.insts) {
      Instruction ni = inst;
      if (ni.has_result()) ni.result = rename.at(inst.result);
      for (auto& o : ni.operands) {
        if (!o.is_local()) continue;
        if (auto a = arg_of.find(o.name); a != arg_of.end()) o = a->second;
        else o.name = rename.at(o.name);
      }
      for (auto& l : ni.labels) l = block_name(l);
      if (ni.op == Opcode::Ret) {
        if (!ni.operands.empty()) returns.emplace_back(ni.operands[0], nb.label);
        ni = Instruction{};
        ni.op = Opcode::Br;
        ni.labels = {tail.label};
        ni.line = inst.line;
      }
      nb.insts.push_back(std::move(ni));
    }
    body.push_back(std::move(nb));
  }

  std::map<std::string, Operand> repl;
  if (call.has_result()) {
    if (returns.size() == 1) {
      repl.emplace(call.result, returns[0].first);
    } else {
      Instruction phi;
      phi.op = Opcode::Phi;
      phi.type = call.type;
      phi.result = call.result;
      for (const auto& [v, l] : returns) {
        phi.operands.push_back(v);
        phi.labels.push_back(l);
      }
      tail.insts.insert(tail.insts.begin(), phi);
    }
  }
  // Successors of the original block now see the continuation as their predecessor.
  for (const auto& l : tail.insts.back().labels)
    if (BasicBlock* s = caller.find_block(l)) opt::rename_phi_edge(*s, head.label, tail.label);

  std::vector<BasicBlock> blocks;
  for (size_t k = 0; k <= bi; ++k) blocks.push_back(std::move(caller.blocks[k]));
  for (auto& b : body) blocks.push_back(std::move(b));
  blocks.push_back(std::move(tail));
  for (size_t k = bi + 1; k < caller.blocks.size(); ++k) blocks.push_back(std::move(caller.blocks[k]));
  caller.blocks = std::move(blocks);
  opt::substitute(caller, repl);
}

}  // namespace

bool inline_calls(IrModule& m, size_t threshold) {
  bool any = false;
  for (int round = 0; round < 8; ++round) {
    std::set<std::string> rec = recursive_functions(m);
    bool changed = false;
    for (auto& f : m.functions) {
      if (f.is_declaration) continue;
      for (size_t bi = 0; bi < f.blocks.size(); ++bi) {
        for (size_t ii = 0; ii < f.blocks[bi].insts.size(); ++ii) {
          const Instruction& inst = f.blocks[bi].insts[ii];
          if (inst.op != Opcode::Call || inst.callee == f.name || rec.count(inst.callee)) continue;
          const IrFunction* callee = m.find_function(inst.callee);
          if (!callee || callee->is_declaration || callee->instruction_count() > threshold) continue;
          if (m.custom_adjoints.count(callee->name)) continue;
          if (f.fast && !callee->fast) continue;
          IrFunction copy = *callee;
          inline_site(f, bi, ii, copy);
          changed = true;
          break;
        }
      }
    }
    if (!changed) break;
    any = true;
  }
  return any;
}

}  // namespace adjointc
