// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include "adjointc/cfg.hpp"

#include <algorithm>
#include <functional>

namespace adjointc {

Cfg::Cfg(const IrFunction& f) {
  const int n = static_cast<int>(f.blocks.size());
  labels.reserve(n);
  for (int i = 0; i < n; ++i) {
    labels.push_back(f.blocks[i].label);
    index.emplace(f.blocks[i].label, i);
  }
  succ.assign(n, {});
  pred.assign(n, {});
  for (int i = 0; i < n; ++i) {
    const auto& insts = f.blocks[i].insts;
    if (insts.empty()) continue;
    const Instruction& t = insts.back();
    if (!is_terminator(t.op)) continue;
    for (const auto& l : t.labels) {
      auto it = index.find(l);
      if (it == index.end()) continue;
      int s = it->second;
      if (std::find(succ[i].begin(), succ[i].end(), s) == succ[i].end()) succ[i].push_back(s);
    }
  }
  for (int i = 0; i < n; ++i)
    for (int s : succ[i]) pred[s].push_back(i);

  reachable.assign(n, false);
  if (n == 0) return;
  std::vector<int> post;
  std::vector<std::pair<int, size_t>> stack{{0, 0}};
  reachable[0] = true;
  while (!stack.empty()) {
    auto& [b, k] = stack.back();
    if (k < succ[b].size()) {
      int s = succ[b][k++];
      if (!reachable[s]) {
        reachable[s] = true;
        stack.emplace_back(s, 0);
      }
    } else {
      post.push_back(b);
      stack.pop_back();
    }
  }
  rpo.assign(post.rbegin(), post.rend());
}

int Cfg::block(std::string_view label) const {
  auto it = index.find(label);
  return it == index.end() ? -1 : it->second;
}

DomTree::DomTree(const Cfg& cfg) {
  const int n = cfg.size();
  idom.assign(n, -1);
  if (n == 0) return;
  std::vector<int> order(n, -1);
  for (size_t i = 0; i < cfg.rpo.size(); ++i) order[cfg.rpo[i]] = static_cast<int>(i);
  std::vector<int> doms(n, -1);
  doms[0] = 0;
  auto intersect = [&](int a, int b) {
    while (a != b) {
      while (order[a] > order[b]) a = doms[a];
      while (order[b] > order[a]) b = doms[b];
    }
    return a;
  };
  bool changed = true;
  while (changed) {
    changed = false;
    for (size_t i = 1; i < cfg.rpo.size(); ++i) {
      int b = cfg.rpo[i];
      int nd = -1;
      for (int p : cfg.pred[b]) {
        if (doms[p] == -1) continue;
        nd = nd == -1 ? p : intersect(p, nd);
      }
      if (nd != -1 && doms[b] != nd) {
        doms[b] = nd;
        changed = true;
      }
    }
  }
  for (int b = 1; b < n; ++b) idom[b] = doms[b];
}

bool DomTree::dominates(int a, int b) const {
  if (a == b) return true;
  if (a == 0) return b == 0 || idom[b] != -1;
  while (b != -1 && b != 0) {
    b = idom[b];
    if (b == a) return true;
  }
  return false;
}

LoopInfo::LoopInfo(const Cfg& cfg, const DomTree& dom) {
  const int n = cfg.size();
  innermost.assign(n, -1);
  // Back edges grouped by header.
  std::map<int, std::vector<int>> back;
  for (int b : cfg.rpo) {
    for (int s : cfg.succ[b]) {
      if (dom.dominates(s, b)) {
        back[s].push_back(b);
      } else {
        // Retreating edge into a non-dominating block means irreducible flow.
        auto pos = [&](int x) { return std::find(cfg.rpo.begin(), cfg.rpo.end(), x) - cfg.rpo.begin(); };
        if (pos(s) <= pos(b)) reducible = false;
      }
    }
  }
  for (auto& [h, latches] : back) {
    Loop l;
    l.header = h;
    l.latches = latches;
    l.blocks.insert(h);
    std::vector<int> work(latches.begin(), latches.end());
    while (!work.empty()) {
      int b = work.back();
      work.pop_back();
      if (!l.blocks.insert(b).second) continue;
      for (int p : cfg.pred[b])
        if (cfg.reachable[p]) work.push_back(p);
    }
    std::vector<int> outside;
    for (int p : cfg.pred[h])
      if (!l.blocks.count(p)) outside.push_back(p);
    if (outside.size() == 1) l.preheader = outside[0];
    for (int b : l.blocks)
      for (int s : cfg.succ[b])
        if (!l.blocks.count(s)) l.exits.emplace_back(b, s);
    loops.push_back(std::move(l));
  }
  // Larger loops first so that parents precede children.
  std::stable_sort(loops.begin(), loops.end(),
                   [](const Loop& a, const Loop& b) { return a.blocks.size() > b.blocks.size(); });
  for (size_t i = 0; i < loops.size(); ++i) {
    for (size_t j = 0; j < i; ++j) {
      if (loops[j].blocks.count(loops[i].header) &&
          std::includes(loops[j].blocks.begin(), loops[j].blocks.end(), loops[i].blocks.begin(),
                        loops[i].blocks.end())) {
        if (loops[i].parent == -1 || loops[loops[i].parent].blocks.size() > loops[j].blocks.size())
          loops[i].parent = static_cast<int>(j);
      }
    }
    loops[i].depth = loops[i].parent == -1 ? 1 : loops[loops[i].parent].depth + 1;
    for (int b : loops[i].blocks) innermost[b] = static_cast<int>(i);
  }
}

std::vector<int> LoopInfo::nest(int block) const {
  std::vector<int> out;
  for (int l = innermost[block]; l != -1; l = loops[l].parent) out.push_back(l);
  std::reverse(out.begin(), out.end());
  return out;
}

}  // namespace adjointc
