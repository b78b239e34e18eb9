// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "adjointc/ir.hpp"

namespace adjointc {

/// Block-indexed control-flow graph. Indices follow the function's block order.
/// Predecessor and successor lists are deduplicated and deterministic.
struct Cfg {
  std::vector<std::string> labels;
  std::map<std::string, int, std::less<>> index;
  std::vector<std::vector<int>> succ;
  std::vector<std::vector<int>> pred;
  std::vector<int> rpo;  // reachable blocks in reverse post-order
  std::vector<bool> reachable;

  explicit Cfg(const IrFunction& f);
  int size() const { return static_cast<int>(labels.size()); }
  int block(std::string_view label) const;
};

struct DomTree {
  std::vector<int> idom;  // -1 for the entry and unreachable blocks

  explicit DomTree(const Cfg& cfg);
  bool dominates(int a, int b) const;
};

struct Loop {
  int header = -1;
  std::vector<int> latches;       // sources of back edges
  std::set<int> blocks;
  int parent = -1;                // enclosing loop, -1 at top level
  int depth = 1;
  std::optional<int> preheader;   // unique predecessor from outside, if any
  std::vector<std::pair<int, int>> exits;  // (inside block, outside successor)
};

/// Natural loops found from dominator back edges. `reducible` is false when a
/// retreating edge targets a non-dominating block.
struct LoopInfo {
  std::vector<Loop> loops;     // outer loops precede inner ones
  std::vector<int> innermost;  // per block: innermost loop index or -1
  bool reducible = true;

  LoopInfo(const Cfg& cfg, const DomTree& dom);
  /// Loops containing `block`, outermost first.
  std::vector<int> nest(int block) const;
  bool contains(int loop, int block) const { return loops[loop].blocks.count(block) != 0; }
};

}  // namespace adjointc
