// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <functional>

#include "ad/synth.hpp"
#include "opt/util.hpp"

namespace adjointc::ad {

Instruction make(Opcode op, IrType t, std::string result, std::vector<Operand> ops) {
  Instruction i;
  i.op = op;
  i.type = t;
  i.result = std::move(result);
  i.operands = std::move(ops);
  return i;
}

Instruction make_br(std::string label) {
  Instruction i;
  i.op = Opcode::Br;
  i.labels = {std::move(label)};
  return i;
}

Instruction make_condbr(Operand c, std::string t, std::string f) {
  Instruction i;
  i.op = Opcode::CondBr;
  i.operands = {std::move(c)};
  i.labels = {std::move(t), std::move(f)};
  return i;
}

Instruction make_ret(IrType t, std::optional<Operand> v) {
  Instruction i;
  i.op = Opcode::Ret;
  i.type = t;
  if (v) i.operands.push_back(*v);
  return i;
}

Instruction make_store(IrType t, Operand v, Operand p, uint32_t flags) {
  Instruction i = make(Opcode::Store, t, "", {std::move(v), std::move(p)});
  i.flags = flags;
  return i;
}

Instruction make_load(IrType t, std::string result, Operand p, uint32_t flags) {
  Instruction i = make(Opcode::Load, t, std::move(result), {std::move(p)});
  i.flags = flags;
  return i;
}

Instruction make_cmp(Opcode op, Predicate p, IrType arg, std::string result, Operand a, Operand b) {
  Instruction i = make(op, TypeKind::I1, std::move(result), {std::move(a), std::move(b)});
  i.pred = p;
  i.arg_types = {arg};
  return i;
}

Instruction make_call(IrType t, std::string result, std::string callee, std::vector<Operand> args,
                      std::vector<IrType> types) {
  Instruction i = make(Opcode::Call, t, std::move(result), std::move(args));
  i.callee = std::move(callee);
  i.arg_types = std::move(types);
  return i;
}

Instruction make_callind(IrType t, std::string result, Operand fn, std::vector<Operand> args,
                         std::vector<IrType> types) {
  Instruction i = make(Opcode::CallInd, t, std::move(result), {std::move(fn)});
  i.arg_types = {TypeKind::Ptr};
  for (auto& a : args) i.operands.push_back(std::move(a));
  for (auto t2 : types) i.arg_types.push_back(t2);
  return i;
}

namespace {

Error unsupported(const IrFunction& f, const std::string& what) {
  return Error(ErrorCode::Unsupported, "Unsupported: @" + f.name + ": " + what);
}

struct Analyses {
  std::unique_ptr<Cfg> cfg;
  std::unique_ptr<DomTree> dom;
  std::unique_ptr<LoopInfo> li;

  explicit Analyses(const IrFunction& f)
      : cfg(std::make_unique<Cfg>(f)),
        dom(std::make_unique<DomTree>(*cfg)),
        li(std::make_unique<LoopInfo>(*cfg, *dom)) {}
};

void unify_returns(IrFunction& f, std::set<std::string>& used) {
  std::vector<size_t> rets;
  for (size_t b = 0; b < f.blocks.size(); ++b)
    if (f.blocks[b].terminator().op == Opcode::Ret) rets.push_back(b);
  if (rets.empty()) throw unsupported(f, "function never returns");
  if (rets.size() == 1) return;
  BasicBlock r;
  r.label = opt::fresh("return", used);
  Instruction phi = make(Opcode::Phi, f.ret_type, "", {});
  if (!f.ret_type.is_void()) phi.result = opt::fresh("retval", used);
  for (size_t b : rets) {
    Instruction& t = f.blocks[b].terminator();
    if (!f.ret_type.is_void()) {
      phi.operands.push_back(t.operands[0]);
      phi.labels.push_back(f.blocks[b].label);
    }
    t = make_br(r.label);
  }
  if (!f.ret_type.is_void()) r.insts.push_back(phi);
  r.insts.push_back(make_ret(f.ret_type, f.ret_type.is_void() ? std::nullopt
                                                               : std::optional<Operand>(Operand::local(phi.result))));
  f.blocks.push_back(std::move(r));
}

void add_preheader(IrFunction& f, const Cfg& cfg, const Loop& loop, std::set<std::string>& used) {
  const std::string header = cfg.labels[loop.header];
  const std::string ph = opt::fresh(header + ".ph", used);
  std::vector<std::string> outside;
  for (int p : cfg.pred[loop.header])
    if (!loop.blocks.count(p)) outside.push_back(cfg.labels[p]);
  BasicBlock pre;
  pre.label = ph;
  for (auto& inst : f.blocks[loop.header].insts) {
    if (inst.op != Opcode::Phi) continue;
    Instruction np = make(Opcode::Phi, inst.type, opt::fresh(inst.result + ".ph", used), {});
    std::vector<Operand> ops;
    std::vector<std::string> labels;
    for (size_t k = 0; k < inst.labels.size(); ++k) {
      bool out = std::find(outside.begin(), outside.end(), inst.labels[k]) != outside.end();
      if (out) {
        np.operands.push_back(inst.operands[k]);
        np.labels.push_back(inst.labels[k]);
      } else {
        ops.push_back(inst.operands[k]);
        labels.push_back(inst.labels[k]);
      }
    }
    ops.push_back(Operand::local(np.result));
    labels.push_back(ph);
    pre.insts.push_back(np);
    inst.operands = std::move(ops);
    inst.labels = std::move(labels);
  }
  pre.insts.push_back(make_br(header));
  for (const auto& o : outside)
    for (auto& l : f.find_block(o)->terminator().labels)
      if (l == header) l = ph;
  f.blocks.insert(f.blocks.begin() + loop.header, std::move(pre));
}

/// Gives every loop exit edge a block of its own unless the target already has a single predecessor.
void split_exits(IrFunction& f, std::set<std::string>& used) {
  Analyses a(f);
  std::set<std::pair<int, int>> edges;
  for (const auto& l : a.li->loops)
    for (auto e : l.exits) edges.insert(e);
  std::vector<BasicBlock> added;
  for (auto [from, to] : edges) {
    if (a.cfg->pred[to].size() == 1) continue;
    const std::string from_l = a.cfg->labels[from], to_l = a.cfg->labels[to];
    BasicBlock x;
    x.label = opt::fresh(from_l + ".exit", used);
    x.insts.push_back(make_br(to_l));
    for (auto& l : f.blocks[from].terminator().labels)
      if (l == to_l) l = x.label;
    opt::rename_phi_edge(f.blocks[to], from_l, x.label);
    added.push_back(std::move(x));
  }
  // Keep each exit block next to its source for readable output.
  for (auto& x : added) {
    std::string src = x.label.substr(0, x.label.rfind(".exit"));
    auto it = std::find_if(f.blocks.begin(), f.blocks.end(), [&](const BasicBlock& b) { return b.label == src; });
    f.blocks.insert(it == f.blocks.end() ? f.blocks.end() : it + 1, std::move(x));
  }
}

const Instruction* def_of(const IrFunction& f, const std::string& name) {
  for (const auto& b : f.blocks)
    for (const auto& i : b.insts)
      if (i.result == name) return &i;
  return nullptr;
}

/// `n` is `iadd phi, K` (either order) with a literal K.
std::optional<int64_t> step_of(const IrFunction& f, const Operand& n, const std::string& phi) {
  if (!n.is_local()) return std::nullopt;
  const Instruction* d = def_of(f, n.name);
  if (!d || d->op != Opcode::IAdd || d->type != TypeKind::I64) return std::nullopt;
  const Operand& a = d->operands[0];
  const Operand& b = d->operands[1];
  if (a.is_local() && a.name == phi && b.kind == Operand::Kind::Int) return b.ival;
  if (b.is_local() && b.name == phi && a.kind == Operand::Kind::Int) return a.ival;
  return std::nullopt;
}

bool eval_icmp(Predicate p, int64_t a, int64_t b) {
  switch (p) {
    case Predicate::Eq: return a == b;
    case Predicate::Ne: return a != b;
    case Predicate::Slt: return a < b;
    case Predicate::Sle: return a <= b;
    case Predicate::Sgt: return a > b;
    case Predicate::Sge: return a >= b;
    default: return false;
  }
}

constexpr int64_t kTripSimulationCap = int64_t{1} << 24;

int64_t static_trips(const Prepared& P, int L) {
  const IrFunction& f = P.fn;
  const Loop& loop = P.li->loops[L];
  std::set<int> exiting;
  for (auto [from, to] : loop.exits) exiting.insert(from);
  if (exiting.size() != 1) return -1;
  int e = *exiting.begin();
  if (!P.dom->dominates(e, P.loops[L].latch)) return -1;
  const Instruction& t = f.blocks[e].terminator();
  if (t.op != Opcode::CondBr || !t.operands[0].is_local()) return -1;
  const Instruction* c = def_of(f, t.operands[0].name);
  if (!c || c->op != Opcode::ICmp) return -1;
  bool stay_if_true = loop.blocks.count(P.cfg->block(t.labels[0])) != 0;
  bool stay_if_false = loop.blocks.count(P.cfg->block(t.labels[1])) != 0;
  if (stay_if_true == stay_if_false) return -1;

  // One side is a literal, the other an affine counter of this loop or its increment.
  for (int side = 0; side < 2; ++side) {
    const Operand& x = c->operands[side];
    const Operand& k = c->operands[1 - side];
    if (k.kind != Operand::Kind::Int || !x.is_local()) continue;
    int64_t bump = 0;
    std::string phi = x.name;
    if (!P.affine.count(phi)) {
      const Instruction* d = def_of(f, x.name);
      if (!d || d->op != Opcode::IAdd) continue;
      bool found = false;
      for (const auto& [name, aff] : P.affine) {
        if (aff.loop != L) continue;
        if (auto s = step_of(f, x, name)) {
          phi = name;
          bump = *s;
          found = true;
          break;
        }
      }
      if (!found) continue;
    }
    const Affine& aff = P.affine.at(phi);
    if (aff.loop != L || aff.start.kind != Operand::Kind::Int) continue;
    for (int64_t j = 0; j < kTripSimulationCap; ++j) {
      int64_t v = aff.start.ival + j * aff.step + bump;
      bool r = side == 0 ? eval_icmp(c->pred, v, k.ival) : eval_icmp(c->pred, k.ival, v);
      bool stay = r ? stay_if_true : stay_if_false;
      if (!stay) return j + 1;
    }
    return -1;
  }
  return -1;
}

/// Blocks reachable from `s` inside the region of `D` without passing `D` or `M`.
std::set<int> reach(const Prepared& P, int s, int D, int M) {
  std::set<int> seen;
  int L = P.li->innermost[D];
  std::vector<int> work{s};
  while (!work.empty()) {
    int b = work.back();
    work.pop_back();
    if (b == D || b == M || seen.count(b)) continue;
    if (L != -1 && (!P.li->contains(L, b) || b == P.li->loops[L].header)) continue;
    seen.insert(b);
    for (int n : P.cfg->succ[b]) work.push_back(n);
  }
  return seen;
}

std::optional<Choice> cond_choice(const Prepared& P, int M) {
  const auto& preds = P.cfg->pred[M];
  if (preds.size() != 2) return std::nullopt;
  int D = P.dom->idom[M];
  if (D < 0 || P.li->innermost[D] != P.li->innermost[M]) return std::nullopt;
  const Instruction& t = P.fn.blocks[D].terminator();
  if (t.op != Opcode::CondBr || !t.operands[0].is_local() || t.labels[0] == t.labels[1]) return std::nullopt;
  int st = P.cfg->block(t.labels[0]), sf = P.cfg->block(t.labels[1]);
  auto group = [&](int s) {
    std::set<int> g;
    if (s == M) {
      g.insert(D);
      return g;
    }
    for (int b : reach(P, s, D, M))
      if (std::find(preds.begin(), preds.end(), b) != preds.end()) g.insert(b);
    return g;
  };
  std::set<int> gt = group(st), gf = group(sf);
  if (gt.size() != 1 || gf.size() != 1 || *gt.begin() == *gf.begin()) return std::nullopt;
  Choice c;
  c.kind = ChoiceKind::Cond;
  c.preds = {*gt.begin(), *gf.begin()};
  c.value = t.operands[0].name;
  return c;
}

void refresh(Prepared& P) {
  Analyses a(P.fn);
  P.cfg = std::move(a.cfg);
  P.dom = std::move(a.dom);
  P.li = std::move(a.li);
}

}  // namespace

Prepared prepare(const IrFunction& src) {
  if (src.is_declaration)
    throw Error(ErrorCode::MissingDefinition, "MissingDefinition: @" + src.name + " has no body");
  Prepared P;
  P.fn = src;
  IrFunction& f = P.fn;
  opt::remove_unreachable_blocks(f);
  std::set<std::string> used = opt::used_names(f);
  unify_returns(f, used);

  for (;;) {
    Analyses a(f);
    if (!a.li->reducible) throw unsupported(f, "irreducible control flow");
    bool changed = false;
    for (const auto& l : a.li->loops) {
      if (l.latches.size() != 1)
        throw unsupported(f, "loop at %" + a.cfg->labels[l.header] + " has several latches");
      if (!l.preheader) {
        add_preheader(f, *a.cfg, l, used);
        changed = true;
        break;
      }
    }
    if (!changed) break;
  }
  split_exits(f, used);
  refresh(P);

  // Counters: reuse `phi [0, pre], [phi + 1, latch]` when present.
  P.loops.assign(P.li->loops.size(), {});
  for (size_t L = 0; L < P.li->loops.size(); ++L) {
    const Loop& loop = P.li->loops[L];
    LoopFacts& lf = P.loops[L];
    lf.header = loop.header;
    lf.preheader = *loop.preheader;
    lf.latch = loop.latches[0];
    const std::string pre = P.cfg->labels[lf.preheader], latch = P.cfg->labels[lf.latch];
    for (const auto& inst : f.blocks[loop.header].insts) {
      if (inst.op != Opcode::Phi) break;
      if (inst.type != TypeKind::I64 || inst.labels.size() != 2) continue;
      size_t kp = inst.labels[0] == pre ? 0 : 1;
      const Operand& start = inst.operands[kp];
      if (start.kind == Operand::Kind::Int && start.ival == 0 && step_of(f, inst.operands[1 - kp], inst.result) == 1) {
        lf.iv = inst.result;
        break;
      }
    }
    if (lf.iv.empty()) {
      std::string hl = P.cfg->labels[loop.header];
      lf.iv = opt::fresh("iv." + hl, used);
      std::string next = opt::fresh("iv." + hl + ".next", used);
      Instruction phi = make(Opcode::Phi, TypeKind::I64, lf.iv, {Operand::int_lit(0), Operand::local(next)});
      phi.labels = {pre, latch};
      phi.flags = kFlagCtl;
      auto& hi = f.blocks[loop.header].insts;
      hi.insert(hi.begin(), phi);
      Instruction inc = make(Opcode::IAdd, TypeKind::I64, next, {Operand::local(lf.iv), Operand::int_lit(1)});
      inc.flags = kFlagCtl;
      auto& li = f.blocks[lf.latch].insts;
      li.insert(li.end() - 1, inc);
    }
  }

  // Affine counters of every loop.
  for (size_t L = 0; L < P.li->loops.size(); ++L) {
    const LoopFacts& lf = P.loops[L];
    const std::string pre = P.cfg->labels[lf.preheader];
    for (const auto& inst : f.blocks[lf.header].insts) {
      if (inst.op != Opcode::Phi) break;
      if (inst.type != TypeKind::I64 || inst.labels.size() != 2) continue;
      size_t kp = inst.labels[0] == pre ? 0 : 1;
      if (auto s = step_of(f, inst.operands[1 - kp], inst.result))
        P.affine[inst.result] = Affine{static_cast<int>(L), inst.operands[kp], *s};
    }
  }
  for (size_t L = 0; L < P.loops.size(); ++L) P.loops[L].trips = static_trips(P, static_cast<int>(L));

  // Trip-count values at exits of loops without a static count.
  std::map<int, std::vector<ExitInfo>> exits;
  for (int b = 0; b < P.cfg->size(); ++b) {
    for (int p : P.cfg->pred[b]) {
      std::vector<int> left;
      for (int L : P.li->nest(p))
        if (!P.li->contains(L, b)) left.push_back(L);
      if (left.empty()) continue;
      auto& infos = exits[b];
      std::vector<Instruction> counts;
      for (int L : left) {
        ExitInfo e;
        e.loop = L;
        if (P.loops[L].trips < 0) {
          e.trip = opt::fresh("trip." + P.cfg->labels[P.loops[L].header], used);
          Instruction t = make(Opcode::IAdd, TypeKind::I64, e.trip, {Operand::local(P.loops[L].iv), Operand::int_lit(1)});
          t.flags = kFlagCtl;
          counts.push_back(t);
        }
        infos.push_back(e);
      }
      auto& insts = f.blocks[b].insts;
      auto at = std::find_if(insts.begin(), insts.end(), [](const Instruction& i) { return i.op != Opcode::Phi; });
      insts.insert(at, counts.begin(), counts.end());
    }
  }
  P.exits = std::move(exits);

  // Predecessor choices; merges that cannot reuse a branch condition record an id.
  P.choice.assign(P.cfg->size(), {});
  for (int b = 0; b < P.cfg->size(); ++b) {
    Choice& c = P.choice[b];
    const auto& preds = P.cfg->pred[b];
    int L = P.li->innermost[b];
    if (b == 0) {
      c.kind = ChoiceKind::Entry;
    } else if (L != -1 && P.loops[L].header == b) {
      c.kind = ChoiceKind::Header;
      c.preds = {P.loops[L].preheader, P.loops[L].latch};
    } else if (preds.size() == 1) {
      c.kind = ChoiceKind::Single;
      c.preds = preds;
    } else if (auto cc = cond_choice(P, b)) {
      c = *cc;
    } else {
      c.kind = ChoiceKind::Record;
      c.preds = preds;
      c.value = opt::fresh("pred." + P.cfg->labels[b], used);
      Instruction phi = make(Opcode::Phi, TypeKind::I64, c.value, {});
      for (size_t k = 0; k < preds.size(); ++k) {
        phi.operands.push_back(Operand::int_lit(static_cast<int64_t>(k)));
        phi.labels.push_back(P.cfg->labels[preds[k]]);
      }
      phi.flags = kFlagCtl;
      auto& insts = f.blocks[b].insts;
      insts.insert(insts.begin(), phi);
    }
  }
  for (int b = 0; b < P.cfg->size(); ++b)
    if (f.blocks[b].terminator().op == Opcode::Ret) P.ret_block = b;
  return P;
}

}  // namespace adjointc::ad
