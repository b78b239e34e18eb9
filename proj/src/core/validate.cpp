// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <set>

#include "adjointc/cfg.hpp"
#include "adjointc/error.hpp"
#include "adjointc/text.hpp"

namespace adjointc {

std::string Diagnostic::to_string() const {
  std::string s;
  if (line > 0) s += "line " + std::to_string(line) + ": ";
  if (!function.empty()) s += "@" + function;
  if (!block.empty()) s += " %" + block;
  if (!function.empty() || !block.empty()) s += ": ";
  return s + message;
}

namespace {

class FunctionValidator {
 public:
  FunctionValidator(const IrModule& m, const IrFunction& f, std::vector<Diagnostic>& out)
      : m_(m), f_(f), out_(out) {}

  void run() {
    std::set<std::string> labels;
    for (const auto& b : f_.blocks) {
      if (!labels.insert(b.label).second) report(b, nullptr, "duplicate block label");
      if (b.insts.empty()) {
        report(b, nullptr, "block has no terminator");
        return;
      }
      for (size_t i = 0; i < b.insts.size(); ++i) {
        bool last = i + 1 == b.insts.size();
        if (is_terminator(b.insts[i].op) != last) {
          report(b, &b.insts[i], last ? "block does not end in a terminator"
                                      : "terminator in the middle of a block");
          return;
        }
      }
      for (const auto& l : b.terminator().labels)
        if (!f_.find_block(l)) report(b, &b.terminator(), "branch to unknown block %" + l);
    }
    if (!out_.empty()) return;

    Cfg cfg(f_);
    DomTree dom(cfg);
    if (!cfg.pred[0].empty()) report(f_.blocks[0], nullptr, "entry block must not have predecessors");

    // Definitions.
    std::map<std::string, std::pair<int, int>> defs;  // name -> (block, index); params at (-1,-1)
    for (const auto& p : f_.params) {
      types_[p.name] = p.type;
      if (!defs.emplace(p.name, std::pair{-1, -1}).second) report_fn("duplicate parameter %" + p.name);
    }
    for (int bi = 0; bi < cfg.size(); ++bi) {
      const auto& b = f_.blocks[bi];
      for (int ii = 0; ii < static_cast<int>(b.insts.size()); ++ii) {
        const auto& inst = b.insts[ii];
        if (!inst.has_result()) continue;
        if (!defs.emplace(inst.result, std::pair{bi, ii}).second)
          report(b, &inst, "value %" + inst.result + " is defined more than once");
        types_[inst.result] = inst.type;
      }
    }

    for (int bi = 0; bi < cfg.size(); ++bi) {
      const auto& b = f_.blocks[bi];
      bool in_phis = true;
      for (int ii = 0; ii < static_cast<int>(b.insts.size()); ++ii) {
        const auto& inst = b.insts[ii];
        if (inst.op == Opcode::Phi) {
          if (!in_phis) report(b, &inst, "phi is not at the head of its block");
          std::set<std::string> incoming(inst.labels.begin(), inst.labels.end());
          std::set<std::string> preds;
          for (int p : cfg.pred[bi]) preds.insert(cfg.labels[p]);
          if (incoming != preds || incoming.size() != inst.labels.size())
            report(b, &inst, "malformed phi: incoming blocks do not match predecessors");
        } else {
          in_phis = false;
        }
        for (size_t k = 0; k < inst.operands.size(); ++k) {
          const Operand& o = inst.operands[k];
          if (o.is_global()) {
            if (!m_.find_function(o.name) && !m_.find_global(o.name))
              report(b, &inst, "reference to unknown symbol @" + o.name);
            continue;
          }
          if (!o.is_local()) continue;
          auto it = defs.find(o.name);
          if (it == defs.end()) {
            report(b, &inst, "use of undefined value %" + o.name);
            continue;
          }
          auto [db, di] = it->second;
          if (db < 0 || !cfg.reachable[bi]) continue;
          if (inst.op == Opcode::Phi) {
            int from = cfg.block(inst.labels[k]);
            if (from >= 0 && cfg.reachable[from] && !dom.dominates(db, from))
              report(b, &inst, "phi operand %" + o.name + " does not dominate the incoming edge");
          } else if (db == bi ? di >= ii : !dom.dominates(db, bi)) {
            report(b, &inst, "use of %" + o.name + " is not dominated by its definition");
          }
        }
        check_types(b, inst);
      }
    }
  }

 private:
  void report(const BasicBlock& b, const Instruction* inst, const std::string& msg) {
    out_.push_back({f_.name, b.label, inst ? inst->line : 0, msg});
  }
  void report_fn(const std::string& msg) { out_.push_back({f_.name, "", 0, msg}); }

  std::optional<IrType> type_of(const Operand& o) const {
    if (o.is_local()) {
      auto it = types_.find(o.name);
      if (it == types_.end()) return std::nullopt;
      return it->second;
    }
    if (o.is_global() || o.kind == Operand::Kind::Null) return IrType(TypeKind::Ptr);
    return std::nullopt;  // literals adapt to context
  }

  void expect_type(const BasicBlock& b, const Instruction& inst, const Operand& o, IrType want,
                   const char* what) {
    if (o.kind == Operand::Kind::Float && !want.is_float()) {
      report(b, &inst, std::string(what) + " must be " + std::string(type_name(want)) + ", found a float literal");
      return;
    }
    auto t = type_of(o);
    if (!t) return;
    if (*t != want)
      report(b, &inst, std::string(what) + " must be " + std::string(type_name(want)) + ", found " +
                           std::string(type_name(*t)));
  }

  void check_types(const BasicBlock& b, const Instruction& inst) {
    const auto& ops = inst.operands;
    switch (inst.op) {
      case Opcode::FAdd: case Opcode::FSub: case Opcode::FMul: case Opcode::FDiv:
      case Opcode::FNeg: case Opcode::Pow: case Opcode::Sin: case Opcode::Cos:
      case Opcode::Exp: case Opcode::Log: case Opcode::Sqrt: case Opcode::Fabs:
      case Opcode::Read:
        if (!inst.type.is_float()) report(b, &inst, "float operation with non-float type");
        for (const auto& o : ops) expect_type(b, inst, o, inst.type, "operand");
        break;
      case Opcode::IAdd: case Opcode::ISub: case Opcode::IMul: case Opcode::SDiv:
        if (!inst.type.is_int()) report(b, &inst, "integer operation with non-integer type");
        for (const auto& o : ops) expect_type(b, inst, o, inst.type, "operand");
        break;
      case Opcode::ICmp: case Opcode::FCmp: {
        IrType t = inst.arg_types.at(0);
        bool pred_ok = inst.op == Opcode::ICmp ? inst.pred <= Predicate::Sge : inst.pred >= Predicate::Oeq;
        if (!pred_ok) report(b, &inst, "predicate does not match comparison kind");
        if (inst.op == Opcode::FCmp ? !t.is_float() : t.is_float())
          report(b, &inst, "comparison operand type does not match comparison kind");
        for (const auto& o : ops) expect_type(b, inst, o, t, "operand");
        break;
      }
      case Opcode::Select:
        expect_type(b, inst, ops[0], TypeKind::I1, "select condition");
        expect_type(b, inst, ops[1], inst.type, "select operand");
        expect_type(b, inst, ops[2], inst.type, "select operand");
        break;
      case Opcode::Phi:
        for (const auto& o : ops) expect_type(b, inst, o, inst.type, "phi operand");
        break;
      case Opcode::CondBr:
        expect_type(b, inst, ops[0], TypeKind::I1, "condbr condition");
        break;
      case Opcode::Ret:
        if (inst.type != f_.ret_type) report(b, &inst, "return type does not match function");
        if (!ops.empty()) expect_type(b, inst, ops[0], inst.type, "return value");
        break;
      case Opcode::Call: {
        if (inst.callee == kAutodiffIntrinsic) {
          if (ops.empty() || !ops[0].is_global() || !m_.find_function(ops[0].name))
            report(b, &inst, "__enzyme_autodiff needs a function as first argument");
          break;
        }
        const IrFunction* callee = m_.find_function(inst.callee);
        if (!callee) {
          report(b, &inst, "call to unknown function @" + inst.callee);
          break;
        }
        if (callee->params.size() != ops.size()) {
          report(b, &inst, "call to @" + inst.callee + " has wrong argument count");
          break;
        }
        if (callee->ret_type != inst.type) report(b, &inst, "call result type does not match @" + inst.callee);
        for (size_t i = 0; i < ops.size(); ++i) {
          if (inst.arg_types[i] != callee->params[i].type)
            report(b, &inst, "argument " + std::to_string(i) + " type does not match @" + inst.callee);
          expect_type(b, inst, ops[i], inst.arg_types[i], "call argument");
        }
        break;
      }
      case Opcode::CallInd:
        expect_type(b, inst, ops[0], TypeKind::Ptr, "indirect callee");
        for (size_t i = 1; i < ops.size(); ++i) expect_type(b, inst, ops[i], inst.arg_types[i], "call argument");
        break;
      case Opcode::Alloc:
        expect_type(b, inst, ops[0], TypeKind::I64, "allocation size");
        break;
      case Opcode::Free:
        expect_type(b, inst, ops[0], TypeKind::Ptr, "freed pointer");
        break;
      case Opcode::Load:
        expect_type(b, inst, ops[0], TypeKind::Ptr, "load address");
        break;
      case Opcode::Store:
        expect_type(b, inst, ops[0], inst.type, "stored value");
        expect_type(b, inst, ops[1], TypeKind::Ptr, "store address");
        break;
      case Opcode::Memcpy:
        expect_type(b, inst, ops[0], TypeKind::Ptr, "memcpy destination");
        expect_type(b, inst, ops[1], TypeKind::Ptr, "memcpy source");
        expect_type(b, inst, ops[2], TypeKind::I64, "memcpy size");
        break;
      case Opcode::PtrAdd:
        expect_type(b, inst, ops[0], TypeKind::Ptr, "ptradd base");
        expect_type(b, inst, ops[1], TypeKind::I64, "ptradd offset");
        break;
      case Opcode::SIToFP:
        if (!inst.type.is_float()) report(b, &inst, "sitofp must produce a float type");
        if (auto t = type_of(ops[0]); t && !t->is_int()) report(b, &inst, "sitofp operand must be an integer");
        break;
      case Opcode::Br:
        break;
    }
  }

  const IrModule& m_;
  const IrFunction& f_;
  std::vector<Diagnostic>& out_;
  std::map<std::string, IrType> types_;
};

}  // namespace

std::vector<Diagnostic> validate(const IrModule& m) {
  std::vector<Diagnostic> out;
  std::set<std::string> symbols;
  for (const auto& f : m.functions)
    if (!symbols.insert(f.name).second) out.push_back({f.name, "", 0, "duplicate function"});
  for (const auto& g : m.globals) {
    if (!symbols.insert(g.name).second) out.push_back({g.name, "", 0, "duplicate symbol"});
    for (const auto& e : g.elems)
      if (e.value.is_global() && !m.find_function(e.value.name))
        out.push_back({g.name, "", 0, "global initializer references unknown function @" + e.value.name});
  }
  for (const auto& [fn, ca] : m.custom_adjoints) {
    for (const auto* n : {&fn, &ca.augmented, &ca.gradient})
      if (!m.find_function(*n)) out.push_back({fn, "", 0, "custom_adjoint references unknown function @" + *n});
  }
  for (const auto& f : m.functions) {
    if (f.is_declaration) continue;
    FunctionValidator(m, f, out).run();
  }
  return out;
}

void validate_or_throw(const IrModule& m) {
  auto diags = validate(m);
  if (diags.empty()) return;
  std::string msg;
  for (const auto& d : diags) msg += (msg.empty() ? "" : "\n") + d.to_string();
  throw Error(ErrorCode::Validation, msg);
}

}  // namespace adjointc
