// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include "adjointc/activity.hpp"

#include <sstream>

#include "adjointc/alias.hpp"
#include "adjointc/error.hpp"

namespace adjointc {

ActivitySpec ActivitySpec::canonical(const IrFunction& f) {
  ActivitySpec s;
  for (const auto& p : f.params) {
    if (p.type.is_float()) s.params.push_back(ActivityToken::Active);
    else if (p.type.is_ptr()) s.params.push_back(ActivityToken::Dup);
    else s.params.push_back(ActivityToken::Const);
  }
  s.active_return = f.ret_type.is_float();
  return s;
}

ActivitySpec ActivitySpec::parse(const IrFunction& f, const std::string& tokens, bool active_return) {
  ActivitySpec s;
  std::stringstream ss(tokens);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto t = parse_token(tok);
    if (!t) throw Error(ErrorCode::InvalidArgument, "unknown activity token '" + tok + "'");
    s.params.push_back(*t);
  }
  s.active_return = active_return;
  check_spec(f, s);
  return s;
}

std::string ActivitySpec::key() const {
  std::string k;
  for (auto t : params) {
    switch (t) {
      case ActivityToken::Active: k += 'a'; break;
      case ActivityToken::Dup: k += 'd'; break;
      case ActivityToken::DupNoNeed: k += 'n'; break;
      case ActivityToken::Const: k += 'c'; break;
    }
  }
  return k + (active_return ? "_a" : "_c");
}

void check_spec(const IrFunction& f, const ActivitySpec& spec) {
  if (spec.params.size() != f.params.size())
    throw Error(ErrorCode::InvalidArgument, "@" + f.name + " takes " + std::to_string(f.params.size()) +
                                                " parameters but " + std::to_string(spec.params.size()) +
                                                " activity tokens were given");
  for (size_t i = 0; i < f.params.size(); ++i) {
    auto t = spec.params[i];
    IrType ty = f.params[i].type;
    bool ok = t == ActivityToken::Const || (t == ActivityToken::Active && ty.is_float()) ||
              ((t == ActivityToken::Dup || t == ActivityToken::DupNoNeed) && ty.is_ptr());
    if (!ok)
      throw Error(ErrorCode::InvalidArgument, "activity token " + std::string(token_name(t)) +
                                                  " is not valid for parameter %" + f.params[i].name +
                                                  " of type " + std::string(type_name(ty)));
  }
  if (spec.active_return && !f.ret_type.is_float())
    throw Error(ErrorCode::InvalidArgument, "@" + f.name + " has no float return to differentiate");
}

std::string instruction_id(const BasicBlock& b, size_t index) {
  const Instruction& inst = b.insts[index];
  return inst.has_result() ? inst.result : b.label + ":" + std::to_string(index);
}

namespace {

class ActivityAnalyzer {
 public:
  ActivityAnalyzer(const IrModule& m, const IrFunction& f, const ActivitySpec& spec, const TypeEnv& env)
      : m_(m), f_(f), spec_(spec), aa_(m, f, &env) {}

  ActivityInfo run() {
    for (size_t i = 0; i < f_.params.size(); ++i) {
      auto t = spec_.params[i];
      if (t == ActivityToken::Active) fwd_.insert(f_.params[i].name);
      if (t == ActivityToken::Dup || t == ActivityToken::DupNoNeed) shadow_.insert(f_.params[i].name);
    }
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& b : f_.blocks)
        for (const auto& inst : b.insts) changed |= forward(inst);
    }
    changed = true;
    while (changed) {
      changed = false;
      for (const auto& b : f_.blocks)
        for (const auto& inst : b.insts) changed |= backward(inst);
    }
    ActivityInfo info;
    for (const auto& v : fwd_)
      if (demand_.count(v)) info.active_values.insert(v);
    info.shadowed = shadow_;
    for (const auto& b : f_.blocks)
      for (size_t i = 0; i < b.insts.size(); ++i)
        if (instruction_active(b.insts[i], info)) info.active_instructions.insert(instruction_id(b, i));
    return info;
  }

 private:
  bool F(const Operand& o) const { return o.is_local() && fwd_.count(o.name); }
  bool S(const Operand& o) const { return o.is_local() && shadow_.count(o.name); }

  bool can_shadow(const Operand& o) const {
    if (!o.is_local()) return false;
    PointerRoot r = aa_.root(o);
    if (r.kind == PointerRoot::Kind::Param) {
      auto t = spec_.params[*f_.param_index(r.name)];
      return t == ActivityToken::Dup || t == ActivityToken::DupNoNeed;
    }
    return r.kind != PointerRoot::Kind::Global;
  }

  bool add_shadow(const Operand& o) {
    if (!can_shadow(o)) return false;
    return shadow_.insert(o.name).second;
  }
  bool add_fwd(const Instruction& inst) { return fwd_.insert(inst.result).second; }
  bool add_demand(const Operand& o) { return o.is_local() && demand_.insert(o.name).second; }

  bool callee_readonly(const Instruction& inst) const {
    if (inst.op != Opcode::Call) return false;
    const IrFunction* c = m_.find_function(inst.callee);
    return c && c->readonly;
  }

  bool call_touches_active(const Instruction& inst) const {
    size_t first = inst.op == Opcode::CallInd ? 1 : 0;
    for (size_t i = first; i < inst.operands.size(); ++i) {
      if (inst.arg_types[i].is_float() && F(inst.operands[i])) return true;
      if (inst.arg_types[i].is_ptr() && S(inst.operands[i])) return true;
    }
    return false;
  }

  bool forward(const Instruction& inst) {
    const auto& ops = inst.operands;
    bool ch = false;
    switch (inst.op) {
      case Opcode::FAdd: case Opcode::FSub: case Opcode::FMul: case Opcode::FDiv: case Opcode::FNeg:
      case Opcode::Pow: case Opcode::Sin: case Opcode::Cos: case Opcode::Exp: case Opcode::Log:
      case Opcode::Sqrt: case Opcode::Fabs:
        for (const auto& o : ops)
          if (F(o)) ch |= add_fwd(inst);
        break;
      case Opcode::Select:
      case Opcode::Phi: {
        size_t first = inst.op == Opcode::Select ? 1 : 0;
        if (inst.type.is_float()) {
          for (size_t i = first; i < ops.size(); ++i)
            if (F(ops[i])) ch |= add_fwd(inst);
        } else if (inst.type.is_ptr()) {
          bool any = S(Operand::local(inst.result));
          for (size_t i = first; i < ops.size(); ++i) any |= S(ops[i]);
          if (any) {
            ch |= shadow_.insert(inst.result).second;
            for (size_t i = first; i < ops.size(); ++i) ch |= add_shadow(ops[i]);
          }
        }
        break;
      }
      case Opcode::PtrAdd:
        if (S(ops[0])) ch |= shadow_.insert(inst.result).second;
        if (S(Operand::local(inst.result))) ch |= add_shadow(ops[0]);
        break;
      case Opcode::Load:
        if (inst.type.is_float() && S(ops[0])) ch |= add_fwd(inst);
        if (inst.type.is_ptr()) {
          if (S(ops[0])) ch |= shadow_.insert(inst.result).second;
          if (S(Operand::local(inst.result))) ch |= add_shadow(ops[0]);
        }
        break;
      case Opcode::Store:
        if (inst.type.is_float() && F(ops[0])) ch |= add_shadow(ops[1]);
        if (inst.type.is_ptr()) {
          if (S(ops[0])) ch |= add_shadow(ops[1]);
          if (S(ops[1])) ch |= add_shadow(ops[0]);
        }
        break;
      case Opcode::Memcpy:
        if (S(ops[1])) ch |= add_shadow(ops[0]);
        if (S(ops[0])) ch |= add_shadow(ops[1]);
        break;
      case Opcode::Call:
      case Opcode::CallInd: {
        if (inst.op == Opcode::Call && inst.callee == kAutodiffIntrinsic) break;
        if (!call_touches_active(inst)) break;
        if (inst.type.is_float()) ch |= add_fwd(inst);
        if (inst.type.is_ptr()) ch |= shadow_.insert(inst.result).second;
        if (!callee_readonly(inst)) {
          size_t first = inst.op == Opcode::CallInd ? 1 : 0;
          for (size_t i = first; i < ops.size(); ++i)
            if (inst.arg_types[i].is_ptr()) ch |= add_shadow(ops[i]);
        }
        break;
      }
      default:
        break;
    }
    return ch;
  }

  bool backward(const Instruction& inst) {
    const auto& ops = inst.operands;
    bool ch = false;
    bool demanded = inst.has_result() && demand_.count(inst.result);
    switch (inst.op) {
      case Opcode::Ret:
        if (spec_.active_return && !ops.empty() && inst.type.is_float()) ch |= add_demand(ops[0]);
        break;
      case Opcode::Store:
        if (inst.type.is_float() && S(ops[1])) ch |= add_demand(ops[0]);
        break;
      case Opcode::FAdd: case Opcode::FSub: case Opcode::FMul: case Opcode::FDiv: case Opcode::FNeg:
      case Opcode::Pow: case Opcode::Sin: case Opcode::Cos: case Opcode::Exp: case Opcode::Log:
      case Opcode::Sqrt: case Opcode::Fabs:
        if (demanded)
          for (const auto& o : ops) ch |= add_demand(o);
        break;
      case Opcode::Select:
      case Opcode::Phi:
        if (demanded && inst.type.is_float())
          for (size_t i = inst.op == Opcode::Select ? 1 : 0; i < ops.size(); ++i) ch |= add_demand(ops[i]);
        break;
      case Opcode::Call:
      case Opcode::CallInd: {
        if (inst.op == Opcode::Call && inst.callee == kAutodiffIntrinsic) break;
        bool writes_shadow = false;
        size_t first = inst.op == Opcode::CallInd ? 1 : 0;
        if (!callee_readonly(inst))
          for (size_t i = first; i < ops.size(); ++i)
            writes_shadow |= inst.arg_types[i].is_ptr() && S(ops[i]);
        if (demanded || writes_shadow)
          for (size_t i = first; i < ops.size(); ++i)
            if (inst.arg_types[i].is_float()) ch |= add_demand(ops[i]);
        break;
      }
      default:
        break;
    }
    return ch;
  }

  bool instruction_active(const Instruction& inst, const ActivityInfo& info) const {
    const auto& ops = inst.operands;
    switch (inst.op) {
      case Opcode::Store:
        return inst.type.is_float() && S(ops[1]);
      case Opcode::Memcpy:
        return S(ops[0]) || S(ops[1]);
      case Opcode::Call:
      case Opcode::CallInd: {
        if (inst.op == Opcode::Call && inst.callee == kAutodiffIntrinsic) return false;
        if (inst.has_result() && info.is_active(inst.result)) return true;
        if (callee_readonly(inst)) return false;
        size_t first = inst.op == Opcode::CallInd ? 1 : 0;
        for (size_t i = first; i < ops.size(); ++i)
          if (inst.arg_types[i].is_ptr() && S(ops[i])) return true;
        return false;
      }
      default:
        return inst.has_result() && info.is_active(inst.result);
    }
  }

  const IrModule& m_;
  const IrFunction& f_;
  const ActivitySpec& spec_;
  AliasAnalysis aa_;
  std::set<std::string> fwd_, demand_, shadow_;
};

}  // namespace

ActivityInfo analyze_activity(const IrModule& m, const std::string& fn, const ActivitySpec& spec,
                              const TypeEnv& env) {
  const IrFunction* f = m.find_function(fn);
  if (!f) throw Error(ErrorCode::InvalidArgument, "unknown function @" + fn);
  if (f->is_declaration) throw Error(ErrorCode::MissingDefinition, "@" + fn + " has no body");
  check_spec(*f, spec);
  return ActivityAnalyzer(m, *f, spec, env).run();
}

std::string dump_activity(const ActivityInfo& info) {
  std::ostringstream os;
  auto list = [&](const char* title, const std::set<std::string>& s) {
    os << title << ":";
    for (const auto& v : s) os << " " << (v.find(':') == std::string::npos ? "%" : "") << v;
    os << "\n";
  };
  list("active values", info.active_values);
  list("shadowed pointers", info.shadowed);
  list("active instructions", info.active_instructions);
  return os.str();
}

}  // namespace adjointc
