// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "adjointc/text.hpp"

namespace adjointc {

std::string format_float(double v) {
  if (std::isnan(v)) return std::signbit(v) ? "-nan" : "nan";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // Prefer the shortest spelling that round-trips.
  for (int prec = 1; prec < 17; ++prec) {
    char shorter[64];
    std::snprintf(shorter, sizeof shorter, "%.*g", prec, v);
    if (std::strtod(shorter, nullptr) == v) {
      std::snprintf(buf, sizeof buf, "%s", shorter);
      break;
    }
  }
  std::string s(buf);
  if (s.find_first_of(".en") == std::string::npos) s += ".0";
  return s;
}

namespace {

std::string operand_text(const Operand& o) {
  switch (o.kind) {
    case Operand::Kind::Local: return "%" + o.name;
    case Operand::Kind::Global: return "@" + o.name;
    case Operand::Kind::Int: return std::to_string(o.ival);
    case Operand::Kind::Float: return format_float(o.fval);
    case Operand::Kind::Null: return "null";
  }
  return "?";
}

void print_args(std::ostringstream& os, const Instruction& inst, size_t first) {
  os << "(";
  for (size_t i = first; i < inst.operands.size(); ++i) {
    if (i > first) os << ", ";
    bool has_tok = i < inst.arg_tokens.size() && inst.arg_tokens[i].has_value();
    if (has_tok) os << token_name(*inst.arg_tokens[i]) << " ";
    if (!has_tok && !inst.arg_tokens.empty() && i == 0 && inst.operands[0].is_global()) {
      os << operand_text(inst.operands[i]);
      continue;
    }
    os << type_name(inst.arg_types[i]) << " " << operand_text(inst.operands[i]);
  }
  os << ")";
}

}  // namespace

std::string print_instruction(const Instruction& inst) {
  std::ostringstream os;
  if (inst.has_result()) os << "%" << inst.result << " = ";
  os << opcode_name(inst.op);
  const auto& ops = inst.operands;
  switch (inst.op) {
    case Opcode::FAdd: case Opcode::FSub: case Opcode::FMul: case Opcode::FDiv:
    case Opcode::IAdd: case Opcode::ISub: case Opcode::IMul: case Opcode::SDiv:
    case Opcode::Pow:
      os << " " << type_name(inst.type) << " " << operand_text(ops[0]) << ", " << operand_text(ops[1]);
      break;
    case Opcode::FNeg: case Opcode::Sin: case Opcode::Cos: case Opcode::Exp:
    case Opcode::Log: case Opcode::Sqrt: case Opcode::Fabs: case Opcode::SIToFP:
    case Opcode::Load:
      os << " " << type_name(inst.type) << " " << operand_text(ops[0]);
      break;
    case Opcode::Read:
      os << " " << type_name(inst.type);
      break;
    case Opcode::ICmp: case Opcode::FCmp:
      os << " " << predicate_name(inst.pred) << " " << type_name(inst.arg_types.at(0)) << " "
         << operand_text(ops[0]) << ", " << operand_text(ops[1]);
      break;
    case Opcode::Select:
      os << " " << type_name(inst.type) << " " << operand_text(ops[0]) << ", "
         << operand_text(ops[1]) << ", " << operand_text(ops[2]);
      break;
    case Opcode::Phi:
      os << " " << type_name(inst.type);
      for (size_t i = 0; i < ops.size(); ++i)
        os << (i ? ", " : " ") << "[" << operand_text(ops[i]) << ", %" << inst.labels[i] << "]";
      break;
    case Opcode::Br:
      os << " %" << inst.labels[0];
      break;
    case Opcode::CondBr:
      os << " " << operand_text(ops[0]) << ", %" << inst.labels[0] << ", %" << inst.labels[1];
      break;
    case Opcode::Ret:
      os << " " << type_name(inst.type);
      if (!ops.empty()) os << " " << operand_text(ops[0]);
      break;
    case Opcode::Call:
      os << " " << type_name(inst.type) << " @" << inst.callee;
      print_args(os, inst, 0);
      break;
    case Opcode::CallInd:
      os << " " << type_name(inst.type) << " " << operand_text(ops[0]);
      print_args(os, inst, 1);
      break;
    case Opcode::Alloc: case Opcode::Free:
      os << " " << operand_text(ops[0]);
      break;
    case Opcode::Store:
      os << " " << type_name(inst.type) << " " << operand_text(ops[0]) << ", " << operand_text(ops[1]);
      break;
    case Opcode::Memcpy:
      os << " " << operand_text(ops[0]) << ", " << operand_text(ops[1]) << ", " << operand_text(ops[2]);
      break;
    case Opcode::PtrAdd:
      os << " " << operand_text(ops[0]) << ", " << operand_text(ops[1]);
      break;
  }
  if (inst.tbaa) os << " !tbaa." << tbaa_name(*inst.tbaa);
  if (inst.flags & kFlagTape) os << " !tape";
  if (inst.flags & kFlagCtl) os << " !ctl";
  return os.str();
}

std::string print_function(const IrFunction& f) {
  std::ostringstream os;
  os << (f.is_declaration ? "declare " : "define ") << type_name(f.ret_type) << " @" << f.name << "(";
  for (size_t i = 0; i < f.params.size(); ++i) {
    const Param& p = f.params[i];
    if (i) os << ", ";
    os << type_name(p.type) << " %" << p.name;
    if (p.noalias) os << " noalias";
    if (p.readonly) os << " readonly";
  }
  os << ")";
  if (f.fast) os << " fast";
  if (f.readonly) os << " readonly";
  if (f.is_declaration) {
    os << "\n";
    return os.str();
  }
  os << " {\n";
  for (const auto& b : f.blocks) {
    os << b.label << ":\n";
    for (const auto& inst : b.insts) os << "  " << print_instruction(inst) << "\n";
  }
  os << "}\n";
  return os.str();
}

std::string print_module(const IrModule& m) {
  std::ostringstream os;
  for (const auto& g : m.globals) {
    os << "global @" << g.name << " = [";
    for (size_t i = 0; i < g.elems.size(); ++i) {
      if (i) os << ", ";
      os << type_name(g.elems[i].type) << " " << operand_text(g.elems[i].value);
    }
    os << "]\n";
  }
  for (const auto& [fn, ca] : m.custom_adjoints)
    os << "custom_adjoint @" << fn << " = (@" << ca.augmented << ", @" << ca.gradient << ")\n";
  bool first = m.globals.empty() && m.custom_adjoints.empty();
  for (const auto& f : m.functions) {
    if (!first) os << "\n";
    first = false;
    os << print_function(f);
  }
  return os.str();
}

}  // namespace adjointc
