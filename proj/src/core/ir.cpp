// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include "adjointc/ir.hpp"

#include <array>
#include <cstring>
#include <utility>

#include "adjointc/error.hpp"

namespace adjointc {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Parse: return "ParseError";
    case ErrorCode::Validation: return "ValidationError";
    case ErrorCode::TypeConflict: return "TypeConflict";
    case ErrorCode::Unsupported: return "UnsupportedConstruct";
    case ErrorCode::MissingDefinition: return "MissingDefinition";
    case ErrorCode::SignatureMismatch: return "SignatureMismatch";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Runtime: return "RuntimeError";
    case ErrorCode::Io: return "IoError";
  }
  return "Error";
}

int64_t IrType::size() const {
  switch (kind) {
    case TypeKind::F64: case TypeKind::I64: case TypeKind::Ptr: return 8;
    case TypeKind::F32: case TypeKind::I32: return 4;
    case TypeKind::I1: return 1;
    case TypeKind::Void: return 0;
  }
  return 0;
}

namespace {

constexpr std::array<std::pair<TypeKind, std::string_view>, 7> kTypes{{
    {TypeKind::Void, "void"}, {TypeKind::F64, "f64"}, {TypeKind::F32, "f32"},
    {TypeKind::I1, "i1"},     {TypeKind::I32, "i32"}, {TypeKind::I64, "i64"},
    {TypeKind::Ptr, "ptr"},
}};

constexpr std::array<std::pair<Opcode, std::string_view>, 33> kOpcodes{{
    {Opcode::FAdd, "fadd"},     {Opcode::FSub, "fsub"},     {Opcode::FMul, "fmul"},
    {Opcode::FDiv, "fdiv"},     {Opcode::FNeg, "fneg"},     {Opcode::IAdd, "iadd"},
    {Opcode::ISub, "isub"},     {Opcode::IMul, "imul"},     {Opcode::SDiv, "sdiv"},
    {Opcode::ICmp, "icmp"},     {Opcode::FCmp, "fcmp"},     {Opcode::Select, "select"},
    {Opcode::Phi, "phi"},       {Opcode::Br, "br"},         {Opcode::CondBr, "condbr"},
    {Opcode::Ret, "ret"},       {Opcode::Call, "call"},     {Opcode::CallInd, "callind"},
    {Opcode::Alloc, "alloc"},   {Opcode::Free, "free"},     {Opcode::Load, "load"},
    {Opcode::Store, "store"},   {Opcode::Memcpy, "memcpy"}, {Opcode::PtrAdd, "ptradd"},
    {Opcode::SIToFP, "sitofp"}, {Opcode::Pow, "pow"},       {Opcode::Sin, "sin"},
    {Opcode::Cos, "cos"},       {Opcode::Exp, "exp"},       {Opcode::Log, "log"},
    {Opcode::Sqrt, "sqrt"},     {Opcode::Fabs, "fabs"},     {Opcode::Read, "read"},
}};

constexpr std::array<std::pair<Predicate, std::string_view>, 12> kPreds{{
    {Predicate::Eq, "eq"},   {Predicate::Ne, "ne"},   {Predicate::Slt, "slt"},
    {Predicate::Sle, "sle"}, {Predicate::Sgt, "sgt"}, {Predicate::Sge, "sge"},
    {Predicate::Oeq, "oeq"}, {Predicate::One, "one"}, {Predicate::Olt, "olt"},
    {Predicate::Ole, "ole"}, {Predicate::Ogt, "ogt"}, {Predicate::Oge, "oge"},
}};

constexpr std::array<std::pair<TbaaBase, std::string_view>, 5> kTbaa{{
    {TbaaBase::Double, "double"}, {TbaaBase::Float, "float"}, {TbaaBase::Int, "int"},
    {TbaaBase::Ptr, "ptr"},       {TbaaBase::Any, "any"},
}};

constexpr std::array<std::pair<ActivityToken, std::string_view>, 4> kTokens{{
    {ActivityToken::Active, "active"}, {ActivityToken::Dup, "dup"},
    {ActivityToken::DupNoNeed, "dupnoneed"}, {ActivityToken::Const, "const"},
}};

template <typename E, size_t N>
std::string_view lookup_name(const std::array<std::pair<E, std::string_view>, N>& table, E e) {
  for (const auto& [k, v] : table)
    if (k == e) return v;
  return "?";
}

template <typename E, size_t N>
std::optional<E> lookup_value(const std::array<std::pair<E, std::string_view>, N>& table,
                              std::string_view s) {
  for (const auto& [k, v] : table)
    if (v == s) return k;
  return std::nullopt;
}

}  // namespace

std::string_view type_name(IrType t) { return lookup_name(kTypes, t.kind); }
std::optional<IrType> parse_type(std::string_view s) {
  auto k = lookup_value(kTypes, s);
  if (!k) return std::nullopt;
  return IrType(*k);
}

std::string_view opcode_name(Opcode op) { return lookup_name(kOpcodes, op); }
std::optional<Opcode> parse_opcode(std::string_view s) { return lookup_value(kOpcodes, s); }

std::string_view predicate_name(Predicate p) { return lookup_name(kPreds, p); }
std::optional<Predicate> parse_predicate(std::string_view s) { return lookup_value(kPreds, s); }

std::string_view tbaa_name(TbaaBase b) { return lookup_name(kTbaa, b); }
std::optional<TbaaBase> parse_tbaa(std::string_view s) { return lookup_value(kTbaa, s); }

std::string_view token_name(ActivityToken t) { return lookup_name(kTokens, t); }
std::optional<ActivityToken> parse_token(std::string_view s) { return lookup_value(kTokens, s); }

bool is_terminator(Opcode op) {
  return op == Opcode::Br || op == Opcode::CondBr || op == Opcode::Ret;
}

bool is_pure(Opcode op) {
  switch (op) {
    case Opcode::FAdd: case Opcode::FSub: case Opcode::FMul: case Opcode::FDiv:
    case Opcode::FNeg: case Opcode::IAdd: case Opcode::ISub: case Opcode::IMul:
    case Opcode::ICmp: case Opcode::FCmp: case Opcode::Select: case Opcode::PtrAdd:
    case Opcode::SIToFP: case Opcode::Pow: case Opcode::Sin: case Opcode::Cos:
    case Opcode::Exp: case Opcode::Log: case Opcode::Sqrt: case Opcode::Fabs:
      return true;
    default:
      // sdiv traps on zero, so it is not freely movable.
      return false;
  }
}

bool is_float_intrinsic(Opcode op) {
  switch (op) {
    case Opcode::Pow: case Opcode::Sin: case Opcode::Cos: case Opcode::Exp:
    case Opcode::Log: case Opcode::Sqrt: case Opcode::Fabs: case Opcode::Read:
      return true;
    default:
      return false;
  }
}

bool operator==(const Operand& a, const Operand& b) {
  if (a.kind != b.kind) return false;
  switch (a.kind) {
    case Operand::Kind::Local:
    case Operand::Kind::Global: return a.name == b.name;
    case Operand::Kind::Int: return a.ival == b.ival;
    case Operand::Kind::Float:
      return std::memcmp(&a.fval, &b.fval, sizeof(double)) == 0;
    case Operand::Kind::Null: return true;
  }
  return false;
}

bool operator==(const Instruction& a, const Instruction& b) {
  return a.result == b.result && a.op == b.op && a.type == b.type && a.pred == b.pred &&
         a.operands == b.operands && a.labels == b.labels && a.arg_types == b.arg_types &&
         a.arg_tokens == b.arg_tokens && a.callee == b.callee && a.tbaa == b.tbaa &&
         a.flags == b.flags;
}

const BasicBlock* IrFunction::find_block(std::string_view label) const {
  for (const auto& b : blocks)
    if (b.label == label) return &b;
  return nullptr;
}

BasicBlock* IrFunction::find_block(std::string_view label) {
  for (auto& b : blocks)
    if (b.label == label) return &b;
  return nullptr;
}

std::optional<size_t> IrFunction::param_index(std::string_view n) const {
  for (size_t i = 0; i < params.size(); ++i)
    if (params[i].name == n) return i;
  return std::nullopt;
}

size_t IrFunction::instruction_count() const {
  size_t n = 0;
  for (const auto& b : blocks) n += b.insts.size();
  return n;
}

int64_t Global::byte_size() const {
  int64_t n = 0;
  for (const auto& e : elems) n += e.type.size();
  return n;
}

const IrFunction* IrModule::find_function(std::string_view name) const {
  for (const auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

IrFunction* IrModule::find_function(std::string_view name) {
  for (auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

const Global* IrModule::find_global(std::string_view name) const {
  for (const auto& g : globals)
    if (g.name == name) return &g;
  return nullptr;
}

}  // namespace adjointc
