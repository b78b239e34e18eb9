// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace adjointc {

enum class TypeKind : uint8_t { Void, F64, F32, I1, I32, I64, Ptr };

/// A first-class IR type. `Ptr` is opaque: it carries no pointee type.
struct IrType {
  TypeKind kind = TypeKind::Void;

  constexpr IrType() = default;
  constexpr IrType(TypeKind k) : kind(k) {}  // NOLINT(google-explicit-constructor)

  bool is_void() const { return kind == TypeKind::Void; }
  bool is_float() const { return kind == TypeKind::F64 || kind == TypeKind::F32; }
  bool is_int() const {
    return kind == TypeKind::I1 || kind == TypeKind::I32 || kind == TypeKind::I64;
  }
  bool is_ptr() const { return kind == TypeKind::Ptr; }
  /// Byte width of a value of this type in memory (i1 occupies one byte).
  int64_t size() const;

  friend bool operator==(IrType a, IrType b) { return a.kind == b.kind; }
  friend bool operator!=(IrType a, IrType b) { return a.kind != b.kind; }
};

std::string_view type_name(IrType t);
std::optional<IrType> parse_type(std::string_view s);

enum class Opcode : uint8_t {
  FAdd, FSub, FMul, FDiv, FNeg,
  IAdd, ISub, IMul, SDiv,
  ICmp, FCmp, Select, Phi,
  Br, CondBr, Ret,
  Call, CallInd,
  Alloc, Free, Load, Store, Memcpy, PtrAdd, SIToFP,
  Pow, Sin, Cos, Exp, Log, Sqrt, Fabs, Read,
};

std::string_view opcode_name(Opcode op);
std::optional<Opcode> parse_opcode(std::string_view s);

bool is_terminator(Opcode op);
/// No side effects, no memory access; result depends only on operands.
bool is_pure(Opcode op);
bool is_float_intrinsic(Opcode op);

enum class Predicate : uint8_t {
  None,
  Eq, Ne, Slt, Sle, Sgt, Sge,       // icmp
  Oeq, One, Olt, Ole, Ogt, Oge,     // fcmp
};

std::string_view predicate_name(Predicate p);
std::optional<Predicate> parse_predicate(std::string_view s);

enum class TbaaBase : uint8_t { Double, Float, Int, Ptr, Any };

std::string_view tbaa_name(TbaaBase b);
std::optional<TbaaBase> parse_tbaa(std::string_view s);

/// Activity tokens used by `__enzyme_autodiff` call sites and activity specs.
enum class ActivityToken : uint8_t { Active, Dup, DupNoNeed, Const };

std::string_view token_name(ActivityToken t);
std::optional<ActivityToken> parse_token(std::string_view s);

/// Instruction flags. `Tape` marks cache storage traffic written by synthesis,
/// `Ctl` marks control records (trip counts, predecessor ids, stack headers).
enum InstFlag : uint32_t {
  kFlagNone = 0,
  kFlagTape = 1u << 0,
  kFlagCtl = 1u << 1,
};

struct Operand {
  enum class Kind : uint8_t { Local, Global, Int, Float, Null };
  Kind kind = Kind::Local;
  std::string name;  // Local / Global
  int64_t ival = 0;
  double fval = 0.0;

  static Operand local(std::string n) { return {Kind::Local, std::move(n), 0, 0.0}; }
  static Operand global(std::string n) { return {Kind::Global, std::move(n), 0, 0.0}; }
  static Operand int_lit(int64_t v) { return {Kind::Int, {}, v, static_cast<double>(v)}; }
  static Operand float_lit(double v) { return {Kind::Float, {}, static_cast<int64_t>(v), v}; }
  static Operand null() { return {Kind::Null, {}, 0, 0.0}; }

  bool is_local() const { return kind == Kind::Local; }
  bool is_global() const { return kind == Kind::Global; }
  bool is_literal() const { return kind == Kind::Int || kind == Kind::Float || kind == Kind::Null; }
  /// Literal value interpreted as a float regardless of spelling.
  double as_float() const { return kind == Kind::Float ? fval : static_cast<double>(ival); }
  int64_t as_int() const { return kind == Kind::Int ? ival : static_cast<int64_t>(fval); }

  friend bool operator==(const Operand& a, const Operand& b);
};

struct Instruction {
  std::string result;  // empty when the instruction produces no value
  Opcode op = Opcode::Ret;
  IrType type;         // result type; for store/ret the stored/returned type
  Predicate pred = Predicate::None;
  std::vector<Operand> operands;
  std::vector<std::string> labels;    // branch targets / phi incoming blocks
  std::vector<IrType> arg_types;      // call / callind argument types
  std::vector<std::optional<ActivityToken>> arg_tokens;  // __enzyme_autodiff only
  std::string callee;                 // direct calls
  std::optional<TbaaBase> tbaa;
  uint32_t flags = kFlagNone;
  int line = 0;  // source line when parsed; not part of equality

  bool has_result() const { return !result.empty(); }
  friend bool operator==(const Instruction& a, const Instruction& b);
};

struct Param {
  std::string name;
  IrType type;
  bool noalias = false;
  bool readonly = false;
  friend bool operator==(const Param&, const Param&) = default;
};

struct BasicBlock {
  std::string label;
  std::vector<Instruction> insts;

  const Instruction& terminator() const { return insts.back(); }
  Instruction& terminator() { return insts.back(); }
  friend bool operator==(const BasicBlock&, const BasicBlock&) = default;
};

struct IrFunction {
  std::string name;
  IrType ret_type;
  std::vector<Param> params;
  std::vector<BasicBlock> blocks;
  bool is_declaration = false;
  bool fast = false;      // float algebraic simplification allowed
  bool readonly = false;  // declared to write no memory

  const BasicBlock* find_block(std::string_view label) const;
  BasicBlock* find_block(std::string_view label);
  std::optional<size_t> param_index(std::string_view name) const;
  size_t instruction_count() const;
  friend bool operator==(const IrFunction&, const IrFunction&) = default;
};

struct GlobalElem {
  IrType type;
  Operand value;  // literal, or Global for a function address
  friend bool operator==(const GlobalElem&, const GlobalElem&) = default;
};

struct Global {
  std::string name;
  std::vector<GlobalElem> elems;
  int64_t byte_size() const;
  friend bool operator==(const Global&, const Global&) = default;
};

struct CustomAdjoint {
  std::string augmented;
  std::string gradient;
  friend bool operator==(const CustomAdjoint&, const CustomAdjoint&) = default;
};

struct IrModule {
  std::vector<IrFunction> functions;
  std::vector<Global> globals;
  std::map<std::string, CustomAdjoint> custom_adjoints;

  const IrFunction* find_function(std::string_view name) const;
  IrFunction* find_function(std::string_view name);
  const Global* find_global(std::string_view name) const;
  friend bool operator==(const IrModule&, const IrModule&) = default;
};

/// Name of the call target expanded by `expand_autodiff_intrinsics`.
inline constexpr std::string_view kAutodiffIntrinsic = "__enzyme_autodiff";

}  // namespace adjointc
