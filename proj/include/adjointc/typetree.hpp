// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "adjointc/error.hpp"
#include "adjointc/ir.hpp"

namespace adjointc {

enum class BaseType : uint8_t { Unknown, Float64, Float32, Integer, Pointer };

std::string_view base_type_name(BaseType t);
BaseType base_type_of(IrType t);
bool is_float_base(BaseType t);
/// Bytes covered by one element of the kind, used for overlap checks.
int64_t base_type_span(BaseType t);

/// Path component meaning "every offset".
inline constexpr int64_t kAnyOffset = -1;
inline constexpr size_t kMaxPathDepth = 6;
/// Offsets beyond this are dropped; bounds pointer-increment chains.
inline constexpr int64_t kMaxTrackedOffset = 1 << 12;

using TypePath = std::vector<int64_t>;

std::string path_string(const TypePath& p);

/// Thrown by TypeTree when two concrete kinds meet at overlapping bytes.
struct TreeConflict {
  TypePath path;
  BaseType existing;
  BaseType incoming;
};

/// Map from byte-offset paths to the kind of data found there. The empty path
/// describes the value itself; a non-empty path requires its prefix to be a
/// Pointer and describes the pointee.
class TypeTree {
 public:
  TypeTree() = default;
  static TypeTree of(BaseType root);

  /// Joins `t` at `path`. Returns true when the tree changed.
  bool insert(const TypePath& path, BaseType t);
  bool merge(const TypeTree& other);

  /// Kind at `path`, consulting ⋆ entries for concrete offsets.
  BaseType at(const TypePath& path) const;
  /// Kind found at byte `offset` of the pointee (looks through ⋆).
  BaseType pointee_at(int64_t offset) const { return at({offset}); }

  /// Subtree below pointee offset `offset`; ⋆ entries match every offset.
  TypeTree pointee(int64_t offset) const;
  /// Tree of a pointer to a value with tree `inner`, placed at `offset`.
  static TypeTree pointer_to(const TypeTree& inner, int64_t offset);
  /// Pointee offsets shifted by `delta` (the tree of `p + delta` viewed from p's tree).
  TypeTree shifted(int64_t delta) const;
  /// Pointee offsets collapsed to ⋆, dropping kinds that disagree.
  TypeTree collapsed() const;
  /// Pointee restricted to offsets in [0, size).
  TypeTree pointee_window(int64_t size) const;

  bool empty() const { return entries_.empty(); }
  BaseType root() const { return at({}); }
  bool has_float() const;
  const std::map<TypePath, BaseType>& entries() const { return entries_; }
  std::string str() const;

  friend bool operator==(const TypeTree&, const TypeTree&) = default;

 private:
  std::map<TypePath, BaseType> entries_;
};

/// Results of interprocedural type analysis.
struct TypeEnv {
  std::map<std::string, std::map<std::string, TypeTree>> values;  // fn -> value -> tree
  std::map<std::string, std::vector<TypeTree>> params;            // context-insensitive summaries
  std::map<std::string, TypeTree> returns;
  int iterations = 0;

  friend bool operator==(const TypeEnv&, const TypeEnv&) = default;
};

inline constexpr int kTypeIterationCap = 1000;

TypeEnv seed_from_tbaa(const IrModule& m);
/// Runs transfer rules to the least fixed point. Throws Error(TypeConflict).
void propagate(TypeEnv& env, const IrModule& m);
TypeEnv analyze_types(const IrModule& m);

/// Final tree of `value` in `fn`. Literal spellings are accepted. Throws
/// Error(InvalidArgument) for unknown values.
TypeTree query(const TypeEnv& env, const IrModule& m, std::string_view fn, std::string_view value);

/// `%v: {...}` lines for every value of every defined function.
std::string dump_types(const TypeEnv& env, const IrModule& m);

}  // namespace adjointc
