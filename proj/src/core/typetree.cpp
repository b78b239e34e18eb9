// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include "adjointc/typetree.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "adjointc/cfg.hpp"

namespace adjointc {

std::string_view base_type_name(BaseType t) {
  switch (t) {
    case BaseType::Unknown: return "Unknown";
    case BaseType::Float64: return "Double";
    case BaseType::Float32: return "Float";
    case BaseType::Integer: return "Integer";
    case BaseType::Pointer: return "Pointer";
  }
  return "?";
}

BaseType base_type_of(IrType t) {
  switch (t.kind) {
    case TypeKind::F64: return BaseType::Float64;
    case TypeKind::F32: return BaseType::Float32;
    case TypeKind::I1: case TypeKind::I32: case TypeKind::I64: return BaseType::Integer;
    case TypeKind::Ptr: return BaseType::Pointer;
    case TypeKind::Void: return BaseType::Unknown;
  }
  return BaseType::Unknown;
}

bool is_float_base(BaseType t) { return t == BaseType::Float64 || t == BaseType::Float32; }

int64_t base_type_span(BaseType t) {
  switch (t) {
    case BaseType::Float64: case BaseType::Pointer: return 8;
    case BaseType::Float32: return 4;
    case BaseType::Integer: return 1;  // width unknown; only the first byte is claimed
    case BaseType::Unknown: return 0;
  }
  return 0;
}

std::string path_string(const TypePath& p) {
  std::string s = "[";
  for (size_t i = 0; i < p.size(); ++i) {
    if (i) s += ",";
    s += p[i] == kAnyOffset ? "*" : std::to_string(p[i]);
  }
  return s + "]";
}

TypeTree TypeTree::of(BaseType root) {
  TypeTree t;
  t.insert({}, root);
  return t;
}

namespace {

bool spans_overlap(int64_t a, BaseType ka, int64_t b, BaseType kb) {
  if (a == kAnyOffset || b == kAnyOffset) return true;
  return a < b + base_type_span(kb) && b < a + base_type_span(ka);
}

}  // namespace

bool TypeTree::insert(const TypePath& path, BaseType t) {
  if (t == BaseType::Unknown || path.size() > kMaxPathDepth) return false;
  for (int64_t o : path)
    if (o != kAnyOffset && (o < 0 || o > kMaxTrackedOffset)) return false;
  bool changed = false;
  if (!path.empty()) {
    TypePath prefix(path.begin(), path.end() - 1);
    changed |= insert(prefix, BaseType::Pointer);
  }
  auto it = entries_.find(path);
  if (it != entries_.end()) {
    if (it->second != t) throw TreeConflict{path, it->second, t};
    return changed;
  }
  if (!path.empty()) {
    const size_t depth = path.size();
    for (const auto& [p, k] : entries_) {
      if (p.size() != depth || k == t) continue;
      if (!std::equal(p.begin(), p.end() - 1, path.begin())) continue;
      if (spans_overlap(p.back(), k, path.back(), t)) throw TreeConflict{path, k, t};
    }
  }
  entries_.emplace(path, t);
  return true;
}

bool TypeTree::merge(const TypeTree& other) {
  bool changed = false;
  for (const auto& [p, k] : other.entries_) changed |= insert(p, k);
  return changed;
}

BaseType TypeTree::at(const TypePath& path) const {
  auto it = entries_.find(path);
  if (it != entries_.end()) return it->second;
  for (const auto& [p, k] : entries_) {
    if (p.size() != path.size()) continue;
    bool match = true;
    for (size_t i = 0; i < p.size() && match; ++i)
      match = p[i] == path[i] || p[i] == kAnyOffset;
    if (match) return k;
  }
  return BaseType::Unknown;
}

TypeTree TypeTree::pointee(int64_t offset) const {
  TypeTree out;
  for (const auto& [p, k] : entries_) {
    if (p.empty()) continue;
    if (p[0] != offset && p[0] != kAnyOffset && offset != kAnyOffset) continue;
    out.insert(TypePath(p.begin() + 1, p.end()), k);
  }
  return out;
}

TypeTree TypeTree::pointer_to(const TypeTree& inner, int64_t offset) {
  TypeTree out = of(BaseType::Pointer);
  for (const auto& [p, k] : inner.entries_) {
    TypePath np{offset};
    np.insert(np.end(), p.begin(), p.end());
    out.insert(np, k);
  }
  return out;
}

TypeTree TypeTree::shifted(int64_t delta) const {
  TypeTree out;
  for (const auto& [p, k] : entries_) {
    if (p.empty() || p[0] == kAnyOffset) {
      out.insert(p, k);
      continue;
    }
    TypePath np = p;
    np[0] += delta;
    if (np[0] < 0) continue;
    out.insert(np, k);
  }
  return out;
}

TypeTree TypeTree::collapsed() const {
  TypeTree out;
  for (const auto& [p, k] : entries_) {
    TypePath np = p;
    if (!np.empty()) np[0] = kAnyOffset;
    out.insert(np, k);
  }
  return out;
}

TypeTree TypeTree::pointee_window(int64_t size) const {
  TypeTree out;
  for (const auto& [p, k] : entries_) {
    if (!p.empty() && p[0] != kAnyOffset && (p[0] < 0 || p[0] >= size)) continue;
    out.insert(p, k);
  }
  return out;
}

bool TypeTree::has_float() const {
  for (const auto& [p, k] : entries_)
    if (is_float_base(k)) return true;
  return false;
}

std::string TypeTree::str() const {
  std::string s = "{";
  bool first = true;
  for (const auto& [p, k] : entries_) {
    if (!first) s += ", ";
    first = false;
    s += path_string(p) + ":" + std::string(base_type_name(k));
  }
  return s + "}";
}

// ---------------------------------------------------------------------------
// Analysis

namespace {

BaseType tbaa_base(TbaaBase b) {
  switch (b) {
    case TbaaBase::Double: return BaseType::Float64;
    case TbaaBase::Float: return BaseType::Float32;
    case TbaaBase::Int: return BaseType::Integer;
    case TbaaBase::Ptr: return BaseType::Pointer;
    case TbaaBase::Any: return BaseType::Unknown;
  }
  return BaseType::Unknown;
}

class Propagator {
 public:
  Propagator(TypeEnv& env, const IrModule& m) : env_(env), m_(m) {}

  bool sweep() {
    bool changed = false;
    for (const auto& f : m_.functions) {
      if (f.is_declaration) continue;
      fn_ = &f;
      Cfg cfg(f);
      for (size_t i = 0; i < f.params.size(); ++i) {
        changed |= update(f.params[i].name, TypeTree::of(base_type_of(f.params[i].type)));
        changed |= update(f.params[i].name, env_.params[f.name][i]);
      }
      for (int b : cfg.rpo)
        for (const auto& inst : f.blocks[b].insts) changed |= apply(inst);
      for (size_t i = 0; i < f.params.size(); ++i)
        changed |= merge_summary(env_.params[f.name][i], tree(Operand::local(f.params[i].name)), f.params[i].name);
    }
    return changed;
  }

 private:
  [[noreturn]] void conflict(const std::string& value, const TreeConflict& c) const {
    throw Error(ErrorCode::TypeConflict,
                "TypeConflict: @" + fn_->name + " %" + value + " at " + path_string(c.path) + ": " +
                    std::string(base_type_name(c.existing)) + " vs " +
                    std::string(base_type_name(c.incoming)));
  }

  bool merge_summary(TypeTree& into, const TypeTree& from, const std::string& value) {
    try {
      return into.merge(from);
    } catch (const TreeConflict& c) {
      conflict(value, c);
    }
  }

  // Pointers kept on a tape carry only their kind; following them through
  // nested (recursive) tapes would grow trees to the depth limit.
  static bool opaque_tape(const Instruction& inst) {
    return (inst.flags & kFlagTape) && inst.type == TypeKind::Ptr;
  }

  TypeTree tree(const Operand& o) const {
    if (o.is_local()) {
      auto& vals = env_.values[fn_->name];
      auto it = vals.find(o.name);
      return it == vals.end() ? TypeTree{} : it->second;
    }
    if (o.is_global()) {
      if (const Global* g = m_.find_global(o.name)) {
        TypeTree t = TypeTree::of(BaseType::Pointer);
        int64_t off = 0;
        for (const auto& e : g->elems) {
          t.insert({off}, base_type_of(e.type));
          off += e.type.size();
        }
        return t;
      }
      return TypeTree::of(BaseType::Pointer);
    }
    return {};
  }

  bool update(const Operand& o, const TypeTree& t) {
    if (!o.is_local()) return false;
    return update(o.name, t);
  }

  bool update(const std::string& name, const TypeTree& t) {
    if (t.empty()) return false;
    return merge_summary(env_.values[fn_->name][name], t, name);
  }

  bool apply(const Instruction& inst) {
    bool ch = false;
    const auto& ops = inst.operands;
    if (inst.has_result()) ch |= update(inst.result, TypeTree::of(base_type_of(inst.type)));
    auto self = [&] { return tree(Operand::local(inst.result)); };
    switch (inst.op) {
      case Opcode::Load: {
        if (opaque_tape(inst)) {
          ch |= update(ops[0], TypeTree::pointer_to(TypeTree::of(BaseType::Pointer), 0));
          break;
        }
        ch |= update(ops[0], TypeTree::pointer_to(self(), 0));
        ch |= update(inst.result, tree(ops[0]).pointee(0));
        break;
      }
      case Opcode::Store: {
        if (opaque_tape(inst)) {
          ch |= update(ops[1], TypeTree::pointer_to(TypeTree::of(BaseType::Pointer), 0));
          break;
        }
        TypeTree v = tree(ops[0]);
        v.merge(TypeTree::of(base_type_of(inst.type)));
        ch |= update(ops[1], TypeTree::pointer_to(v, 0));
        ch |= update(ops[0], tree(ops[1]).pointee(0));
        break;
      }
      case Opcode::Memcpy: {
        if (ops[2].kind == Operand::Kind::Int) {
          int64_t n = ops[2].ival;
          ch |= update(ops[0], tree(ops[1]).pointee_window(n));
          ch |= update(ops[1], tree(ops[0]).pointee_window(n));
        } else {
          ch |= update(ops[0], tree(ops[1]));
          ch |= update(ops[1], tree(ops[0]));
        }
        ch |= update(ops[2], TypeTree::of(BaseType::Integer));
        break;
      }
      case Opcode::PtrAdd: {
        ch |= update(ops[1], TypeTree::of(BaseType::Integer));
        if (ops[1].kind == Operand::Kind::Int) {
          ch |= update(inst.result, tree(ops[0]).shifted(-ops[1].ival));
          ch |= update(ops[0], self().shifted(ops[1].ival));
        } else {
          ch |= update(inst.result, tree(ops[0]).collapsed());
          ch |= update(ops[0], self().collapsed());
        }
        break;
      }
      case Opcode::Phi:
        for (const auto& o : ops) {
          ch |= update(inst.result, tree(o));
          ch |= update(o, self());
        }
        break;
      case Opcode::Select:
        ch |= update(ops[0], TypeTree::of(BaseType::Integer));
        for (size_t i = 1; i < 3; ++i) {
          ch |= update(inst.result, tree(ops[i]));
          ch |= update(ops[i], self());
        }
        break;
      case Opcode::FAdd: case Opcode::FSub: case Opcode::FMul: case Opcode::FDiv:
      case Opcode::FNeg: case Opcode::Pow: case Opcode::Sin: case Opcode::Cos:
      case Opcode::Exp: case Opcode::Log: case Opcode::Sqrt: case Opcode::Fabs:
      case Opcode::IAdd: case Opcode::ISub: case Opcode::IMul: case Opcode::SDiv:
        for (const auto& o : ops) ch |= update(o, TypeTree::of(base_type_of(inst.type)));
        break;
      case Opcode::ICmp: case Opcode::FCmp:
        for (const auto& o : ops) ch |= update(o, TypeTree::of(base_type_of(inst.arg_types[0])));
        break;
      case Opcode::SIToFP:
        ch |= update(ops[0], TypeTree::of(BaseType::Integer));
        break;
      case Opcode::CondBr:
        ch |= update(ops[0], TypeTree::of(BaseType::Integer));
        break;
      case Opcode::Alloc:
        ch |= update(ops[0], TypeTree::of(BaseType::Integer));
        break;
      case Opcode::Free:
        ch |= update(ops[0], TypeTree::of(BaseType::Pointer));
        break;
      case Opcode::Ret:
        if (!ops.empty()) {
          ch |= merge_summary(env_.returns[fn_->name], tree(ops[0]), "<return>");
          ch |= update(ops[0], TypeTree::of(base_type_of(inst.type)));
        }
        break;
      case Opcode::Call: {
        if (inst.callee == kAutodiffIntrinsic) break;
        const IrFunction* callee = m_.find_function(inst.callee);
        if (!callee) break;
        auto& summary = env_.params[callee->name];
        summary.resize(callee->params.size());
        for (size_t i = 0; i < ops.size() && i < summary.size(); ++i) {
          ch |= update(ops[i], TypeTree::of(base_type_of(inst.arg_types[i])));
          ch |= merge_summary(summary[i], tree(ops[i]), callee->params[i].name);
          ch |= update(ops[i], summary[i]);
        }
        if (inst.has_result()) ch |= update(inst.result, env_.returns[callee->name]);
        break;
      }
      case Opcode::CallInd:
        ch |= update(ops[0], TypeTree::of(BaseType::Pointer));
        for (size_t i = 1; i < ops.size(); ++i)
          ch |= update(ops[i], TypeTree::of(base_type_of(inst.arg_types[i])));
        break;
      case Opcode::Br: case Opcode::Read:
        break;
    }
    return ch;
  }

  TypeEnv& env_;
  const IrModule& m_;
  const IrFunction* fn_ = nullptr;
};

}  // namespace

TypeEnv seed_from_tbaa(const IrModule& m) {
  TypeEnv env;
  for (const auto& f : m.functions) {
    env.params[f.name].resize(f.params.size());
    env.returns[f.name];
    auto& vals = env.values[f.name];
    for (const auto& p : f.params) vals[p.name];
    for (const auto& b : f.blocks) {
      for (const auto& inst : b.insts) {
        if (inst.has_result()) vals[inst.result];
        if (!inst.tbaa) continue;
        BaseType k = tbaa_base(*inst.tbaa);
        if (k == BaseType::Unknown) continue;
        auto seed = [&](const Operand& addr, int64_t offset) {
          if (!addr.is_local()) return;
          try {
            vals[addr.name].insert({offset}, k);
          } catch (const TreeConflict& c) {
            throw Error(ErrorCode::TypeConflict, "TypeConflict: @" + f.name + " %" + addr.name + " at " +
                                                     path_string(c.path) + ": " +
                                                     std::string(base_type_name(c.existing)) + " vs " +
                                                     std::string(base_type_name(c.incoming)));
          }
        };
        switch (inst.op) {
          case Opcode::Load:
            seed(inst.operands[0], 0);
            vals[inst.result].insert({}, k);
            break;
          case Opcode::Store:
            seed(inst.operands[1], 0);
            if (inst.operands[0].is_local()) vals[inst.operands[0].name].insert({}, k);
            break;
          case Opcode::Memcpy:
            seed(inst.operands[0], kAnyOffset);
            seed(inst.operands[1], kAnyOffset);
            break;
          default:
            break;
        }
      }
    }
  }
  return env;
}

void propagate(TypeEnv& env, const IrModule& m) {
  Propagator p(env, m);
  env.iterations = 0;
  while (true) {
    ++env.iterations;
    if (!p.sweep()) break;
    if (env.iterations >= kTypeIterationCap)
      throw Error(ErrorCode::TypeConflict, "type analysis did not converge");
  }
}

TypeEnv analyze_types(const IrModule& m) {
  TypeEnv env = seed_from_tbaa(m);
  propagate(env, m);
  return env;
}

TypeTree query(const TypeEnv& env, const IrModule& m, std::string_view fn, std::string_view value) {
  if (!value.empty() && value[0] == '@') return TypeTree::of(BaseType::Pointer);
  std::string v(value.size() && value[0] == '%' ? value.substr(1) : value);
  auto fit = env.values.find(std::string(fn));
  if (fit == env.values.end() || !m.find_function(fn))
    throw Error(ErrorCode::InvalidArgument, "unknown function @" + std::string(fn));
  auto vit = fit->second.find(v);
  if (vit != fit->second.end()) return vit->second;
  if (!v.empty() && (std::isdigit(static_cast<unsigned char>(v[0])) || v[0] == '-')) {
    bool floaty = v.find_first_of(".eEn") != std::string::npos;
    return TypeTree::of(floaty ? BaseType::Float64 : BaseType::Integer);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown value %" + v + " in @" + std::string(fn));
}

std::string dump_types(const TypeEnv& env, const IrModule& m) {
  std::ostringstream os;
  for (const auto& f : m.functions) {
    if (f.is_declaration) continue;
    os << "@" << f.name << ":\n";
    auto emit = [&](const std::string& name) {
      os << "  %" << name << ": " << query(env, m, f.name, name).str() << "\n";
    };
    for (const auto& p : f.params) emit(p.name);
    for (const auto& b : f.blocks)
      for (const auto& inst : b.insts)
        if (inst.has_result()) emit(inst.result);
  }
  return os.str();
}

}  // namespace adjointc
