// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include "adjointc/interp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <memory>

#include "adjointc/error.hpp"

namespace adjointc {

namespace {

struct RtValue {
  double f = 0.0;
  int64_t i = 0;
};

struct Trap {
  std::string message;
};

constexpr uint64_t kHeapBase = 0x10000;
constexpr uint64_t kFunctionBase = 0x7f0000000000ull;
constexpr int kMaxDepth = 10000;

struct Allocation {
  uint64_t base = 0;
  int64_t size = 0;
  std::vector<uint8_t> bytes;
  std::vector<uint8_t> init;  // tracked for tape allocations only
  bool live = true;
  bool tape = false;
  bool readonly = false;
};

struct COp {
  bool slot = false;
  int idx = -1;
  RtValue v;
};

struct CInst {
  const Instruction* src = nullptr;
  Opcode op = Opcode::Ret;
  IrType type;
  IrType arg0;
  Predicate pred = Predicate::None;
  int result = -1;
  std::vector<COp> ops;
  std::vector<int> targets;  // branch targets, or phi incoming blocks
  int callee = -1;
  int key = 0;
  bool tape = false;
};

struct CBlock {
  std::vector<CInst> phis;
  std::vector<CInst> body;
};

struct CFunc {
  const IrFunction* fn = nullptr;
  int nslots = 0;
  std::vector<int> param_slots;
  std::vector<CBlock> blocks;
};

int64_t wrap_int(IrType t, int64_t v) {
  switch (t.kind) {
    case TypeKind::I1: return v & 1;
    case TypeKind::I32: return static_cast<int32_t>(static_cast<uint32_t>(v));
    default: return v;
  }
}

double round_float(IrType t, double v) { return t.kind == TypeKind::F32 ? static_cast<double>(static_cast<float>(v)) : v; }

class Machine {
 public:
  Machine(const IrModule& m, const ExecConfig& cfg, ExecTrace& trace) : m_(m), cfg_(cfg), trace_(trace) {
    for (size_t i = 0; i < m.functions.size(); ++i) fn_index_[m.functions[i].name] = static_cast<int>(i);
    compiled_.resize(m.functions.size());
    for (const auto& g : m.globals) {
      Allocation& a = allocate(g.byte_size(), false);
      a.readonly = true;
      global_addr_[g.name] = a.base;
    }
    for (const auto& g : m.globals) {
      uint64_t addr = global_addr_[g.name];
      Allocation& a = *find_alloc(addr);
      int64_t off = 0;
      for (const auto& e : g.elems) {
        RtValue v = constant(e.value, e.type);
        encode(a, off, e.type, v);
        off += e.type.size();
      }
    }
  }

  RtValue run_entry(const IrFunction& f, const std::vector<RtValue>& args) {
    return call(fn_index_.at(f.name), args, 0);
  }

  uint64_t symbol_address(const std::string& name) const {
    if (auto g = global_addr_.find(name); g != global_addr_.end()) return g->second;
    return function_address(name);
  }

  uint64_t function_address(const std::string& name) const {
    auto it = fn_index_.find(name);
    if (it == fn_index_.end()) throw Error(ErrorCode::InvalidArgument, "unknown function @" + name);
    return kFunctionBase + 16 * static_cast<uint64_t>(it->second);
  }

  uint64_t host_buffer(const Buffer& b) {
    int64_t w = b.elem.size();
    Allocation& a = allocate(w * static_cast<int64_t>(b.values.size()), false);
    for (size_t k = 0; k < b.values.size(); ++k) {
      RtValue v;
      v.f = round_float(b.elem, b.values[k]);
      v.i = static_cast<int64_t>(b.values[k]);
      encode(a, static_cast<int64_t>(k) * w, b.elem, v);
    }
    return a.base;
  }

  Buffer read_back(uint64_t addr, const Buffer& shape) const {
    Buffer out{shape.elem, {}};
    const Allocation* a = find_alloc(addr);
    int64_t w = shape.elem.size();
    for (size_t k = 0; k < shape.values.size(); ++k) {
      RtValue v = decode(*a, static_cast<int64_t>(k) * w, shape.elem);
      out.values.push_back(shape.elem.is_float() ? v.f : static_cast<double>(v.i));
    }
    return out;
  }

  void finish() {
    for (size_t k = 0; k < keys_.size(); ++k)
      if (counts_[k]) trace_.op_counts[keys_[k]] += counts_[k];
  }

 private:
  // ---- memory -------------------------------------------------------------
  Allocation& allocate(int64_t size, bool tape) {
    Allocation a;
    a.base = next_;
    a.size = size;
    a.bytes.assign(static_cast<size_t>(size), 0);
    a.tape = tape;
    if (tape) a.init.assign(static_cast<size_t>(size), 0);
    next_ += static_cast<uint64_t>((size + 15) / 16 * 16 + 16);
    allocs_.push_back(std::move(a));
    return allocs_.back();
  }

  Allocation* find_alloc(uint64_t addr) {
    return const_cast<Allocation*>(static_cast<const Machine*>(this)->find_alloc(addr));
  }
  const Allocation* find_alloc(uint64_t addr) const {
    auto it = std::upper_bound(allocs_.begin(), allocs_.end(), addr,
                               [](uint64_t x, const Allocation& a) { return x < a.base; });
    if (it == allocs_.begin()) return nullptr;
    --it;
    if (addr >= it->base + static_cast<uint64_t>(std::max<int64_t>(it->size, 1))) return nullptr;
    return &*it;
  }

  void fault(const std::string& msg) {
    if (cfg_.mode == TrapMode::Strict) throw Trap{msg};
    trace_.violations.push_back(msg);
  }

  Allocation* access(uint64_t addr, int64_t width, bool write, const char* what) {
    Allocation* a = find_alloc(addr);
    std::string where = std::string(what) + " at address " + std::to_string(addr);
    if (!a) {
      fault("out-of-bounds " + where);
      return nullptr;
    }
    if (!a->live) {
      fault("use after free: " + where);
      return nullptr;
    }
    if (static_cast<int64_t>(addr - a->base) + width > a->size) {
      fault("out-of-bounds " + where);
      return nullptr;
    }
    if (write && a->readonly) {
      fault("write to constant global: " + where);
      return nullptr;
    }
    return a;
  }

  static void encode(Allocation& a, int64_t off, IrType t, RtValue v) {
    uint8_t* p = a.bytes.data() + off;
    switch (t.kind) {
      case TypeKind::F64: std::memcpy(p, &v.f, 8); break;
      case TypeKind::F32: {
        float x = static_cast<float>(v.f);
        std::memcpy(p, &x, 4);
        break;
      }
      case TypeKind::I1: *p = static_cast<uint8_t>(v.i & 1); break;
      case TypeKind::I32: {
        int32_t x = static_cast<int32_t>(v.i);
        std::memcpy(p, &x, 4);
        break;
      }
      case TypeKind::I64: case TypeKind::Ptr: std::memcpy(p, &v.i, 8); break;
      case TypeKind::Void: break;
    }
  }

  static RtValue decode(const Allocation& a, int64_t off, IrType t) {
    const uint8_t* p = a.bytes.data() + off;
    RtValue v;
    switch (t.kind) {
      case TypeKind::F64: std::memcpy(&v.f, p, 8); break;
      case TypeKind::F32: {
        float x;
        std::memcpy(&x, p, 4);
        v.f = x;
        break;
      }
      case TypeKind::I1: v.i = *p & 1; break;
      case TypeKind::I32: {
        int32_t x;
        std::memcpy(&x, p, 4);
        v.i = x;
        break;
      }
      case TypeKind::I64: case TypeKind::Ptr: std::memcpy(&v.i, p, 8); break;
      case TypeKind::Void: break;
    }
    return v;
  }

  // ---- compilation ----------------------------------------------------------
  int key_of(const std::string& k) {
    auto [it, fresh] = key_index_.emplace(k, static_cast<int>(keys_.size()));
    if (fresh) {
      keys_.push_back(k);
      counts_.push_back(0);
    }
    return it->second;
  }

  RtValue constant(const Operand& o, IrType t) {
    RtValue v;
    switch (o.kind) {
      case Operand::Kind::Int: v.i = o.ival; v.f = static_cast<double>(o.ival); break;
      case Operand::Kind::Float: v.f = round_float(t, o.fval); v.i = static_cast<int64_t>(o.fval); break;
      case Operand::Kind::Null: break;
      case Operand::Kind::Global:
        if (auto g = global_addr_.find(o.name); g != global_addr_.end()) v.i = static_cast<int64_t>(g->second);
        else v.i = static_cast<int64_t>(function_address(o.name));
        break;
      case Operand::Kind::Local: break;
    }
    if (t.is_int()) v.i = wrap_int(t, v.i);
    return v;
  }

  const CFunc& compiled(int idx) {
    if (compiled_[idx]) return *compiled_[idx];
    auto cf = std::make_unique<CFunc>();
    const IrFunction& f = m_.functions[idx];
    cf->fn = &f;
    std::map<std::string, int> slots;
    auto slot = [&](const std::string& n) {
      auto [it, fresh] = slots.emplace(n, static_cast<int>(slots.size()));
      return it->second;
    };
    for (const auto& p : f.params) cf->param_slots.push_back(slot(p.name));
    std::map<std::string, int> block_index;
    for (size_t b = 0; b < f.blocks.size(); ++b) block_index[f.blocks[b].label] = static_cast<int>(b);
    for (const auto& b : f.blocks)
      for (const auto& inst : b.insts)
        if (inst.has_result()) slot(inst.result);
    for (const auto& b : f.blocks) {
      CBlock cb;
      for (const auto& inst : b.insts) {
        CInst ci;
        ci.src = &inst;
        ci.op = inst.op;
        ci.type = inst.type;
        ci.pred = inst.pred;
        ci.tape = inst.flags & kFlagTape;
        if (!inst.arg_types.empty()) ci.arg0 = inst.arg_types[0];
        if (inst.has_result()) ci.result = slot(inst.result);
        for (size_t k = 0; k < inst.operands.size(); ++k) {
          const Operand& o = inst.operands[k];
          COp c;
          if (o.is_local()) {
            c.slot = true;
            c.idx = slot(o.name);
          } else {
            IrType t = inst.type;
            if ((inst.op == Opcode::Call || inst.op == Opcode::CallInd) && k < inst.arg_types.size())
              t = inst.arg_types[k];
            if ((inst.op == Opcode::ICmp || inst.op == Opcode::FCmp) && !inst.arg_types.empty()) t = inst.arg_types[0];
            if (inst.op == Opcode::Store && k == 1) t = TypeKind::Ptr;
            if ((inst.op == Opcode::Select && k == 0) || inst.op == Opcode::CondBr) t = TypeKind::I1;
            if (inst.op == Opcode::PtrAdd || inst.op == Opcode::Alloc || inst.op == Opcode::Memcpy ||
                inst.op == Opcode::SIToFP || inst.op == Opcode::Load || inst.op == Opcode::Free)
              t = TypeKind::I64;
            c.v = constant(o, t);
          }
          ci.ops.push_back(c);
        }
        for (const auto& l : inst.labels) ci.targets.push_back(block_index.at(l));
        if (inst.op == Opcode::Call) {
          auto it = fn_index_.find(inst.callee);
          ci.callee = it == fn_index_.end() ? -1 : it->second;
        }
        std::string key(opcode_name(inst.op));
        if (inst.op == Opcode::ICmp || inst.op == Opcode::FCmp) key += "." + std::string(type_name(ci.arg0));
        else if (!inst.type.is_void() || inst.op == Opcode::Call || inst.op == Opcode::CallInd ||
                 inst.op == Opcode::Ret)
          key += "." + std::string(type_name(inst.type));
        ci.key = key_of(key);
        (inst.op == Opcode::Phi ? cb.phis : cb.body).push_back(std::move(ci));
      }
      cf->blocks.push_back(std::move(cb));
    }
    cf->nslots = static_cast<int>(slots.size());
    compiled_[idx] = std::move(cf);
    return *compiled_[idx];
  }

  // ---- execution ------------------------------------------------------------
  void tick(const CInst& ci) {
    ++trace_.steps;
    ++counts_[ci.key];
    if (trace_.steps > cfg_.step_limit) throw Trap{"step limit exceeded"};
  }

  RtValue call(int idx, const std::vector<RtValue>& args, int depth) {
    if (depth > kMaxDepth) throw Trap{"call depth limit exceeded"};
    const IrFunction& f = m_.functions[idx];
    if (f.is_declaration) throw Trap{"call to @" + f.name + " which has no definition"};
    const CFunc& cf = compiled(idx);
    std::vector<RtValue> s(cf.nslots);
    for (size_t k = 0; k < args.size(); ++k) s[cf.param_slots[k]] = args[k];
    auto val = [&](const COp& o) -> const RtValue& { return o.slot ? s[o.idx] : o.v; };

    int cur = 0, prev = -1;
    std::vector<RtValue> phi_vals;
    while (true) {
      const CBlock& b = cf.blocks[cur];
      if (!b.phis.empty()) {
        phi_vals.clear();
        for (const auto& ci : b.phis) {
          tick(ci);
          size_t k = 0;
          while (k < ci.targets.size() && ci.targets[k] != prev) ++k;
          if (k == ci.targets.size()) throw Trap{"phi has no entry for the incoming edge"};
          phi_vals.push_back(val(ci.ops[k]));
        }
        for (size_t k = 0; k < b.phis.size(); ++k) s[b.phis[k].result] = phi_vals[k];
      }
      for (const auto& ci : b.body) {
        tick(ci);
        const auto& o = ci.ops;
        RtValue r;
        IrType t = ci.type;
        switch (ci.op) {
          case Opcode::FAdd: r.f = round_float(t, val(o[0]).f + val(o[1]).f); break;
          case Opcode::FSub: r.f = round_float(t, val(o[0]).f - val(o[1]).f); break;
          case Opcode::FMul: r.f = round_float(t, val(o[0]).f * val(o[1]).f); break;
          case Opcode::FDiv: r.f = round_float(t, val(o[0]).f / val(o[1]).f); break;
          case Opcode::FNeg: r.f = -val(o[0]).f; break;
          case Opcode::Pow: r.f = round_float(t, std::pow(val(o[0]).f, val(o[1]).f)); break;
          case Opcode::Sin: r.f = round_float(t, std::sin(val(o[0]).f)); break;
          case Opcode::Cos: r.f = round_float(t, std::cos(val(o[0]).f)); break;
          case Opcode::Exp: r.f = round_float(t, std::exp(val(o[0]).f)); break;
          case Opcode::Log: r.f = round_float(t, std::log(val(o[0]).f)); break;
          case Opcode::Sqrt: r.f = round_float(t, std::sqrt(val(o[0]).f)); break;
          case Opcode::Fabs: r.f = std::fabs(val(o[0]).f); break;
          case Opcode::IAdd:
            r.i = wrap_int(t, static_cast<int64_t>(static_cast<uint64_t>(val(o[0]).i) + static_cast<uint64_t>(val(o[1]).i)));
            break;
          case Opcode::ISub:
            r.i = wrap_int(t, static_cast<int64_t>(static_cast<uint64_t>(val(o[0]).i) - static_cast<uint64_t>(val(o[1]).i)));
            break;
          case Opcode::IMul:
            r.i = wrap_int(t, static_cast<int64_t>(static_cast<uint64_t>(val(o[0]).i) * static_cast<uint64_t>(val(o[1]).i)));
            break;
          case Opcode::SDiv: {
            int64_t a = val(o[0]).i, d = val(o[1]).i;
            if (d == 0) throw Trap{"integer division by zero"};
            if (a == std::numeric_limits<int64_t>::min() && d == -1) throw Trap{"integer division overflow"};
            r.i = wrap_int(t, a / d);
            break;
          }
          case Opcode::ICmp: {
            int64_t a = val(o[0]).i, c = val(o[1]).i;
            bool x = false;
            switch (ci.pred) {
              case Predicate::Eq: x = a == c; break;
              case Predicate::Ne: x = a != c; break;
              case Predicate::Slt: x = a < c; break;
              case Predicate::Sle: x = a <= c; break;
              case Predicate::Sgt: x = a > c; break;
              case Predicate::Sge: x = a >= c; break;
              default: break;
            }
            r.i = x;
            break;
          }
          case Opcode::FCmp: {
            double a = val(o[0]).f, c = val(o[1]).f;
            bool x = false;
            switch (ci.pred) {
              case Predicate::Oeq: x = a == c; break;
              case Predicate::One: x = a < c || a > c; break;
              case Predicate::Olt: x = a < c; break;
              case Predicate::Ole: x = a <= c; break;
              case Predicate::Ogt: x = a > c; break;
              case Predicate::Oge: x = a >= c; break;
              default: break;
            }
            r.i = x;
            break;
          }
          case Opcode::Select: r = val(o[0]).i ? val(o[1]) : val(o[2]); break;
          case Opcode::SIToFP: r.f = round_float(t, static_cast<double>(val(o[0]).i)); break;
          case Opcode::Read:
            if (trace_.reads >= static_cast<int64_t>(cfg_.read_stream.size())) throw Trap{"read stream exhausted"};
            r.f = round_float(t, cfg_.read_stream[trace_.reads++]);
            break;
          case Opcode::Alloc: {
            int64_t n = val(o[0]).i;
            if (n < 0) throw Trap{"negative allocation size"};
            Allocation& a = allocate(n, ci.tape);
            if (ci.tape) trace_.tape_allocs.push_back(n);
            r.i = static_cast<int64_t>(a.base);
            break;
          }
          case Opcode::Free: {
            uint64_t p = static_cast<uint64_t>(val(o[0]).i);
            if (p == 0) break;
            Allocation* a = find_alloc(p);
            if (!a || a->base != p || a->readonly) fault("free of a non-allocation address " + std::to_string(p));
            else if (!a->live) fault("double free at address " + std::to_string(p));
            else a->live = false;
            break;
          }
          case Opcode::Load: {
            uint64_t p = static_cast<uint64_t>(val(o[0]).i);
            int64_t w = t.size();
            if (Allocation* a = access(p, w, false, "load")) {
              int64_t off = static_cast<int64_t>(p - a->base);
              r = decode(*a, off, t);
              if (a->tape) {
                ++trace_.tape_reads;
                for (int64_t k = 0; k < w; ++k)
                  if (!a->init[off + k]) {
                    ++trace_.uninit_tape_reads;
                    break;
                  }
              }
            }
            if (cfg_.record_float_loads && t.is_float()) {
              const Operand& src = ci.src->operands[0];
              trace_.float_loads.emplace(cf.fn->name, (src.is_local() ? "%" : "@") + src.name);
            }
            break;
          }
          case Opcode::Store: {
            uint64_t p = static_cast<uint64_t>(val(o[1]).i);
            int64_t w = t.size();
            if (Allocation* a = access(p, w, true, "store")) {
              int64_t off = static_cast<int64_t>(p - a->base);
              encode(*a, off, t, val(o[0]));
              if (a->tape) {
                ++trace_.tape_writes;
                std::fill(a->init.begin() + off, a->init.begin() + off + w, 1);
              }
            }
            break;
          }
          case Opcode::Memcpy: {
            uint64_t d = static_cast<uint64_t>(val(o[0]).i), sp = static_cast<uint64_t>(val(o[1]).i);
            int64_t n = val(o[2]).i;
            if (n < 0) throw Trap{"negative memcpy size"};
            if (n == 0) break;
            Allocation* src = access(sp, n, false, "memcpy source");
            Allocation* dst = access(d, n, true, "memcpy destination");
            if (!src || !dst) break;
            int64_t so = static_cast<int64_t>(sp - src->base), dof = static_cast<int64_t>(d - dst->base);
            std::memmove(dst->bytes.data() + dof, src->bytes.data() + so, static_cast<size_t>(n));
            if (src->tape) ++trace_.tape_reads;
            if (dst->tape) {
              ++trace_.tape_writes;
              for (int64_t k = 0; k < n; ++k) dst->init[dof + k] = src->tape ? src->init[so + k] : 1;
            }
            break;
          }
          case Opcode::PtrAdd: r.i = val(o[0]).i + val(o[1]).i; break;
          case Opcode::Call:
          case Opcode::CallInd: {
            int callee = ci.callee;
            size_t first = 0;
            if (ci.op == Opcode::CallInd) {
              uint64_t a = static_cast<uint64_t>(val(o[0]).i);
              uint64_t k = (a - kFunctionBase) / 16;
              if (a < kFunctionBase || (a - kFunctionBase) % 16 || k >= m_.functions.size())
                throw Trap{"indirect call through a non-function address"};
              callee = static_cast<int>(k);
              first = 1;
              const IrFunction& cfn = m_.functions[callee];
              if (cfn.params.size() != o.size() - 1 || cfn.ret_type != t)
                throw Trap{"indirect call signature mismatch for @" + cfn.name};
            } else if (callee < 0) {
              throw Trap{"call to unknown function @" + ci.src->callee};
            }
            std::vector<RtValue> args;
            args.reserve(o.size());
            for (size_t k = first; k < o.size(); ++k) args.push_back(val(o[k]));
            r = call(callee, args, depth + 1);
            break;
          }
          case Opcode::Br:
            prev = cur;
            cur = ci.targets[0];
            goto next_block;
          case Opcode::CondBr:
            prev = cur;
            cur = val(o[0]).i ? ci.targets[0] : ci.targets[1];
            goto next_block;
          case Opcode::Ret:
            return o.empty() ? RtValue{} : val(o[0]);
          case Opcode::Phi:
            break;
        }
        if (ci.result >= 0) s[ci.result] = r;
      }
      throw Trap{"fell off the end of a block"};
    next_block:;
    }
  }

  const IrModule& m_;
  const ExecConfig& cfg_;
  ExecTrace& trace_;
  std::map<std::string, int> fn_index_;
  std::map<std::string, uint64_t> global_addr_;
  std::vector<std::unique_ptr<CFunc>> compiled_;
  std::vector<Allocation> allocs_;
  uint64_t next_ = kHeapBase;
  std::map<std::string, int> key_index_;
  std::vector<std::string> keys_;
  std::vector<int64_t> counts_;
};

}  // namespace

ExecTrace run(const IrModule& m, const ExecConfig& cfg) {
  const IrFunction* f = m.find_function(cfg.entry);
  if (!f) throw Error(ErrorCode::InvalidArgument, "unknown entry function @" + cfg.entry);
  if (f->params.size() != cfg.args.size())
    throw Error(ErrorCode::InvalidArgument, "@" + cfg.entry + " expects " + std::to_string(f->params.size()) +
                                                " arguments, got " + std::to_string(cfg.args.size()));
  ExecTrace trace;
  trace.ret_type = f->ret_type;
  Machine mach(m, cfg, trace);
  std::vector<uint64_t> buffer_addr;
  for (const auto& b : cfg.buffers) buffer_addr.push_back(mach.host_buffer(b));
  std::vector<RtValue> args;
  for (size_t k = 0; k < cfg.args.size(); ++k) {
    const Arg& a = cfg.args[k];
    IrType pt = f->params[k].type;
    RtValue v;
    switch (a.kind) {
      case Arg::Kind::Float:
        if (!pt.is_float()) throw Error(ErrorCode::InvalidArgument, "argument " + std::to_string(k) + " must be " + std::string(type_name(pt)));
        v.f = round_float(pt, a.f);
        break;
      case Arg::Kind::Int:
        if (!pt.is_int()) throw Error(ErrorCode::InvalidArgument, "argument " + std::to_string(k) + " must be " + std::string(type_name(pt)));
        v.i = wrap_int(pt, a.i);
        break;
      case Arg::Kind::Buffer:
        if (!pt.is_ptr() || a.buffer >= buffer_addr.size())
          throw Error(ErrorCode::InvalidArgument, "argument " + std::to_string(k) + " is not a valid buffer");
        v.i = static_cast<int64_t>(buffer_addr[a.buffer]);
        break;
      case Arg::Kind::Null:
        break;
      case Arg::Kind::Function:
        v.i = static_cast<int64_t>(mach.symbol_address(a.function));
        break;
    }
    args.push_back(v);
  }
  try {
    RtValue r = mach.run_entry(*f, args);
    trace.ret_f = r.f;
    trace.ret_i = r.i;
  } catch (const Trap& t) {
    trace.ok = false;
    trace.error = t.message;
  }
  mach.finish();
  for (size_t k = 0; k < cfg.buffers.size(); ++k) trace.buffers.push_back(mach.read_back(buffer_addr[k], cfg.buffers[k]));
  return trace;
}

}  // namespace adjointc
