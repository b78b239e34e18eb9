// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "ad/synth.hpp"

namespace adjointc::ad {

inline constexpr int kInfiniteCost = 1 << 20;

/// Builds one gradient (combined, or the augmented/gradient pair).
class Emitter {
 public:
  Emitter(Context& cx, const std::string& fn, const ActivitySpec& spec, GradMode mode, bool seed_param,
          PairNames names);
  SynthOutput run();

 private:
  struct FwdDef {
    int block = -1;
    Instruction inst;
    bool shadow_load = false;  // load of a pointer out of shadow memory
  };
  struct CallSite {
    bool indirect = false;
    std::string gradient;       // direct calls
    ActivitySpec spec;          // pattern of the callee gradient
    IrType grad_ret;
    std::string tape;           // forward value holding the callee tape
    std::vector<Operand> args;  // primal arguments (callee pointer excluded)
    std::vector<IrType> types;
    Operand fn_ptr;             // indirect calls
  };
  struct Cache {
    CacheKind kind = CacheKind::Scalar;
    IrType type;
    int block = -1;
    int64_t length = 1;
    int64_t field = -1;   // frame offset: value (scalar), header (stack) or array pointer (fixed)
    std::string ptr;      // scalar field / stack header / array base
    std::string count;    // stack count pointer
  };
  struct RevBlock {
    std::string label;
    std::vector<Instruction> body;
    std::vector<Instruction> tail;
    std::vector<BasicBlock> extra;
  };

  // setup
  void analyze();
  void assign_params();
  std::string fresh(const std::string& base);

  // forward
  void emit_forward();
  void forward_inst(const BasicBlock& src, size_t idx, BasicBlock& out);
  void forward_call(const Instruction& I, const std::string& id, BasicBlock& out);
  Operand shadow_of(const Operand& o);
  bool has_shadow(const Operand& o) const;
  ActivitySpec call_spec(const Instruction& I, size_t first) const;
  bool store_elided(const Instruction& I) const;

  // reverse
  void emit_reverse();
  void reverse_block(int b);
  void reverse_inst(const BasicBlock& src, size_t idx);
  void reverse_call(const Instruction& I, const std::string& id);
  void reverse_memcpy(const Instruction& I);

  // values in reverse
  Operand mat(const Operand& o, bool top = true);
  int cost(const std::string& v, int depth);
  bool available(const std::string& v) const;
  bool is_gradient_param(const std::string& v) const;
  Operand recompute(const std::string& v);
  Operand cache_read(const std::string& v);
  Cache& cache_for(const std::string& v);
  IrType type_of(const Operand& o) const;
  Operand emit(Opcode op, IrType t, const std::string& base, std::vector<Operand> ops);
  Operand emit_load(IrType t, const std::string& base, Operand p, uint32_t flags = kFlagNone);
  Operand riv_load(int L);
  std::string riv_slot(int L);
  std::vector<std::pair<int64_t, BaseType>> elements(const Operand& d, const Operand& s, int64_t n) const;

  // adjoint slots
  std::string slot(const std::string& v);
  bool accumulates(const Operand& o) const;
  void acc(const Operand& o, Operand delta, bool subtract = false);
  Operand take(const std::string& v);
  Operand scratch(int64_t bytes);

  // finalization
  void place_cache_writes();
  std::vector<Instruction> forward_setup();
  std::vector<Instruction> reverse_setup();
  std::vector<Instruction> epilogue();
  std::vector<IrFunction> assemble();

  Context& cx_;
  std::string fn_;
  ActivitySpec spec_;
  GradMode mode_;
  bool seed_param_;
  PairNames names_;

  Prepared P_;
  IrModule work_;
  TypeEnv env_;
  ActivityInfo act_;
  std::unique_ptr<AliasAnalysis> aa_;
  std::set<std::string> used_;
  std::set<std::string> primal_names_;
  std::set<std::string> shadow_names_;
  std::map<std::string, ActivityToken> param_token_;
  std::map<std::string, std::string> shadow_;  // primal pointer -> shadow name
  std::vector<Param> grad_params_;
  std::vector<Param> aug_params_;
  std::string seed_;   // seed param, empty when 1.0 or inactive
  std::string out_;    // derivative out pointer
  std::string adj_;    // adjoint frame
  std::string frame_;  // tape frame
  int64_t adj_size_ = 0;
  int64_t frame_size_ = 0;
  std::string scratch_name_;
  int64_t scratch_size_ = 0;

  std::vector<BasicBlock> fwd_;
  std::map<std::string, FwdDef> fdef_;
  std::map<std::string, CallSite> calls_;          // instruction id -> site
  std::set<std::string> freed_allocs_;             // allocations the primal frees
  std::vector<Operand> end_frees_;                 // frees of memory from elsewhere
  std::map<std::string, std::pair<std::string, int64_t>> slots_;  // value -> (pointer, offset)
  std::map<int, std::pair<std::string, int64_t>> rivs_;
  std::map<std::string, Cache> caches_;
  std::vector<std::string> cache_order_;

  std::vector<RevBlock> rev_;
  int cur_ = -1;
  std::vector<Instruction>* out_insts_ = nullptr;
  std::map<std::string, Operand> memo_;
  std::map<std::string, int> cost_memo_;

  TapePlan plan_;
  std::set<std::string> needed_;
};

}  // namespace adjointc::ad
