// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>

#include "adjointc/cfg.hpp"
#include "adjointc/text.hpp"
#include "support.hpp"

namespace adjointc {
namespace {

using testing::corpus_dir;
using testing::read_file;

constexpr const char* kLoop = R"(
; counts up to n
define i64 @count(i64 %n) {
entry:
  br %loop
loop:
  %i = phi i64 [0, %entry], [%i.next, %loop]
  %i.next = iadd i64 %i, 1
  %c = icmp slt i64 %i.next, %n
  condbr %c, %loop, %exit
exit:
  ret i64 %i.next
}
)";

std::vector<std::string> corpus_ir_files() {
  std::vector<std::string> out;
  for (const auto& e : std::filesystem::directory_iterator(corpus_dir()))
    if (e.path().extension() == ".ir") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

TEST(Parser, ParsesFunctionStructure) {
  IrModule m = parse_module(kLoop);
  ASSERT_EQ(m.functions.size(), 1u);
  const IrFunction& f = m.functions[0];
  EXPECT_EQ(f.name, "count");
  EXPECT_EQ(f.ret_type, TypeKind::I64);
  ASSERT_EQ(f.params.size(), 1u);
  EXPECT_EQ(f.params[0].name, "n");
  ASSERT_EQ(f.blocks.size(), 3u);
  EXPECT_EQ(f.blocks[1].insts[0].op, Opcode::Phi);
  EXPECT_EQ(f.blocks[1].insts[0].labels, (std::vector<std::string>{"entry", "loop"}));
  EXPECT_EQ(f.instruction_count(), 6u);
}

TEST(Parser, RoundTripsEveryCorpusFile) {
  auto files = corpus_ir_files();
  ASSERT_FALSE(files.empty());
  for (const auto& path : files) {
    SCOPED_TRACE(path);
    IrModule m = parse_module(read_file(path));
    std::string once = print_module(m);
    IrModule again = parse_module(once);
    EXPECT_EQ(m, again);
    EXPECT_EQ(once, print_module(again));
  }
}

TEST(Parser, ReportsLineAndColumn) {
  try {
    parse_module("define f64 @f(f64 %x) {\nentry:\n  %y = frob f64 %x\n  ret f64 %y\n}\n");
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3);
    EXPECT_EQ(e.code(), ErrorCode::Parse);
    EXPECT_NE(std::string(e.what()).find("frob"), std::string::npos) << e.what();
  }
}

TEST(Parser, RejectsDuplicateDefinitions) {
  std::string two = std::string(kLoop) + kLoop;
  EXPECT_THROW(parse_module(two), ParseError);
}

TEST(Parser, ParsesGlobalsDeclarationsAndCustomAdjoints) {
  IrModule m = testing::data_module("custom_cube.ir");
  const IrFunction* cube = m.find_function("cube");
  ASSERT_NE(cube, nullptr);
  EXPECT_TRUE(cube->is_declaration);
  ASSERT_EQ(m.custom_adjoints.count("cube"), 1u);
  EXPECT_EQ(m.custom_adjoints.at("cube").augmented, "cube_aug");
  EXPECT_EQ(m.custom_adjoints.at("cube").gradient, "cube_grad");

  IrModule g = parse_module(R"(
define f64 @id(f64 %x) {
entry:
  ret f64 %x
}
global @table = [ptr @id, f64 2.5, i64 3]
)");
  const Global* t = g.find_global("table");
  ASSERT_NE(t, nullptr);
  ASSERT_EQ(t->elems.size(), 3u);
  EXPECT_EQ(t->byte_size(), 24);
  EXPECT_EQ(t->elems[0].value, Operand::global("id"));
  EXPECT_EQ(parse_module(print_module(g)), g);
}

TEST(Validator, FlagsUndefinedValues) {
  IrModule m = parse_module(R"(
define f64 @f(f64 %x) {
entry:
  %y = fadd f64 %x, %z
  ret f64 %y
}
)",
                            false);
  auto d = validate(m);
  ASSERT_FALSE(d.empty());
  EXPECT_NE(d[0].message.find("%z"), std::string::npos) << d[0].message;
  EXPECT_EQ(d[0].function, "f");
  EXPECT_EQ(d[0].block, "entry");
  EXPECT_THROW(validate_or_throw(m), Error);
}

TEST(Validator, FlagsDominanceViolations) {
  IrModule m = parse_module(R"(
define f64 @f(f64 %x, i1 %c) {
entry:
  condbr %c, %a, %b
a:
  %y = fmul f64 %x, 2.0
  br %b
b:
  %z = fadd f64 %y, 1.0
  ret f64 %z
}
)",
                            false);
  auto d = validate(m);
  ASSERT_FALSE(d.empty());
  EXPECT_NE(d[0].message.find("dominated"), std::string::npos) << d[0].message;
}

TEST(Validator, FlagsTypeMismatchesAndBadPhis) {
  IrModule m = parse_module(R"(
define f64 @f(f64 %x) {
entry:
  %y = iadd f64 %x, %x
  ret f64 %y
}
)",
                            false);
  EXPECT_FALSE(validate(m).empty());

  IrModule p = parse_module(R"(
define f64 @g(f64 %x) {
entry:
  br %next
next:
  %y = phi f64 [%x, %elsewhere]
  ret f64 %y
}
)",
                            false);
  auto d = validate(p);
  ASSERT_FALSE(d.empty());
}

TEST(Validator, AcceptsCorpus) {
  for (const auto& path : corpus_ir_files()) {
    SCOPED_TRACE(path);
    EXPECT_TRUE(validate(parse_module(read_file(path), false)).empty());
  }
}

TEST(Merge, DeclarationsUnifyWithDefinitions) {
  IrModule m = parse_sources({R"(
declare f64 @sq(f64 %x)
define f64 @use(f64 %x) {
entry:
  %y = call f64 @sq(f64 %x)
  ret f64 %y
}
)",
                              R"(
define f64 @sq(f64 %x) {
entry:
  %y = fmul f64 %x, %x
  ret f64 %y
}
)"});
  const IrFunction* sq = m.find_function("sq");
  ASSERT_NE(sq, nullptr);
  EXPECT_FALSE(sq->is_declaration);
  ExecTrace t = run(m, testing::call("use", {Arg::real(3.0)}));
  ASSERT_TRUE(t.ok) << t.error;
  EXPECT_EQ(t.ret_f, 9.0);

  EXPECT_THROW(parse_sources({kLoop, kLoop}), Error);
}

TEST(Merge, MissingFileIsAnIoError) {
  try {
    parse_files({"/nonexistent/file.ir"});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::Io);
  }
}

TEST(Cfg, LoopsDominatorsAndOrder) {
  IrModule m = parse_module(kLoop);
  const IrFunction& f = m.functions[0];
  Cfg cfg(f);
  DomTree dom(cfg);
  LoopInfo li(cfg, dom);
  int entry = cfg.block("entry"), loop = cfg.block("loop"), exit = cfg.block("exit");
  EXPECT_EQ(cfg.rpo.front(), entry);
  EXPECT_TRUE(dom.dominates(entry, exit));
  EXPECT_TRUE(dom.dominates(loop, exit));
  EXPECT_FALSE(dom.dominates(exit, loop));
  ASSERT_EQ(li.loops.size(), 1u);
  EXPECT_EQ(li.loops[0].header, loop);
  EXPECT_EQ(li.loops[0].latches, std::vector<int>{loop});
  ASSERT_TRUE(li.loops[0].preheader.has_value());
  EXPECT_EQ(*li.loops[0].preheader, entry);
  EXPECT_TRUE(li.reducible);
}

TEST(Cfg, NestedLoopsOfGmm) {
  IrModule m = testing::corpus_module("gmm.ir");
  for (const auto& f : m.functions) {
    if (f.is_declaration) continue;
    Cfg cfg(f);
    DomTree dom(cfg);
    LoopInfo li(cfg, dom);
    EXPECT_TRUE(li.reducible) << f.name;
    for (size_t i = 0; i < li.loops.size(); ++i) {
      const Loop& l = li.loops[i];
      if (l.parent >= 0) {
        EXPECT_GT(l.depth, li.loops[static_cast<size_t>(l.parent)].depth);
        for (int b : l.blocks) EXPECT_TRUE(li.contains(l.parent, b));
      }
    }
  }
}

}  // namespace
}  // namespace adjointc
