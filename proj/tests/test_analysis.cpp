// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <filesystem>

#include "adjointc/activity.hpp"
#include "adjointc/alias.hpp"
#include "adjointc/typetree.hpp"
#include "support.hpp"

namespace adjointc {
namespace {

using testing::corpus_module;

TEST(TypeTree, InsertMergeAndLookup) {
  TypeTree t = TypeTree::of(BaseType::Pointer);
  EXPECT_TRUE(t.insert({0}, BaseType::Float64));
  EXPECT_FALSE(t.insert({0}, BaseType::Float64));
  EXPECT_TRUE(t.insert({8}, BaseType::Integer));
  EXPECT_EQ(t.str(), "{[]:Pointer, [0]:Double, [8]:Integer}");
  EXPECT_EQ(t.pointee_at(0), BaseType::Float64);
  EXPECT_EQ(t.pointee_at(16), BaseType::Unknown);
  EXPECT_TRUE(t.has_float());
  EXPECT_EQ(t.pointee(8).str(), "{[]:Integer}");
}

TEST(TypeTree, NestedInsertCreatesPointerPrefixes) {
  TypeTree t;
  t.insert({0, 8}, BaseType::Float32);
  EXPECT_EQ(t.at({}), BaseType::Pointer);
  EXPECT_EQ(t.at({0}), BaseType::Pointer);
  EXPECT_EQ(t.at({0, 8}), BaseType::Float32);
}

TEST(TypeTree, OverlappingKindsConflict) {
  TypeTree t = TypeTree::of(BaseType::Pointer);
  t.insert({0}, BaseType::Float64);
  try {
    t.insert({4}, BaseType::Float32);
    FAIL() << "a float inside a double should conflict";
  } catch (const TreeConflict& c) {
    EXPECT_EQ(c.path, TypePath{4});
    EXPECT_EQ(c.existing, BaseType::Float64);
    EXPECT_EQ(c.incoming, BaseType::Float32);
  }
  TypeTree ok = TypeTree::of(BaseType::Pointer);
  ok.insert({0}, BaseType::Float32);
  EXPECT_NO_THROW(ok.insert({4}, BaseType::Float32));
}

TEST(TypeTree, ShiftCollapseAndWindow) {
  TypeTree t = TypeTree::of(BaseType::Pointer);
  t.insert({0}, BaseType::Float64);
  t.insert({8}, BaseType::Float64);
  TypeTree s = t.shifted(-8);
  EXPECT_EQ(s.pointee_at(0), BaseType::Float64);
  EXPECT_EQ(s.pointee_at(8), BaseType::Unknown);
  TypeTree c = t.collapsed();
  EXPECT_EQ(c.pointee_at(4096), BaseType::Float64);
  EXPECT_EQ(path_string({kAnyOffset}), "[*]");
  EXPECT_EQ(t.pointee_window(8).str(), "{[]:Pointer, [0]:Double}");
  TypeTree p = TypeTree::pointer_to(TypeTree::of(BaseType::Integer), 16);
  EXPECT_EQ(p.str(), "{[]:Pointer, [16]:Integer}");
}

// The untyped memcpy in @f learns its element type from each caller.
TEST(TypeAnalysis, MemcpyTypedFromCaller) {
  IrModule d = corpus_module("memcpy_double.ir");
  TypeEnv ed = analyze_types(d);
  EXPECT_EQ(query(ed, d, "f", "dst").str(), "{[]:Pointer, [0]:Double}");
  EXPECT_EQ(query(ed, d, "f", "%src").str(), "{[]:Pointer, [0]:Double}");

  IrModule s = corpus_module("memcpy_float.ir");
  TypeEnv es = analyze_types(s);
  TypeTree src = query(es, s, "f", "src");
  EXPECT_EQ(src.pointee_at(0), BaseType::Float32);
  EXPECT_EQ(src.pointee_at(4), BaseType::Float32);
}

TEST(TypeAnalysis, QueryLiteralsAndUnknowns) {
  IrModule m = corpus_module("relu3.ir");
  TypeEnv env = analyze_types(m);
  EXPECT_EQ(query(env, m, "relu3", "3.0").root(), BaseType::Float64);
  EXPECT_EQ(query(env, m, "relu3", "7").root(), BaseType::Integer);
  EXPECT_EQ(query(env, m, "relu3", "@relu3").root(), BaseType::Pointer);
  EXPECT_EQ(query(env, m, "relu3", "res").root(), BaseType::Float64);
  EXPECT_THROW(query(env, m, "relu3", "nope"), Error);
  EXPECT_THROW(query(env, m, "nope", "x"), Error);
}

TEST(TypeAnalysis, ConflictNamesValueAndPath) {
  IrModule m = testing::data_module("type_conflict.ir");
  try {
    analyze_types(m);
    FAIL() << "expected TypeConflict";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TypeConflict);
    std::string msg = e.what();
    EXPECT_NE(msg.find("%p"), std::string::npos) << msg;
    EXPECT_NE(msg.find("[0]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("Double"), std::string::npos) << msg;
    EXPECT_NE(msg.find("Integer"), std::string::npos) << msg;
  }
}

TEST(TypeAnalysis, FixedPointIsBoundedAndIdempotentOnCorpus) {
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(testing::corpus_dir())) {
    if (e.path().extension() != ".ir") continue;
    ++files;
    SCOPED_TRACE(e.path().string());
    IrModule m = parse_files({e.path().string()});
    TypeEnv env = analyze_types(m);
    EXPECT_GT(env.iterations, 0);
    EXPECT_LT(env.iterations, kTypeIterationCap);
    TypeEnv again = env;
    propagate(again, m);
    again.iterations = env.iterations;
    EXPECT_EQ(again, env);
    EXPECT_EQ(analyze_types(m), env);
  }
  EXPECT_GE(files, 10);
}

TEST(TypeAnalysis, DumpUsesTreeNotation) {
  IrModule m = corpus_module("sum.ir");
  std::string d = dump_types(analyze_types(m), m);
  EXPECT_NE(d.find("@sum:\n"), std::string::npos);
  EXPECT_NE(d.find("  %x: {[]:Pointer, [*]:Double}"), std::string::npos) << d;
  EXPECT_NE(d.find("  %i: {[]:Integer}"), std::string::npos) << d;
}

TEST(Alias, NoaliasParamsAndAllocations) {
  IrModule m = corpus_module("norm.ir");
  const IrFunction& f = *m.find_function("norm");
  TypeEnv env = analyze_types(m);
  AliasAnalysis aa(m, f, &env);
  EXPECT_EQ(aa.alias(Operand::local("pi"), Operand::local("po")), AliasVerdict::NoAlias);
  EXPECT_EQ(aa.root(Operand::local("pi")).kind, PointerRoot::Kind::Param);
  EXPECT_EQ(aa.root(Operand::local("pi")).name, "in");
  EXPECT_TRUE(aa.may_be_written(Operand::local("po")));
  EXPECT_FALSE(aa.may_be_written(Operand::local("pi")));

  IrModule a = corpus_module("norm_alias.ir");
  const IrFunction* fa = nullptr;
  for (const auto& g : a.functions)
    if (!g.is_declaration && g.params.size() == 3) fa = &g;
  ASSERT_NE(fa, nullptr);
  AliasAnalysis aa2(a, *fa, nullptr);
  EXPECT_EQ(aa2.alias(Operand::local(fa->params[0].name), Operand::local(fa->params[1].name)),
            AliasVerdict::MayAlias);
}

TEST(Activity, ReluFollowsActiveInput) {
  IrModule m = corpus_module("relu3.ir");
  const IrFunction& f = *m.find_function("relu3");
  TypeEnv env = analyze_types(m);
  ActivityInfo on = analyze_activity(m, "relu3", ActivitySpec::canonical(f), env);
  EXPECT_TRUE(on.is_active("x"));
  EXPECT_TRUE(on.is_active("call"));
  EXPECT_TRUE(on.is_active("res"));
  EXPECT_FALSE(on.is_active("cmp"));

  ActivityInfo off = analyze_activity(m, "relu3", ActivitySpec::parse(f, "const", true), env);
  EXPECT_FALSE(off.is_active("call"));
  EXPECT_FALSE(off.is_active("res"));
}

TEST(Activity, ReadValuesAreInactiveButTheirProductIsNot) {
  IrModule m = corpus_module("sum.ir");
  const IrFunction& f = *m.find_function("sum");
  ActivityInfo info = analyze_activity(m, "sum", ActivitySpec::canonical(f), analyze_types(m));
  EXPECT_FALSE(info.is_active("r"));
  EXPECT_FALSE(info.is_active("i"));
  EXPECT_TRUE(info.is_active("xi"));
  EXPECT_TRUE(info.is_active("total.next"));
  EXPECT_TRUE(info.has_shadow("x"));
  EXPECT_TRUE(info.has_shadow("p"));
  std::string d = dump_activity(info);
  EXPECT_NE(d.find("active values:"), std::string::npos);
}

TEST(Activity, ConstPointerHasNoShadow) {
  IrModule m = corpus_module("norm.ir");
  const IrFunction& f = *m.find_function("norm");
  ActivitySpec spec = ActivitySpec::parse(f, "const,dup,const", false);
  ActivityInfo info = analyze_activity(m, "norm", spec, analyze_types(m));
  EXPECT_FALSE(info.has_shadow("in"));
  EXPECT_FALSE(info.is_active("q"));
}

TEST(ActivitySpecs, ParseCanonicalAndKey) {
  IrModule m = corpus_module("norm.ir");
  const IrFunction& f = *m.find_function("norm");
  ActivitySpec c = ActivitySpec::canonical(f);
  EXPECT_EQ(c.key(), "ddc_c");
  EXPECT_EQ(ActivitySpec::parse(f, "dup,dupnoneed,const", false).key(), "dnc_c");
  EXPECT_THROW(ActivitySpec::parse(f, "dup,dup", false), Error);
  EXPECT_THROW(ActivitySpec::parse(f, "active,dup,const", false), Error);
  EXPECT_THROW(ActivitySpec::parse(f, "dup,bogus,const", false), Error);
}

}  // namespace
}  // namespace adjointc
