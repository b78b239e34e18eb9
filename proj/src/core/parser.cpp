// Copyright 2026 The adjointc Authors
// SPDX-License-Identifier: Apache-2.0

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "adjointc/error.hpp"
#include "adjointc/text.hpp"

namespace adjointc {
namespace {

enum class Tok { Ident, Local, GlobalRef, Number, Meta, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 1;
  int col = 1;
};

bool is_name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$';
}

std::vector<Token> tokenize(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  size_t i = 0;
  auto advance = [&](size_t n) {
    for (size_t k = 0; k < n; ++k) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
      ++i;
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == ';') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    size_t start = i;
    if (c == '%' || c == '@' || c == '!') {
      advance(1);
      while (i < src.size() && is_name_char(src[i])) advance(1);
      t.kind = c == '%' ? Tok::Local : c == '@' ? Tok::GlobalRef : Tok::Meta;
      t.text = std::string(src.substr(start + 1, i - start - 1));
      if (t.text.empty()) throw ParseError(t.line, t.col, "empty name after '" + std::string(1, c) + "'");
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               ((c == '-' || c == '+') && i + 1 < src.size() &&
                (std::isdigit(static_cast<unsigned char>(src[i + 1])) || src[i + 1] == 'i' ||
                 src[i + 1] == 'n'))) {
      advance(1);
      while (i < src.size()) {
        char d = src[i];
        if (std::isalnum(static_cast<unsigned char>(d)) || d == '.' ||
            ((d == '-' || d == '+') && (src[i - 1] == 'e' || src[i - 1] == 'E'))) {
          advance(1);
        } else {
          break;
        }
      }
      t.kind = Tok::Number;
      t.text = std::string(src.substr(start, i - start));
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      while (i < src.size() && is_name_char(src[i])) advance(1);
      t.kind = Tok::Ident;
      t.text = std::string(src.substr(start, i - start));
    } else if (std::string_view("(){}[],=:").find(c) != std::string_view::npos) {
      advance(1);
      t.kind = Tok::Punct;
      t.text = std::string(1, c);
    } else {
      throw ParseError(line, col, std::string("unexpected character '") + c + "'");
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  IrModule parse() {
    IrModule m;
    std::set<std::string> names;
    while (peek().kind != Tok::End) {
      const Token& t = peek();
      if (is_ident("define") || is_ident("declare")) {
        IrFunction f = parse_function();
        if (!names.insert(f.name).second)
          throw ParseError(t.line, t.col, "duplicate definition of @" + f.name);
        m.functions.push_back(std::move(f));
      } else if (is_ident("global")) {
        Global g = parse_global();
        if (!names.insert(g.name).second)
          throw ParseError(t.line, t.col, "duplicate definition of @" + g.name);
        m.globals.push_back(std::move(g));
      } else if (is_ident("custom_adjoint")) {
        next();
        std::string fn = expect(Tok::GlobalRef, "function name").text;
        expect_punct("=");
        expect_punct("(");
        CustomAdjoint ca;
        ca.augmented = expect(Tok::GlobalRef, "augmented function").text;
        expect_punct(",");
        ca.gradient = expect(Tok::GlobalRef, "gradient function").text;
        expect_punct(")");
        if (!m.custom_adjoints.emplace(fn, ca).second)
          throw ParseError(t.line, t.col, "duplicate custom_adjoint for @" + fn);
      } else {
        throw ParseError(t.line, t.col, "expected 'define', 'declare', 'global' or "
                                        "'custom_adjoint', found '" + t.text + "'");
      }
    }
    return m;
  }

 private:
  const Token& peek(size_t k = 0) const {
    size_t idx = std::min(pos_ + k, toks_.size() - 1);
    return toks_[idx];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool is_ident(std::string_view s, size_t k = 0) const {
    return peek(k).kind == Tok::Ident && peek(k).text == s;
  }
  bool is_punct(std::string_view s, size_t k = 0) const {
    return peek(k).kind == Tok::Punct && peek(k).text == s;
  }
  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    throw ParseError(t.line, t.col, msg);
  }
  const Token& expect(Tok kind, const char* what) {
    if (peek().kind != kind) fail(peek(), std::string("expected ") + what + ", found '" + peek().text + "'");
    return next();
  }
  void expect_punct(std::string_view s) {
    if (!is_punct(s)) fail(peek(), "expected '" + std::string(s) + "', found '" + peek().text + "'");
    next();
  }
  bool accept_punct(std::string_view s) {
    if (!is_punct(s)) return false;
    next();
    return true;
  }

  IrType parse_type_tok(bool allow_void = false) {
    const Token& t = peek();
    if (t.kind != Tok::Ident) fail(t, "expected type, found '" + t.text + "'");
    auto ty = parse_type(t.text);
    if (!ty) fail(t, "unknown type '" + t.text + "'");
    if (ty->is_void() && !allow_void) fail(t, "void is not a value type");
    next();
    return *ty;
  }

  static double parse_double(const std::string& s, bool& ok) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan" || s == "+nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "-nan") return -std::numeric_limits<double>::quiet_NaN();
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    ok = end && *end == '\0';
    return v;
  }

  Operand parse_operand() {
    const Token& t = peek();
    switch (t.kind) {
      case Tok::Local: next(); return Operand::local(t.text);
      case Tok::GlobalRef: next(); return Operand::global(t.text);
      case Tok::Number: {
        next();
        const std::string& s = t.text;
        bool floaty = s.find_first_of(".eEni") != std::string::npos;
        if (!floaty) {
          char* end = nullptr;
          long long v = std::strtoll(s.c_str(), &end, 10);
          if (!end || *end != '\0') fail(t, "malformed integer literal '" + s + "'");
          return Operand::int_lit(v);
        }
        bool ok = true;
        double v = parse_double(s, ok);
        if (!ok) fail(t, "malformed float literal '" + s + "'");
        return Operand::float_lit(v);
      }
      case Tok::Ident:
        if (t.text == "true") { next(); return Operand::int_lit(1); }
        if (t.text == "false") { next(); return Operand::int_lit(0); }
        if (t.text == "null") { next(); return Operand::null(); }
        if (t.text == "inf" || t.text == "nan") {
          next();
          bool ok = true;
          return Operand::float_lit(parse_double(t.text, ok));
        }
        [[fallthrough]];
      default:
        fail(t, "expected operand, found '" + t.text + "'");
    }
  }

  std::string parse_label_ref() {
    const Token& t = peek();
    if (t.kind != Tok::Local) fail(t, "expected block label '%name', found '" + t.text + "'");
    next();
    return t.text;
  }

  Global parse_global() {
    next();  // global
    Global g;
    g.name = expect(Tok::GlobalRef, "global name").text;
    expect_punct("=");
    expect_punct("[");
    if (!is_punct("]")) {
      do {
        GlobalElem e;
        e.type = parse_type_tok();
        e.value = parse_operand();
        if (e.value.is_local()) fail(peek(), "global initializers must be constants");
        g.elems.push_back(std::move(e));
      } while (accept_punct(","));
    }
    expect_punct("]");
    return g;
  }

  IrFunction parse_function() {
    bool is_decl = peek().text == "declare";
    next();
    IrFunction f;
    f.is_declaration = is_decl;
    f.ret_type = parse_type_tok(/*allow_void=*/true);
    f.name = expect(Tok::GlobalRef, "function name").text;
    expect_punct("(");
    if (!is_punct(")")) {
      do {
        Param p;
        p.type = parse_type_tok();
        p.name = expect(Tok::Local, "parameter name").text;
        while (peek().kind == Tok::Ident && (peek().text == "noalias" || peek().text == "readonly")) {
          if (next().text == "noalias") p.noalias = true; else p.readonly = true;
        }
        f.params.push_back(std::move(p));
      } while (accept_punct(","));
    }
    expect_punct(")");
    while (peek().kind == Tok::Ident && (peek().text == "fast" || peek().text == "readonly")) {
      if (next().text == "fast") f.fast = true; else f.readonly = true;
    }
    if (is_decl) return f;
    expect_punct("{");
    while (!is_punct("}")) {
      const Token& lt = peek();
      if (lt.kind != Tok::Ident || !is_punct(":", 1)) fail(lt, "expected block label, found '" + lt.text + "'");
      BasicBlock bb;
      bb.label = lt.text;
      next();
      next();
      while (!is_punct("}") && !(peek().kind == Tok::Ident && is_punct(":", 1))) {
        if (peek().kind == Tok::End) fail(peek(), "unexpected end of input inside @" + f.name);
        bb.insts.push_back(parse_instruction());
      }
      f.blocks.push_back(std::move(bb));
    }
    expect_punct("}");
    if (f.blocks.empty()) fail(peek(), "function @" + f.name + " has no blocks");
    return f;
  }

  void parse_call_args(Instruction& inst, bool allow_tokens) {
    expect_punct("(");
    if (!is_punct(")")) {
      do {
        std::optional<ActivityToken> tok;
        if (allow_tokens && peek().kind == Tok::Ident) {
          if (auto at = parse_token(peek().text)) {
            tok = at;
            next();
          }
        }
        if (allow_tokens && peek().kind == Tok::GlobalRef && inst.operands.empty() && !tok) {
          // differentiated function reference
          inst.arg_types.push_back(TypeKind::Ptr);
        } else {
          inst.arg_types.push_back(parse_type_tok());
        }
        inst.operands.push_back(parse_operand());
        inst.arg_tokens.push_back(tok);
      } while (accept_punct(","));
    }
    expect_punct(")");
    if (!allow_tokens) inst.arg_tokens.clear();
  }

  Instruction parse_instruction() {
    Instruction inst;
    const Token& first = peek();
    inst.line = first.line;
    if (first.kind == Tok::Local) {
      inst.result = first.text;
      next();
      expect_punct("=");
    }
    const Token& opt = peek();
    if (opt.kind != Tok::Ident) fail(opt, "expected opcode, found '" + opt.text + "'");
    auto op = parse_opcode(opt.text);
    if (!op) fail(opt, "unknown opcode '" + opt.text + "'");
    next();
    inst.op = *op;
    bool needs_result = true;
    switch (inst.op) {
      case Opcode::FAdd: case Opcode::FSub: case Opcode::FMul: case Opcode::FDiv:
      case Opcode::IAdd: case Opcode::ISub: case Opcode::IMul: case Opcode::SDiv:
      case Opcode::Pow:
        inst.type = parse_type_tok();
        inst.operands.push_back(parse_operand());
        expect_punct(",");
        inst.operands.push_back(parse_operand());
        break;
      case Opcode::FNeg: case Opcode::Sin: case Opcode::Cos: case Opcode::Exp:
      case Opcode::Log: case Opcode::Sqrt: case Opcode::Fabs: case Opcode::SIToFP:
        inst.type = parse_type_tok();
        inst.operands.push_back(parse_operand());
        break;
      case Opcode::Read:
        inst.type = parse_type_tok();
        break;
      case Opcode::ICmp: case Opcode::FCmp: {
        const Token& pt = peek();
        auto p = parse_predicate(pt.text);
        if (pt.kind != Tok::Ident || !p) fail(pt, "unknown predicate '" + pt.text + "'");
        next();
        inst.pred = *p;
        IrType operand_ty = parse_type_tok();
        inst.arg_types.push_back(operand_ty);
        inst.type = TypeKind::I1;
        inst.operands.push_back(parse_operand());
        expect_punct(",");
        inst.operands.push_back(parse_operand());
        break;
      }
      case Opcode::Select:
        inst.type = parse_type_tok();
        for (int k = 0; k < 3; ++k) {
          if (k) expect_punct(",");
          inst.operands.push_back(parse_operand());
        }
        break;
      case Opcode::Phi:
        inst.type = parse_type_tok();
        do {
          expect_punct("[");
          inst.operands.push_back(parse_operand());
          expect_punct(",");
          inst.labels.push_back(parse_label_ref());
          expect_punct("]");
        } while (accept_punct(","));
        break;
      case Opcode::Br:
        needs_result = false;
        inst.labels.push_back(parse_label_ref());
        break;
      case Opcode::CondBr:
        needs_result = false;
        inst.operands.push_back(parse_operand());
        expect_punct(",");
        inst.labels.push_back(parse_label_ref());
        expect_punct(",");
        inst.labels.push_back(parse_label_ref());
        break;
      case Opcode::Ret:
        needs_result = false;
        inst.type = parse_type_tok(/*allow_void=*/true);
        if (!inst.type.is_void()) inst.operands.push_back(parse_operand());
        break;
      case Opcode::Call: {
        inst.type = parse_type_tok(/*allow_void=*/true);
        inst.callee = expect(Tok::GlobalRef, "callee").text;
        parse_call_args(inst, inst.callee == kAutodiffIntrinsic);
        needs_result = !inst.type.is_void();
        break;
      }
      case Opcode::CallInd:
        inst.type = parse_type_tok(/*allow_void=*/true);
        inst.operands.push_back(parse_operand());
        inst.arg_types.push_back(TypeKind::Ptr);
        parse_call_args(inst, false);
        needs_result = !inst.type.is_void();
        break;
      case Opcode::Alloc:
        inst.type = TypeKind::Ptr;
        inst.operands.push_back(parse_operand());
        break;
      case Opcode::Free:
        needs_result = false;
        inst.operands.push_back(parse_operand());
        break;
      case Opcode::Load:
        inst.type = parse_type_tok();
        inst.operands.push_back(parse_operand());
        break;
      case Opcode::Store:
        needs_result = false;
        inst.type = parse_type_tok();
        inst.operands.push_back(parse_operand());
        expect_punct(",");
        inst.operands.push_back(parse_operand());
        break;
      case Opcode::Memcpy:
        needs_result = false;
        for (int k = 0; k < 3; ++k) {
          if (k) expect_punct(",");
          inst.operands.push_back(parse_operand());
        }
        break;
      case Opcode::PtrAdd:
        inst.type = TypeKind::Ptr;
        inst.operands.push_back(parse_operand());
        expect_punct(",");
        inst.operands.push_back(parse_operand());
        break;
    }
    while (peek().kind == Tok::Meta) {
      const Token& mt = next();
      if (mt.text.rfind("tbaa.", 0) == 0) {
        auto b = parse_tbaa(mt.text.substr(5));
        if (!b) fail(mt, "unknown tbaa base '" + mt.text.substr(5) + "'");
        if (inst.op != Opcode::Load && inst.op != Opcode::Store && inst.op != Opcode::Memcpy)
          fail(mt, "!tbaa is only allowed on load, store and memcpy");
        inst.tbaa = b;
      } else if (mt.text == "tape") {
        inst.flags |= kFlagTape;
      } else if (mt.text == "ctl") {
        inst.flags |= kFlagCtl;
      } else {
        fail(mt, "unknown metadata '!" + mt.text + "'");
      }
    }
    if (needs_result && inst.result.empty())
      fail(opt, std::string(opcode_name(inst.op)) + " produces a value and needs a '%name ='");
    if (!needs_result && !inst.result.empty())
      fail(opt, std::string(opcode_name(inst.op)) + " produces no value");
    return inst;
  }

  std::vector<Token> toks_;
  size_t pos_ = 0;
};

}  // namespace

IrModule parse_module(std::string_view text, bool validate_result) {
  Parser p(tokenize(text));
  IrModule m = p.parse();
  if (validate_result) validate_or_throw(m);
  return m;
}

void merge_module(IrModule& into, IrModule from) {
  for (auto& f : from.functions) {
    IrFunction* existing = into.find_function(f.name);
    if (!existing) {
      into.functions.push_back(std::move(f));
      continue;
    }
    if (existing->is_declaration && !f.is_declaration) {
      *existing = std::move(f);
    } else if (!f.is_declaration) {
      throw Error(ErrorCode::Validation, "duplicate definition of @" + f.name);
    }
  }
  for (auto& g : from.globals) {
    if (into.find_global(g.name)) throw Error(ErrorCode::Validation, "duplicate global @" + g.name);
    into.globals.push_back(std::move(g));
  }
  for (auto& [k, v] : from.custom_adjoints) {
    if (!into.custom_adjoints.emplace(k, v).second)
      throw Error(ErrorCode::Validation, "duplicate custom_adjoint for @" + k);
  }
}

IrModule parse_sources(const std::vector<std::string>& texts) {
  IrModule m;
  for (const auto& t : texts) merge_module(m, parse_module(t, /*validate_result=*/false));
  validate_or_throw(m);
  return m;
}

IrModule parse_files(const std::vector<std::string>& paths) {
  std::vector<std::string> texts;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    texts.push_back(ss.str());
  }
  return parse_sources(texts);
}

}  // namespace adjointc
