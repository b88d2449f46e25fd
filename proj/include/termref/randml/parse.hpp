#pragma once

#include <cctype>
#include <cstdint>
#include <string>
#include <vector>

#include "termref/common.hpp"
#include "termref/randml/ast.hpp"

namespace termref::randml {

// Concrete syntax (see the repository grammar file for the full token set):
//
//   rec f x = e        fun x -> e          let x = e1 in e2      e1; e2
//   if c then a else b                     while e1 do e2 end
//   ref e    !e    e1 <- e2                rand N    rand N @l   alloctape N
//   flip     flip @l                       (e1, e2)  fst e  snd e
//   inl e    inr e     match e with inl x -> e1 | inr y -> e2 end
//   + - *    == != < <= > >=               # line comment
//
// Binders may be identifiers, `_`, `()`, or (nested) tuple patterns.
// Tuples (e1, e2, e3) nest to the right.  Desugaring introduces fresh
// identifiers of the shape %<digits>; such identifiers are accepted by the
// lexer but are reserved for generated code.
//
// Pattern mode (used by refinement certificates only) additionally accepts
// integer holes ${name} and the literal forms loc(i) / lbl(i).

namespace lex {

enum class Tok : std::uint8_t {
  Int, Ident, Hole,
  KwRec, KwFun, KwLet, KwIn, KwIf, KwThen, KwElse, KwWhile, KwDo, KwEnd,
  KwMatch, KwWith, KwFst, KwSnd, KwInl, KwInr, KwRef, KwRand, KwAllocTape,
  KwFlip, KwTrue, KwFalse,
  LParen, RParen, Comma, Semi, Bang, At, Pipe, Underscore,
  Arrow, Assign, Eq, EqEq, NotEq, Lt, Le, Gt, Ge, Plus, Minus, Star,
  Eof,
};

struct Token {
  Tok kind;
  std::string text;
  Int ival{};
  int line = 1;
  int col = 1;
};

inline std::vector<Token> tokenize(const std::string& src, bool pattern_mode) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto bump = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k) {
      if (src[i + k] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
    i += n;
  };
  auto error = [&](const std::string& msg) { throw ParseError(msg, line, col); };
  auto push = [&](Tok k, std::string text) {
    out.push_back({k, std::move(text), Int(0), line, col});
  };
  while (i < src.size()) {
    char ch = src[i];
    if (ch == '#') {
      while (i < src.size() && src[i] != '\n') bump(1);
      continue;
    }
    if (std::isspace(static_cast<unsigned char>(ch))) {
      bump(1);
      continue;
    }
    if (std::isdigit(static_cast<unsigned char>(ch))) {
      std::size_t j = i;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      Token t{Tok::Int, src.substr(i, j - i), Int(src.substr(i, j - i)), line, col};
      out.push_back(std::move(t));
      bump(j - i);
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(ch)) || ch == '_' || ch == '%') {
      std::size_t j = i;
      if (ch == '%') {
        ++j;
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
        if (j == i + 1) error("'%' must be followed by digits");
      } else {
        while (j < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_' ||
                src[j] == '\''))
          ++j;
      }
      std::string word = src.substr(i, j - i);
      Tok k = Tok::Ident;
      if (word == "rec") k = Tok::KwRec;
      else if (word == "fun") k = Tok::KwFun;
      else if (word == "let") k = Tok::KwLet;
      else if (word == "in") k = Tok::KwIn;
      else if (word == "if") k = Tok::KwIf;
      else if (word == "then") k = Tok::KwThen;
      else if (word == "else") k = Tok::KwElse;
      else if (word == "while") k = Tok::KwWhile;
      else if (word == "do") k = Tok::KwDo;
      else if (word == "end") k = Tok::KwEnd;
      else if (word == "match") k = Tok::KwMatch;
      else if (word == "with") k = Tok::KwWith;
      else if (word == "fst") k = Tok::KwFst;
      else if (word == "snd") k = Tok::KwSnd;
      else if (word == "inl") k = Tok::KwInl;
      else if (word == "inr") k = Tok::KwInr;
      else if (word == "ref") k = Tok::KwRef;
      else if (word == "rand") k = Tok::KwRand;
      else if (word == "alloctape") k = Tok::KwAllocTape;
      else if (word == "flip") k = Tok::KwFlip;
      else if (word == "true") k = Tok::KwTrue;
      else if (word == "false") k = Tok::KwFalse;
      else if (word == "_") k = Tok::Underscore;
      push(k, word);
      bump(j - i);
      continue;
    }
    if (ch == '$') {
      if (!pattern_mode) error("'$' is only valid inside certificate patterns");
      if (i + 1 >= src.size() || src[i + 1] != '{') error("expected '{' after '$'");
      std::size_t j = i + 2;
      while (j < src.size() && src[j] != '}') ++j;
      if (j >= src.size()) error("unterminated hole '${'");
      std::string name = src.substr(i + 2, j - i - 2);
      if (name.empty()) error("empty hole name");
      push(Tok::Hole, name);
      bump(j + 1 - i);
      continue;
    }
    auto two = [&](char a, char b) {
      return ch == a && i + 1 < src.size() && src[i + 1] == b;
    };
    if (two('-', '>')) { push(Tok::Arrow, "->"); bump(2); continue; }
    if (two('<', '-')) { push(Tok::Assign, "<-"); bump(2); continue; }
    if (two('=', '=')) { push(Tok::EqEq, "=="); bump(2); continue; }
    if (two('!', '=')) { push(Tok::NotEq, "!="); bump(2); continue; }
    if (two('<', '=')) { push(Tok::Le, "<="); bump(2); continue; }
    if (two('>', '=')) { push(Tok::Ge, ">="); bump(2); continue; }
    switch (ch) {
      case '(': push(Tok::LParen, "("); break;
      case ')': push(Tok::RParen, ")"); break;
      case ',': push(Tok::Comma, ","); break;
      case ';': push(Tok::Semi, ";"); break;
      case '!': push(Tok::Bang, "!"); break;
      case '@': push(Tok::At, "@"); break;
      case '|': push(Tok::Pipe, "|"); break;
      case '=': push(Tok::Eq, "="); break;
      case '<': push(Tok::Lt, "<"); break;
      case '>': push(Tok::Gt, ">"); break;
      case '+': push(Tok::Plus, "+"); break;
      case '-': push(Tok::Minus, "-"); break;
      case '*': push(Tok::Star, "*"); break;
      default:
        error(std::string("unexpected character '") + ch + "'");
    }
    bump(1);
  }
  out.push_back({Tok::Eof, "", Int(0), line, col});
  return out;
}

}  // namespace lex

namespace detail {

// Binder patterns: identifier, wildcard, unit, or a (nested) tuple.
struct Binder {
  std::string name;               // when leaf; "_" for wildcard/unit
  std::vector<Binder> parts;      // when tuple
  bool is_tuple() const { return !parts.empty(); }
};

class Parser {
 public:
  Parser(std::vector<lex::Token> toks, bool pattern_mode)
      : toks_(std::move(toks)), pattern_(pattern_mode) {
    // Generated names must not collide with %-identifiers already present
    // (e.g. when re-parsing pretty-printed output).
    for (const auto& t : toks_)
      if (t.kind == lex::Tok::Ident && t.text.size() > 1 && t.text[0] == '%') {
        unsigned long long n = std::stoull(t.text.substr(1));
        if (n + 1 > gensym_) gensym_ = n + 1;
      }
  }

  ExprPtr parse_program() {
    ExprPtr e = expr();
    expect(lex::Tok::Eof, "end of input");
    return e;
  }

 private:
  const lex::Token& peek(int k = 0) const {
    std::size_t i = pos_ + k;
    return i < toks_.size() ? toks_[i] : toks_.back();
  }
  const lex::Token& next() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }
  bool at(lex::Tok k) const { return peek().kind == k; }
  bool eat(lex::Tok k) {
    if (!at(k)) return false;
    next();
    return true;
  }
  const lex::Token& expect(lex::Tok k, const std::string& what) {
    if (!at(k)) fail("expected " + what + ", found '" + peek().text + "'");
    return next();
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError(msg, peek().line, peek().col);
  }

  std::string gensym() { return "%" + std::to_string(gensym_++); }

  Binder binder() {
    using lex::Tok;
    if (at(Tok::Ident)) return {next().text, {}};
    if (eat(Tok::Underscore)) return {"_", {}};
    if (eat(Tok::LParen)) {
      if (eat(Tok::RParen)) return {"_", {}};  // unit pattern
      Binder first = binder();
      if (at(Tok::RParen)) {
        next();
        return first;
      }
      Binder tuple;
      tuple.parts.push_back(std::move(first));
      while (eat(Tok::Comma)) tuple.parts.push_back(binder());
      expect(Tok::RParen, "')'");
      // (a, b, c) nests to the right: (a, (b, c)).
      while (tuple.parts.size() > 2) {
        Binder tail;
        tail.parts.push_back(std::move(tuple.parts[tuple.parts.size() - 2]));
        tail.parts.push_back(std::move(tuple.parts.back()));
        tuple.parts.pop_back();
        tuple.parts.back() = std::move(tail);
      }
      return tuple;
    }
    fail("expected a binder");
  }

  // let <binder> = <bound> in <body>, as an application of a lambda.
  ExprPtr bind_binder(const Binder& b, ExprPtr bound, ExprPtr body) {
    if (!b.is_tuple()) return mk_app(mk_fun(b.name, body), bound);
    std::string tmp = gensym();
    ExprPtr inner = body;
    // Unfold right-to-left so evaluation order is fst before snd.
    inner = bind_binder(b.parts[1], mk_snd(mk_var(tmp)), inner);
    inner = bind_binder(b.parts[0], mk_fst(mk_var(tmp)), inner);
    return mk_app(mk_fun(tmp, inner), bound);
  }

  // fun <binder> -> <body> with pattern support.
  ExprPtr fun_binder(const Binder& b, ExprPtr body) {
    if (!b.is_tuple()) return mk_fun(b.name, body);
    std::string tmp = gensym();
    return mk_fun(tmp, bind_binder(b, mk_var(tmp), body));
  }

  ExprPtr expr() {
    using lex::Tok;
    switch (peek().kind) {
      case Tok::KwLet: {
        next();
        Binder b = binder();
        expect(Tok::Eq, "'='");
        ExprPtr bound = expr();
        expect(Tok::KwIn, "'in'");
        ExprPtr body = expr();
        return bind_binder(b, bound, body);
      }
      case Tok::KwFun: {
        next();
        std::vector<Binder> bs;
        bs.push_back(binder());
        while (!at(Tok::Arrow)) bs.push_back(binder());
        next();  // ->
        ExprPtr body = expr();
        for (auto it = bs.rbegin(); it != bs.rend(); ++it)
          body = fun_binder(*it, body);
        return body;
      }
      case Tok::KwRec: {
        next();
        std::string f = expect(Tok::Ident, "function name").text;
        std::vector<Binder> bs;
        bs.push_back(binder());
        while (!at(Tok::Eq)) bs.push_back(binder());
        next();  // =
        ExprPtr body = expr();
        for (std::size_t k = bs.size(); k-- > 1;) body = fun_binder(bs[k], body);
        if (!bs[0].is_tuple()) return mk_rec(f, bs[0].name, body);
        std::string tmp = gensym();
        return mk_rec(f, tmp, bind_binder(bs[0], mk_var(tmp), body));
      }
      case Tok::KwIf: {
        next();
        ExprPtr c = expr();
        expect(Tok::KwThen, "'then'");
        ExprPtr t = expr();
        expect(Tok::KwElse, "'else'");
        ExprPtr e = expr();
        return mk_if(c, t, e);
      }
      default:
        return seq();
    }
  }

  ExprPtr seq() {
    ExprPtr e = store();
    if (eat(lex::Tok::Semi)) {
      ExprPtr rest = expr();
      return mk_app(mk_fun("_", rest), e);  // e1; e2  ==  let _ = e1 in e2
    }
    return e;
  }

  ExprPtr store() {
    ExprPtr e = cmp();
    if (eat(lex::Tok::Assign)) {
      ExprPtr v = cmp();
      return mk_store(e, v);
    }
    return e;
  }

  ExprPtr cmp() {
    using lex::Tok;
    ExprPtr e = sum();
    BinOpKind op;
    switch (peek().kind) {
      case Tok::EqEq: op = BinOpKind::Eq; break;
      case Tok::NotEq: op = BinOpKind::Ne; break;
      case Tok::Lt: op = BinOpKind::Lt; break;
      case Tok::Le: op = BinOpKind::Le; break;
      case Tok::Gt: op = BinOpKind::Gt; break;
      case Tok::Ge: op = BinOpKind::Ge; break;
      default: return e;
    }
    next();
    return mk_binop(op, e, sum());
  }

  ExprPtr sum() {
    using lex::Tok;
    ExprPtr e = term();
    for (;;) {
      if (eat(Tok::Plus)) e = mk_binop(BinOpKind::Add, e, term());
      else if (eat(Tok::Minus)) e = mk_binop(BinOpKind::Sub, e, term());
      else return e;
    }
  }

  ExprPtr term() {
    ExprPtr e = unary();
    while (eat(lex::Tok::Star)) e = mk_binop(BinOpKind::Mul, e, unary());
    return e;
  }

  ExprPtr unary() {
    if (eat(lex::Tok::Minus)) {
      if (at(lex::Tok::Int)) return mk_int(-next().ival);
      return mk_binop(BinOpKind::Sub, mk_int(0), unary());
    }
    return app();
  }

  bool starts_atom() const {
    using lex::Tok;
    switch (peek().kind) {
      case Tok::Int:
      case Tok::Ident:
      case Tok::KwTrue:
      case Tok::KwFalse:
      case Tok::KwFlip:
      case Tok::LParen:
      case Tok::Bang:
      case Tok::Hole:
        return true;
      default:
        return false;
    }
  }

  // Application arguments are atoms; prefix forms need parentheses there.
  ExprPtr app() {
    ExprPtr e = prim();
    while (starts_atom()) e = mk_app(e, atom());
    return e;
  }

  ExprPtr prim() {
    using lex::Tok;
    switch (peek().kind) {
      case Tok::KwFst: next(); return mk_fst(atom());
      case Tok::KwSnd: next(); return mk_snd(atom());
      case Tok::KwInl: next(); return mk_injl(atom());
      case Tok::KwInr: next(); return mk_injr(atom());
      case Tok::KwRef: next(); return mk_alloc(atom());
      case Tok::KwAllocTape: next(); return mk_alloctape(atom());
      case Tok::KwRand: {
        next();
        ExprPtr bound = atom();
        if (eat(Tok::At)) return mk_rand(bound, atom());
        return mk_rand(bound);
      }
      case Tok::KwWhile: {
        next();
        ExprPtr cond = expr();
        expect(Tok::KwDo, "'do'");
        ExprPtr body = expr();
        expect(Tok::KwEnd, "'end'");
        // while e1 do e2 end  ==  (rec f _ = if e1 then e2; f () else ()) ()
        std::string f = gensym();
        ExprPtr again = mk_app(mk_fun("_", mk_app(mk_var(f), mk_unit())), body);
        ExprPtr loop = mk_rec(f, "_", mk_if(cond, again, mk_unit()));
        return mk_app(loop, mk_unit());
      }
      case Tok::KwMatch: {
        next();
        ExprPtr scrut = expr();
        expect(Tok::KwWith, "'with'");
        eat(Tok::Pipe);
        expect(Tok::KwInl, "'inl'");
        Binder bl = binder();
        expect(Tok::Arrow, "'->'");
        ExprPtr el = expr();
        expect(Tok::Pipe, "'|'");
        expect(Tok::KwInr, "'inr'");
        Binder br = binder();
        expect(Tok::Arrow, "'->'");
        ExprPtr er = expr();
        expect(Tok::KwEnd, "'end'");
        std::string xl = bl.is_tuple() ? gensym() : bl.name;
        std::string xr = br.is_tuple() ? gensym() : br.name;
        if (bl.is_tuple()) el = bind_binder(bl, mk_var(xl), el);
        if (br.is_tuple()) er = bind_binder(br, mk_var(xr), er);
        return mk_match(scrut, xl, el, xr, er);
      }
      default:
        return atom();
    }
  }

  ExprPtr atom() {
    using lex::Tok;
    switch (peek().kind) {
      case Tok::Int: return mk_int(next().ival);
      case Tok::KwTrue: next(); return mk_bool(true);
      case Tok::KwFalse: next(); return mk_bool(false);
      case Tok::Hole: {
        if (!pattern_) fail("holes are only valid in certificate patterns");
        return mk_int_hole(next().text);
      }
      case Tok::Ident: {
        std::string name = next().text;
        if (pattern_ && (name == "loc" || name == "lbl") && at(Tok::LParen)) {
          next();
          Int idx = expect(Tok::Int, "location index").ival;
          expect(Tok::RParen, "')'");
          auto i = idx.convert_to<std::uint64_t>();
          return name == "loc" ? mk_loc(i) : mk_lbl(i);
        }
        return mk_var(name);
      }
      case Tok::KwFlip: {
        // flip  ==  rand 1 == 1      flip @l  ==  rand 1 @l == 1
        next();
        ExprPtr r = eat(Tok::At) ? mk_rand(mk_int(1), atom()) : mk_rand(mk_int(1));
        return mk_binop(BinOpKind::Eq, r, mk_int(1));
      }
      case Tok::Bang: next(); return mk_load(atom());
      case Tok::LParen: {
        next();
        if (eat(Tok::RParen)) return mk_unit();
        ExprPtr first = expr();
        if (at(Tok::RParen)) {
          next();
          return first;
        }
        std::vector<ExprPtr> parts{first};
        while (eat(Tok::Comma)) parts.push_back(expr());
        expect(Tok::RParen, "')'");
        ExprPtr e = parts.back();
        for (std::size_t k = parts.size() - 1; k-- > 0;) e = mk_pair(parts[k], e);
        return e;
      }
      case Tok::Underscore:
        fail("'_' cannot be used as an expression");
      default:
        fail("expected an expression, found '" + peek().text + "'");
    }
  }

  std::vector<lex::Token> toks_;
  bool pattern_;
  std::size_t pos_ = 0;
  unsigned long long gensym_ = 0;
};

}  // namespace detail

/// Parses a RandML program.  Throws ParseError with line/column on failure.
inline ExprPtr parse(const std::string& source) {
  detail::Parser p(lex::tokenize(source, false), false);
  return p.parse_program();
}

/// Parses a certificate pattern: same grammar plus ${name} integer holes and
/// loc(i) / lbl(i) literals.
inline ExprPtr parse_pattern(const std::string& source) {
  detail::Parser p(lex::tokenize(source, true), true);
  return p.parse_program();
}

}  // namespace termref::randml
