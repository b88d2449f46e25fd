#pragma once

#include <string>

#include "termref/randml/ast.hpp"

namespace termref::randml {

namespace detail {

// Print levels mirror the parser's precedence ladder.  A node is
// parenthesized whenever its natural level is below the minimum its context
// demands, so parse(print(e)) == e.
enum Level : int {
  kOpen = 0,   // fun, rec, if, let
  kSeq = 1,
  kStore = 2,
  kCmp = 3,
  kSum = 4,
  kMul = 5,
  kUnary = 6,
  kApp = 7,
  kAtom = 8,
};

inline void print_rec(ExprPtr e, int min_level, std::string& out);

inline void print_at(ExprPtr e, int natural, int min_level, std::string& out,
                     const char* text) {
  if (natural < min_level) {
    out += '(';
    out += text;
    out += ')';
  } else {
    out += text;
  }
}

inline void print_child(ExprPtr e, int min_level, std::string& out) {
  print_rec(e, min_level, out);
}

inline void print_rec(ExprPtr e, int min_level, std::string& out) {
  auto wrap = [&](int natural, auto&& body) {
    if (natural < min_level) {
      out += '(';
      body();
      out += ')';
    } else {
      body();
    }
  };
  switch (e->kind) {
    case ExprKind::Int:
      if (e->ival < 0) {
        wrap(kUnary, [&] { out += e->ival.str(); });
      } else {
        out += e->ival.str();
      }
      return;
    case ExprKind::Bool:
      out += e->bval ? "true" : "false";
      return;
    case ExprKind::Unit:
      out += "()";
      return;
    case ExprKind::Loc:
      out += "loc(" + std::to_string(e->idx) + ")";
      return;
    case ExprKind::Lbl:
      out += "lbl(" + std::to_string(e->idx) + ")";
      return;
    case ExprKind::Var:
      out += e->s1;
      return;
    case ExprKind::IntHole:
      out += "${" + e->s1 + "}";
      return;
    case ExprKind::Pair:
      out += '(';
      print_child(e->a, kOpen, out);
      out += ", ";
      print_child(e->b, kOpen, out);
      out += ')';
      return;
    case ExprKind::Load:
      out += '!';
      print_child(e->a, kAtom, out);
      return;
    case ExprKind::Rec:
      wrap(kOpen, [&] {
        if (e->s1 == "_") {
          out += "fun " + e->s2 + " -> ";
        } else {
          out += "rec " + e->s1 + " " + e->s2 + " = ";
        }
        print_child(e->a, kOpen, out);
      });
      return;
    case ExprKind::App: {
      // let-bound and sequenced forms read better in their sugared syntax;
      // both re-parse to this exact application.
      if (e->a->kind == ExprKind::Rec && e->a->s1 == "_") {
        if (e->a->s2 == "_") {
          wrap(kSeq, [&] {
            print_child(e->b, kStore, out);
            out += "; ";
            print_child(e->a->a, kSeq, out);
          });
        } else {
          wrap(kOpen, [&] {
            out += "let " + e->a->s2 + " = ";
            print_child(e->b, kOpen, out);
            out += " in ";
            print_child(e->a->a, kOpen, out);
          });
        }
        return;
      }
      wrap(kApp, [&] {
        print_child(e->a, kApp, out);
        out += ' ';
        print_child(e->b, kAtom, out);
      });
      return;
    }
    case ExprKind::If:
      wrap(kOpen, [&] {
        out += "if ";
        print_child(e->a, kOpen, out);
        out += " then ";
        print_child(e->b, kOpen, out);
        out += " else ";
        print_child(e->c, kOpen, out);
      });
      return;
    case ExprKind::BinOp: {
      BinOpKind op = e->op;
      int lvl, left_min, right_min;
      switch (op) {
        case BinOpKind::Mul: lvl = kMul; left_min = kMul; right_min = kUnary; break;
        case BinOpKind::Add:
        case BinOpKind::Sub: lvl = kSum; left_min = kSum; right_min = kMul; break;
        default: lvl = kCmp; left_min = kSum; right_min = kSum; break;
      }
      wrap(lvl, [&] {
        print_child(e->a, left_min, out);
        out += ' ';
        out += binop_symbol(op);
        out += ' ';
        print_child(e->b, right_min, out);
      });
      return;
    }
    case ExprKind::Store:
      wrap(kStore, [&] {
        print_child(e->a, kCmp, out);
        out += " <- ";
        print_child(e->b, kCmp, out);
      });
      return;
    case ExprKind::Fst:
      wrap(kApp, [&] {
        out += "fst ";
        print_child(e->a, kAtom, out);
      });
      return;
    case ExprKind::Snd:
      wrap(kApp, [&] {
        out += "snd ";
        print_child(e->a, kAtom, out);
      });
      return;
    case ExprKind::InjL:
      wrap(kApp, [&] {
        out += "inl ";
        print_child(e->a, kAtom, out);
      });
      return;
    case ExprKind::InjR:
      wrap(kApp, [&] {
        out += "inr ";
        print_child(e->a, kAtom, out);
      });
      return;
    case ExprKind::Alloc:
      wrap(kApp, [&] {
        out += "ref ";
        print_child(e->a, kAtom, out);
      });
      return;
    case ExprKind::AllocTape:
      wrap(kApp, [&] {
        out += "alloctape ";
        print_child(e->a, kAtom, out);
      });
      return;
    case ExprKind::Rand:
      wrap(kApp, [&] {
        out += "rand ";
        print_child(e->a, kAtom, out);
        if (e->b) {
          out += " @";
          print_child(e->b, kAtom, out);
        }
      });
      return;
    case ExprKind::Match:
      wrap(kApp, [&] {
        out += "match ";
        print_child(e->a, kOpen, out);
        out += " with inl " + e->s1 + " -> ";
        print_child(e->b, kOpen, out);
        out += " | inr " + e->s2 + " -> ";
        print_child(e->c, kOpen, out);
        out += " end";
      });
      return;
  }
}

}  // namespace detail

/// Renders an expression in concrete syntax with minimal parentheses.
/// Desugared forms stay desugared except let / sequencing, which re-parse to
/// the same tree.
inline std::string pretty(ExprPtr e) {
  std::string out;
  detail::print_rec(e, detail::kOpen, out);
  return out;
}

inline std::string pretty(const State& s) {
  std::string out = "{";
  bool first = true;
  for (const auto& [l, v] : s.heap) {
    if (!first) out += ", ";
    first = false;
    out += "loc(" + std::to_string(l) + ") = " + pretty(v);
  }
  for (const auto& [l, t] : s.tapes) {
    if (!first) out += ", ";
    first = false;
    out += "lbl(" + std::to_string(l) + ") = (" + std::to_string(t.bound) + "; [";
    for (std::size_t i = 0; i < t.queue.size(); ++i) {
      if (i) out += ", ";
      out += std::to_string(t.queue[i]);
    }
    out += "])";
  }
  out += "}";
  return out;
}

inline std::string pretty(const Config& c) {
  return pretty(c.expr) + "  |  " + pretty(c.state);
}

}  // namespace termref::randml
