#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

#include "termref/rational.hpp"
#include "termref/subdist.hpp"

namespace termref::randml {

enum class ExprKind : std::uint8_t {
  Int,
  Bool,
  Unit,
  Loc,
  Lbl,
  Var,
  Rec,   // rec f x = e; values
  Pair,
  InjL,
  InjR,
  BinOp,
  App,
  If,
  Fst,
  Snd,
  Match,  // match a with inl s1 -> b | inr s2 -> c end
  Alloc,
  Load,
  Store,
  Rand,      // a = bound, b = optional tape label
  AllocTape,
  IntHole,  // ${name}; only inside certificate patterns, never executable
};

enum class BinOpKind : std::uint8_t { Add, Sub, Mul, Eq, Ne, Lt, Le, Gt, Ge };

inline const char* binop_symbol(BinOpKind op) {
  switch (op) {
    case BinOpKind::Add: return "+";
    case BinOpKind::Sub: return "-";
    case BinOpKind::Mul: return "*";
    case BinOpKind::Eq: return "==";
    case BinOpKind::Ne: return "!=";
    case BinOpKind::Lt: return "<";
    case BinOpKind::Le: return "<=";
    case BinOpKind::Gt: return ">";
    case BinOpKind::Ge: return ">=";
  }
  return "?";
}

struct Expr;
/// Interned: equal pointers iff structurally equal nodes.  Nodes live for the
/// duration of the process.
using ExprPtr = const Expr*;

struct Expr {
  ExprKind kind;
  BinOpKind op{BinOpKind::Add};
  bool bval{false};
  std::uint64_t idx{0};  // Loc / Lbl index
  Int ival{};
  std::string s1{};  // Var name; Rec f; Match inl binder; IntHole name
  std::string s2{};  // Rec x; Match inr binder
  ExprPtr a{nullptr};
  ExprPtr b{nullptr};
  ExprPtr c{nullptr};

  // Derived, filled in by the intern pool.
  std::size_t hash{0};
  bool is_value{false};
  bool has_hole{false};
  std::uint64_t fv_mask{0};  // over-approximate bloom filter of free names

  friend bool operator==(const Expr& x, const Expr& y) {
    return x.kind == y.kind && x.op == y.op && x.bval == y.bval &&
           x.idx == y.idx && x.a == y.a && x.b == y.b && x.c == y.c &&
           x.s1 == y.s1 && x.s2 == y.s2 && x.ival == y.ival;
  }
};

namespace detail {

inline std::uint64_t name_bit(const std::string& name) {
  return 1ull << (std::hash<std::string>{}(name) & 63u);
}

struct ExprHash {
  std::size_t operator()(const Expr& e) const { return e.hash; }
};

inline std::size_t content_hash(const Expr& e) {
  std::size_t h = static_cast<std::size_t>(e.kind) * 0x9e3779b97f4a7c15ull;
  boost::hash_combine(h, static_cast<int>(e.op));
  boost::hash_combine(h, e.bval);
  boost::hash_combine(h, e.idx);
  if (e.kind == ExprKind::Int) boost::hash_combine(h, e.ival);
  boost::hash_combine(h, e.s1);
  boost::hash_combine(h, e.s2);
  boost::hash_combine(h, e.a);
  boost::hash_combine(h, e.b);
  boost::hash_combine(h, e.c);
  return h;
}

}  // namespace detail

/// Hash-consing pool.  All Expr construction funnels through `intern`, so
/// structural equality of expressions is pointer equality.
inline ExprPtr intern(Expr&& e) {
  e.hash = detail::content_hash(e);
  switch (e.kind) {
    case ExprKind::Int:
    case ExprKind::Bool:
    case ExprKind::Unit:
    case ExprKind::Loc:
    case ExprKind::Lbl:
    case ExprKind::Rec:
      e.is_value = true;
      break;
    case ExprKind::Pair:
      e.is_value = e.a->is_value && e.b->is_value;
      break;
    case ExprKind::InjL:
    case ExprKind::InjR:
      e.is_value = e.a->is_value;
      break;
    default:
      e.is_value = false;
  }
  e.fv_mask = 0;
  e.has_hole = e.kind == ExprKind::IntHole;
  for (ExprPtr child : {e.a, e.b, e.c}) {
    if (!child) continue;
    e.fv_mask |= child->fv_mask;
    e.has_hole = e.has_hole || child->has_hole;
  }
  if (e.kind == ExprKind::Var) e.fv_mask |= detail::name_bit(e.s1);
  // Binders are not subtracted from the mask; it stays an over-approximation.

  static std::unordered_set<Expr, detail::ExprHash> pool;
  static std::mutex mutex;
  std::lock_guard<std::mutex> lock(mutex);
  return &*pool.insert(std::move(e)).first;
}

inline ExprPtr mk_int(Int v) {
  Expr e{ExprKind::Int};
  e.ival = std::move(v);
  return intern(std::move(e));
}
inline ExprPtr mk_int(long long v) { return mk_int(Int(v)); }
inline ExprPtr mk_bool(bool v) {
  Expr e{ExprKind::Bool};
  e.bval = v;
  return intern(std::move(e));
}
inline ExprPtr mk_unit() { return intern(Expr{ExprKind::Unit}); }
inline ExprPtr mk_loc(std::uint64_t i) {
  Expr e{ExprKind::Loc};
  e.idx = i;
  return intern(std::move(e));
}
inline ExprPtr mk_lbl(std::uint64_t i) {
  Expr e{ExprKind::Lbl};
  e.idx = i;
  return intern(std::move(e));
}
inline ExprPtr mk_var(std::string name) {
  Expr e{ExprKind::Var};
  e.s1 = std::move(name);
  return intern(std::move(e));
}
inline ExprPtr mk_rec(std::string f, std::string x, ExprPtr body) {
  Expr e{ExprKind::Rec};
  e.s1 = std::move(f);
  e.s2 = std::move(x);
  e.a = body;
  return intern(std::move(e));
}
/// fun x -> e, i.e. rec _ x = e.
inline ExprPtr mk_fun(std::string x, ExprPtr body) {
  return mk_rec("_", std::move(x), body);
}
inline ExprPtr mk_pair(ExprPtr a, ExprPtr b) {
  Expr e{ExprKind::Pair};
  e.a = a;
  e.b = b;
  return intern(std::move(e));
}
inline ExprPtr mk_injl(ExprPtr a) {
  Expr e{ExprKind::InjL};
  e.a = a;
  return intern(std::move(e));
}
inline ExprPtr mk_injr(ExprPtr a) {
  Expr e{ExprKind::InjR};
  e.a = a;
  return intern(std::move(e));
}
inline ExprPtr mk_binop(BinOpKind op, ExprPtr a, ExprPtr b) {
  Expr e{ExprKind::BinOp};
  e.op = op;
  e.a = a;
  e.b = b;
  return intern(std::move(e));
}
inline ExprPtr mk_app(ExprPtr f, ExprPtr arg) {
  Expr e{ExprKind::App};
  e.a = f;
  e.b = arg;
  return intern(std::move(e));
}
inline ExprPtr mk_if(ExprPtr cond, ExprPtr then_e, ExprPtr else_e) {
  Expr e{ExprKind::If};
  e.a = cond;
  e.b = then_e;
  e.c = else_e;
  return intern(std::move(e));
}
inline ExprPtr mk_fst(ExprPtr a) {
  Expr e{ExprKind::Fst};
  e.a = a;
  return intern(std::move(e));
}
inline ExprPtr mk_snd(ExprPtr a) {
  Expr e{ExprKind::Snd};
  e.a = a;
  return intern(std::move(e));
}
inline ExprPtr mk_match(ExprPtr scrut, std::string xl, ExprPtr el,
                        std::string xr, ExprPtr er) {
  Expr e{ExprKind::Match};
  e.a = scrut;
  e.s1 = std::move(xl);
  e.b = el;
  e.s2 = std::move(xr);
  e.c = er;
  return intern(std::move(e));
}
inline ExprPtr mk_alloc(ExprPtr a) {
  Expr e{ExprKind::Alloc};
  e.a = a;
  return intern(std::move(e));
}
inline ExprPtr mk_load(ExprPtr a) {
  Expr e{ExprKind::Load};
  e.a = a;
  return intern(std::move(e));
}
inline ExprPtr mk_store(ExprPtr target, ExprPtr value) {
  Expr e{ExprKind::Store};
  e.a = target;
  e.b = value;
  return intern(std::move(e));
}
inline ExprPtr mk_rand(ExprPtr bound, ExprPtr label = nullptr) {
  Expr e{ExprKind::Rand};
  e.a = bound;
  e.b = label;
  return intern(std::move(e));
}
inline ExprPtr mk_alloctape(ExprPtr bound) {
  Expr e{ExprKind::AllocTape};
  e.a = bound;
  return intern(std::move(e));
}
inline ExprPtr mk_int_hole(std::string name) {
  Expr e{ExprKind::IntHole};
  e.s1 = std::move(name);
  return intern(std::move(e));
}

/// Deterministic total order on expressions (pointer-equal means equal, the
/// rest is structural).  Never depends on addresses, so iteration orders are
/// reproducible across runs.
inline int cmp_expr(ExprPtr x, ExprPtr y) {
  if (x == y) return 0;
  if (x == nullptr) return -1;
  if (y == nullptr) return 1;
  if (x->kind != y->kind) return x->kind < y->kind ? -1 : 1;
  if (x->op != y->op) return x->op < y->op ? -1 : 1;
  if (x->bval != y->bval) return x->bval < y->bval ? -1 : 1;
  if (x->idx != y->idx) return x->idx < y->idx ? -1 : 1;
  if (x->kind == ExprKind::Int && x->ival != y->ival)
    return x->ival < y->ival ? -1 : 1;
  if (int c = x->s1.compare(y->s1)) return c < 0 ? -1 : 1;
  if (int c = x->s2.compare(y->s2)) return c < 0 ? -1 : 1;
  if (int c = cmp_expr(x->a, y->a)) return c;
  if (int c = cmp_expr(x->b, y->b)) return c;
  return cmp_expr(x->c, y->c);
}

struct ExprLess {
  bool operator()(ExprPtr x, ExprPtr y) const { return cmp_expr(x, y) < 0; }
};

/// Exact free variables ("_" never counts as a variable).
inline void free_vars_into(ExprPtr e, std::set<std::string>& bound,
                           std::set<std::string>& out) {
  if (!e) return;
  switch (e->kind) {
    case ExprKind::Var:
      if (!bound.count(e->s1)) out.insert(e->s1);
      return;
    case ExprKind::Rec: {
      auto saved = bound;
      bound.insert(e->s1);
      bound.insert(e->s2);
      free_vars_into(e->a, bound, out);
      bound = std::move(saved);
      return;
    }
    case ExprKind::Match: {
      free_vars_into(e->a, bound, out);
      auto saved = bound;
      bound.insert(e->s1);
      free_vars_into(e->b, bound, out);
      bound = saved;
      bound.insert(e->s2);
      free_vars_into(e->c, bound, out);
      bound = std::move(saved);
      return;
    }
    default:
      free_vars_into(e->a, bound, out);
      free_vars_into(e->b, bound, out);
      free_vars_into(e->c, bound, out);
  }
}

inline std::set<std::string> free_vars(ExprPtr e) {
  std::set<std::string> bound, out;
  free_vars_into(e, bound, out);
  return out;
}

inline bool is_closed(ExprPtr e) { return free_vars(e).empty(); }

/// Capture-avoiding substitution of a closed value.  Call-by-value reduction
/// only ever substitutes closed values into closed terms, so no renaming is
/// needed; the closedness precondition is what makes that safe.
inline ExprPtr subst(ExprPtr e, const std::string& name, ExprPtr value) {
  if (name == "_" || !e) return e;
  if (!(e->fv_mask & detail::name_bit(name))) return e;  // name cannot occur
  switch (e->kind) {
    case ExprKind::Var:
      return e->s1 == name ? value : e;
    case ExprKind::Rec:
      if (e->s1 == name || e->s2 == name) return e;  // shadowed
      {
        ExprPtr body = subst(e->a, name, value);
        return body == e->a ? e : mk_rec(e->s1, e->s2, body);
      }
    case ExprKind::Match: {
      ExprPtr scrut = subst(e->a, name, value);
      ExprPtr el = e->s1 == name ? e->b : subst(e->b, name, value);
      ExprPtr er = e->s2 == name ? e->c : subst(e->c, name, value);
      if (scrut == e->a && el == e->b && er == e->c) return e;
      return mk_match(scrut, e->s1, el, e->s2, er);
    }
    default: {
      Expr copy = *e;
      copy.a = subst(e->a, name, value);
      copy.b = subst(e->b, name, value);
      copy.c = subst(e->c, name, value);
      if (copy.a == e->a && copy.b == e->b && copy.c == e->c) return e;
      return intern(std::move(copy));
    }
  }
}

namespace detail {

inline ExprPtr canonicalize_rec(ExprPtr e,
                                std::vector<std::pair<std::string, std::string>>& env,
                                int depth) {
  if (!e) return e;
  switch (e->kind) {
    case ExprKind::Var: {
      for (auto it = env.rbegin(); it != env.rend(); ++it)
        if (it->first == e->s1) return mk_var(it->second);
      return e;
    }
    case ExprKind::Rec: {
      std::string nf = e->s1 == "_" ? "_" : "$" + std::to_string(depth);
      std::string nx = e->s2 == "_" ? "_" : "$" + std::to_string(depth + 1);
      env.emplace_back(e->s1, nf);
      env.emplace_back(e->s2, nx);
      ExprPtr body = canonicalize_rec(e->a, env, depth + 2);
      env.pop_back();
      env.pop_back();
      return mk_rec(nf, nx, body);
    }
    case ExprKind::Match: {
      ExprPtr scrut = canonicalize_rec(e->a, env, depth);
      std::string nl = e->s1 == "_" ? "_" : "$" + std::to_string(depth);
      env.emplace_back(e->s1, nl);
      ExprPtr el = canonicalize_rec(e->b, env, depth + 1);
      env.pop_back();
      std::string nr = e->s2 == "_" ? "_" : "$" + std::to_string(depth);
      env.emplace_back(e->s2, nr);
      ExprPtr er = canonicalize_rec(e->c, env, depth + 1);
      env.pop_back();
      return mk_match(scrut, nl, el, nr, er);
    }
    default: {
      Expr copy = *e;
      copy.a = canonicalize_rec(e->a, env, depth);
      copy.b = canonicalize_rec(e->b, env, depth);
      copy.c = canonicalize_rec(e->c, env, depth);
      if (copy.a == e->a && copy.b == e->b && copy.c == e->c) return e;
      return intern(std::move(copy));
    }
  }
}

}  // namespace detail

/// Canonical de Bruijn-style rendering: binders renamed to $0, $1, ... by
/// binding depth.  Applied once when a program enters the exact-execution
/// path, it makes alpha-equivalent closures created at equal binding depth
/// coincide, so configuration hashing merges them.
inline ExprPtr canonicalize(ExprPtr e) {
  std::vector<std::pair<std::string, std::string>> env;
  return detail::canonicalize_rec(e, env, 0);
}

// ---------------------------------------------------------------------------
// Program state: heap and presampling tapes.

/// A presampling tape: an upper bound and a FIFO queue of pre-drawn values.
/// Every queued value is <= bound.
struct Tape {
  std::uint64_t bound{0};
  std::vector<std::uint64_t> queue;

  friend bool operator==(const Tape&, const Tape&) = default;
  friend auto operator<=>(const Tape&, const Tape&) = default;
};

struct State {
  std::map<std::uint64_t, ExprPtr> heap;   // location -> value
  std::map<std::uint64_t, Tape> tapes;     // label -> tape
  std::uint64_t next_loc{0};
  std::uint64_t next_lbl{0};
};

inline int cmp_state(const State& x, const State& y) {
  if (x.next_loc != y.next_loc) return x.next_loc < y.next_loc ? -1 : 1;
  if (x.next_lbl != y.next_lbl) return x.next_lbl < y.next_lbl ? -1 : 1;
  {
    auto ix = x.heap.begin();
    auto iy = y.heap.begin();
    for (;; ++ix, ++iy) {
      bool ex = ix == x.heap.end(), ey = iy == y.heap.end();
      if (ex || ey) {
        if (ex && ey) break;
        return ex ? -1 : 1;
      }
      if (ix->first != iy->first) return ix->first < iy->first ? -1 : 1;
      if (int c = cmp_expr(ix->second, iy->second)) return c;
    }
  }
  if (x.tapes != y.tapes) return x.tapes < y.tapes ? -1 : 1;
  return 0;
}

inline bool operator==(const State& x, const State& y) { return cmp_state(x, y) == 0; }

/// A configuration: an expression together with a state.  Final iff the
/// expression is a value.
struct Config {
  ExprPtr expr{nullptr};
  State state;
};

inline int cmp_config(const Config& x, const Config& y) {
  if (int c = cmp_expr(x.expr, y.expr)) return c;
  return cmp_state(x.state, y.state);
}

inline bool operator==(const Config& x, const Config& y) { return cmp_config(x, y) == 0; }

struct ConfigLess {
  bool operator()(const Config& x, const Config& y) const {
    return cmp_config(x, y) < 0;
  }
};

inline std::size_t hash_config(const Config& c) {
  std::size_t h = c.expr ? c.expr->hash : 0;
  boost::hash_combine(h, c.state.next_loc);
  boost::hash_combine(h, c.state.next_lbl);
  for (const auto& [l, v] : c.state.heap) {
    boost::hash_combine(h, l);
    boost::hash_combine(h, v->hash);
  }
  for (const auto& [l, t] : c.state.tapes) {
    boost::hash_combine(h, l);
    boost::hash_combine(h, t.bound);
    boost::hash_combine(h, t.queue.size());
    for (auto q : t.queue) boost::hash_combine(h, q);
  }
  return h;
}

using ConfigDist = SubDist<Config, ConfigLess>;

}  // namespace termref::randml
