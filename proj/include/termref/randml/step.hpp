#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "termref/markov.hpp"
#include "termref/randml/ast.hpp"
#include "termref/randml/print.hpp"

namespace termref::randml {

// Evaluation is call-by-value and proceeds left to right in every binary
// form (application, binary operators, pairs, store).

enum class FrameKind : std::uint8_t {
  AppFun,     // [] e         (function position)
  AppArg,     // v []
  BinL,       // [] op e
  BinR,       // v op []
  IfCond,     // if [] then e1 else e2
  PairL,      // ([], e)
  PairR,      // (v, [])
  InjLF,      // inl []
  InjRF,      // inr []
  FstF,
  SndF,
  MatchScrut,
  AllocF,
  LoadF,
  StoreL,     // [] <- e
  StoreR,     // v <- []
  RandBound,  // rand [] @e
  RandLabel,  // rand v @[]
  AllocTapeF,
};

struct Frame {
  FrameKind kind;
  BinOpKind op{BinOpKind::Add};
  ExprPtr x{nullptr};   // sibling expression / value
  std::string s1, s2;   // match binders
  ExprPtr b2{nullptr};  // if else-branch / match inr arm
};

/// Unique decomposition of a non-value expression into an evaluation context
/// (frames listed outermost first) and a redex.
struct Decomposition {
  std::vector<Frame> frames;
  ExprPtr redex;
};

inline ExprPtr plug(const Frame& f, ExprPtr hole) {
  switch (f.kind) {
    case FrameKind::AppFun: return mk_app(hole, f.x);
    case FrameKind::AppArg: return mk_app(f.x, hole);
    case FrameKind::BinL: return mk_binop(f.op, hole, f.x);
    case FrameKind::BinR: return mk_binop(f.op, f.x, hole);
    case FrameKind::IfCond: return mk_if(hole, f.x, f.b2);
    case FrameKind::PairL: return mk_pair(hole, f.x);
    case FrameKind::PairR: return mk_pair(f.x, hole);
    case FrameKind::InjLF: return mk_injl(hole);
    case FrameKind::InjRF: return mk_injr(hole);
    case FrameKind::FstF: return mk_fst(hole);
    case FrameKind::SndF: return mk_snd(hole);
    case FrameKind::MatchScrut: return mk_match(hole, f.s1, f.x, f.s2, f.b2);
    case FrameKind::AllocF: return mk_alloc(hole);
    case FrameKind::LoadF: return mk_load(hole);
    case FrameKind::StoreL: return mk_store(hole, f.x);
    case FrameKind::StoreR: return mk_store(f.x, hole);
    case FrameKind::RandBound: return mk_rand(hole, f.x);
    case FrameKind::RandLabel: return mk_rand(f.x, hole);
    case FrameKind::AllocTapeF: return mk_alloctape(hole);
  }
  return hole;
}

/// Recomposition K[e]; inverse of decompose.
inline ExprPtr recompose(const std::vector<Frame>& frames, ExprPtr hole) {
  ExprPtr e = hole;
  for (auto it = frames.rbegin(); it != frames.rend(); ++it) e = plug(*it, e);
  return e;
}

inline std::optional<Decomposition> decompose(ExprPtr e) {
  if (e->is_value) return std::nullopt;
  Decomposition d;
  for (;;) {
    switch (e->kind) {
      case ExprKind::App:
        if (!e->a->is_value) { d.frames.push_back({FrameKind::AppFun, {}, e->b}); e = e->a; continue; }
        if (!e->b->is_value) { d.frames.push_back({FrameKind::AppArg, {}, e->a}); e = e->b; continue; }
        break;
      case ExprKind::BinOp:
        if (!e->a->is_value) { d.frames.push_back({FrameKind::BinL, e->op, e->b}); e = e->a; continue; }
        if (!e->b->is_value) { d.frames.push_back({FrameKind::BinR, e->op, e->a}); e = e->b; continue; }
        break;
      case ExprKind::If:
        if (!e->a->is_value) {
          Frame f{FrameKind::IfCond, {}, e->b};
          f.b2 = e->c;
          d.frames.push_back(std::move(f));
          e = e->a;
          continue;
        }
        break;
      case ExprKind::Pair:
        if (!e->a->is_value) { d.frames.push_back({FrameKind::PairL, {}, e->b}); e = e->a; continue; }
        d.frames.push_back({FrameKind::PairR, {}, e->a});
        e = e->b;
        continue;
      case ExprKind::InjL:
        d.frames.push_back({FrameKind::InjLF});
        e = e->a;
        continue;
      case ExprKind::InjR:
        d.frames.push_back({FrameKind::InjRF});
        e = e->a;
        continue;
      case ExprKind::Fst:
        if (!e->a->is_value) { d.frames.push_back({FrameKind::FstF}); e = e->a; continue; }
        break;
      case ExprKind::Snd:
        if (!e->a->is_value) { d.frames.push_back({FrameKind::SndF}); e = e->a; continue; }
        break;
      case ExprKind::Match:
        if (!e->a->is_value) {
          Frame f{FrameKind::MatchScrut, {}, e->b, e->s1, e->s2};
          f.b2 = e->c;
          d.frames.push_back(std::move(f));
          e = e->a;
          continue;
        }
        break;
      case ExprKind::Alloc:
        if (!e->a->is_value) { d.frames.push_back({FrameKind::AllocF}); e = e->a; continue; }
        break;
      case ExprKind::Load:
        if (!e->a->is_value) { d.frames.push_back({FrameKind::LoadF}); e = e->a; continue; }
        break;
      case ExprKind::Store:
        if (!e->a->is_value) { d.frames.push_back({FrameKind::StoreL, {}, e->b}); e = e->a; continue; }
        if (!e->b->is_value) { d.frames.push_back({FrameKind::StoreR, {}, e->a}); e = e->b; continue; }
        break;
      case ExprKind::Rand:
        if (!e->a->is_value) { d.frames.push_back({FrameKind::RandBound, {}, e->b}); e = e->a; continue; }
        if (e->b && !e->b->is_value) { d.frames.push_back({FrameKind::RandLabel, {}, e->a}); e = e->b; continue; }
        break;
      case ExprKind::AllocTape:
        if (!e->a->is_value) { d.frames.push_back({FrameKind::AllocTapeF}); e = e->a; continue; }
        break;
      default:
        break;  // Var and IntHole are (stuck) redexes; values cannot occur here
    }
    d.redex = e;
    return d;
  }
}

/// Maximum rand / alloctape bound the enumerator will expand.
inline constexpr std::uint64_t kMaxRandBound = 1u << 20;

struct ExprStateLess {
  bool operator()(const std::pair<ExprPtr, State>& x,
                  const std::pair<ExprPtr, State>& y) const {
    if (int c = cmp_expr(x.first, y.first)) return c < 0;
    return cmp_state(x.second, y.second) < 0;
  }
};

using RedexDist = SubDist<std::pair<ExprPtr, State>, ExprStateLess>;

namespace detail {

inline bool eq_comparable(ExprPtr v) {
  switch (v->kind) {
    case ExprKind::Int:
    case ExprKind::Bool:
    case ExprKind::Unit:
    case ExprKind::Loc:
    case ExprKind::Lbl:
      return true;
    default:
      return false;
  }
}

inline bool ord_comparable(ExprPtr v) {
  return v->kind == ExprKind::Int || v->kind == ExprKind::Bool;
}

// Equality is defined on base values of the same kind only (integers,
// booleans, unit, locations, tape labels); ordering on integers and booleans
// (false < true).  Anything else is stuck.
inline std::optional<bool> value_eq(ExprPtr a, ExprPtr b) {
  if (!eq_comparable(a) || !eq_comparable(b) || a->kind != b->kind)
    return std::nullopt;
  return a == b;  // interned
}

inline std::optional<int> value_cmp(ExprPtr a, ExprPtr b) {
  if (!ord_comparable(a) || !ord_comparable(b) || a->kind != b->kind)
    return std::nullopt;
  if (a->kind == ExprKind::Int)
    return a->ival < b->ival ? -1 : (a->ival == b->ival ? 0 : 1);
  return a->bval < b->bval ? -1 : (a->bval == b->bval ? 0 : 1);
}

}  // namespace detail

/// Reduces a redex in a state.  Returns nullopt when the redex is stuck.
/// Pure redexes step with weight 1; rand without usable tape contents is
/// uniform; allocation draws fresh names from deterministic counters in the
/// state, so every non-rand step is Dirac.
inline std::optional<RedexDist> redex_step(ExprPtr r, const State& sigma) {
  auto dirac = [](ExprPtr e, State s) {
    return RedexDist::dirac({e, std::move(s)});
  };
  switch (r->kind) {
    case ExprKind::App: {
      ExprPtr f = r->a;
      if (f->kind != ExprKind::Rec) return std::nullopt;
      ExprPtr body = subst(f->a, f->s1, f);
      body = subst(body, f->s2, r->b);
      return dirac(body, sigma);
    }
    case ExprKind::BinOp: {
      ExprPtr a = r->a, b = r->b;
      switch (r->op) {
        case BinOpKind::Add:
        case BinOpKind::Sub:
        case BinOpKind::Mul: {
          if (a->kind != ExprKind::Int || b->kind != ExprKind::Int)
            return std::nullopt;
          Int v;
          if (r->op == BinOpKind::Add) v = a->ival + b->ival;
          else if (r->op == BinOpKind::Sub) v = a->ival - b->ival;
          else v = a->ival * b->ival;
          return dirac(mk_int(std::move(v)), sigma);
        }
        case BinOpKind::Eq:
        case BinOpKind::Ne: {
          auto eq = detail::value_eq(a, b);
          if (!eq) return std::nullopt;
          return dirac(mk_bool(r->op == BinOpKind::Eq ? *eq : !*eq), sigma);
        }
        default: {
          auto c = detail::value_cmp(a, b);
          if (!c) return std::nullopt;
          bool res = r->op == BinOpKind::Lt   ? *c < 0
                     : r->op == BinOpKind::Le ? *c <= 0
                     : r->op == BinOpKind::Gt ? *c > 0
                                              : *c >= 0;
          return dirac(mk_bool(res), sigma);
        }
      }
    }
    case ExprKind::If:
      if (r->a->kind != ExprKind::Bool) return std::nullopt;
      return dirac(r->a->bval ? r->b : r->c, sigma);
    case ExprKind::Fst:
      if (r->a->kind != ExprKind::Pair) return std::nullopt;
      return dirac(r->a->a, sigma);
    case ExprKind::Snd:
      if (r->a->kind != ExprKind::Pair) return std::nullopt;
      return dirac(r->a->b, sigma);
    case ExprKind::Match: {
      ExprPtr v = r->a;
      if (v->kind == ExprKind::InjL) return dirac(subst(r->b, r->s1, v->a), sigma);
      if (v->kind == ExprKind::InjR) return dirac(subst(r->c, r->s2, v->a), sigma);
      return std::nullopt;
    }
    case ExprKind::Alloc: {
      State s = sigma;
      std::uint64_t l = s.next_loc++;
      s.heap[l] = r->a;
      return dirac(mk_loc(l), std::move(s));
    }
    case ExprKind::Load: {
      if (r->a->kind != ExprKind::Loc) return std::nullopt;
      auto it = sigma.heap.find(r->a->idx);
      if (it == sigma.heap.end()) return std::nullopt;
      return dirac(it->second, sigma);
    }
    case ExprKind::Store: {
      if (r->a->kind != ExprKind::Loc) return std::nullopt;
      if (!sigma.heap.count(r->a->idx)) return std::nullopt;
      State s = sigma;
      s.heap[r->a->idx] = r->b;
      return dirac(mk_unit(), std::move(s));
    }
    case ExprKind::AllocTape: {
      if (r->a->kind != ExprKind::Int || r->a->ival < 0) return std::nullopt;
      if (r->a->ival > kMaxRandBound)
        throw ResourceError("alloctape bound too large: " + r->a->ival.str());
      State s = sigma;
      std::uint64_t l = s.next_lbl++;
      s.tapes[l] = Tape{r->a->ival.convert_to<std::uint64_t>(), {}};
      return dirac(mk_lbl(l), std::move(s));
    }
    case ExprKind::Rand: {
      if (r->a->kind != ExprKind::Int || r->a->ival < 0) return std::nullopt;
      if (r->a->ival > kMaxRandBound)
        throw ResourceError("rand bound too large: " + r->a->ival.str());
      std::uint64_t n = r->a->ival.convert_to<std::uint64_t>();
      if (r->b) {
        if (r->b->kind != ExprKind::Lbl) return std::nullopt;
        auto it = sigma.tapes.find(r->b->idx);
        if (it == sigma.tapes.end()) return std::nullopt;
        if (!it->second.queue.empty()) {
          // Non-empty tape: deterministically take off the first element.
          State s = sigma;
          Tape& t = s.tapes[r->b->idx];
          std::uint64_t head = t.queue.front();
          t.queue.erase(t.queue.begin());
          return dirac(mk_int(static_cast<long long>(head)), std::move(s));
        }
        // Empty tape: behaves just as if it had not been labeled.
      }
      typename RedexDist::Builder b;
      Rat p(Int(1), Int(n) + 1);
      for (std::uint64_t k = 0; k <= n; ++k)
        b.add({mk_int(static_cast<long long>(k)), sigma}, p);
      return std::move(b).build();
    }
    default:
      return std::nullopt;  // Var, IntHole
  }
}

/// The Markov-chain step function on configurations: zero if the
/// configuration is final (a value) or stuck, otherwise total mass 1.
inline ConfigDist step_distr(const Config& cfg) {
  auto dec = decompose(cfg.expr);
  if (!dec) return ConfigDist::zero();
  auto red = redex_step(dec->redex, cfg.state);
  if (!red) return ConfigDist::zero();
  typename ConfigDist::Builder b;
  for (const auto& [es, p] : red->entries())
    b.add({recompose(dec->frames, es.first), es.second}, p.rat());
  return std::move(b).build();
}

/// red(cfg): the configuration can take a step.
inline bool reducible(const Config& cfg) {
  return step_distr(cfg).mass().is_one();
}

/// Says why a configuration is not reducible; nullopt when it is final or
/// reducible.  Stuckness is silent in step_distr (the zero distribution);
/// this is the diagnostic view.
inline std::optional<std::string> classify_stuck(const Config& cfg) {
  if (cfg.expr->is_value) return std::nullopt;
  auto dec = decompose(cfg.expr);
  if (redex_step(dec->redex, cfg.state)) return std::nullopt;
  ExprPtr r = dec->redex;
  switch (r->kind) {
    case ExprKind::Var: return "unbound variable '" + r->s1 + "'";
    case ExprKind::IntHole: return "pattern hole '${" + r->s1 + "}' is not executable";
    case ExprKind::App: return "application of a non-function: " + pretty(r);
    case ExprKind::BinOp:
      return std::string("operator '") + binop_symbol(r->op) +
             "' undefined on these operands: " + pretty(r);
    case ExprKind::If: return "if on a non-boolean: " + pretty(r);
    case ExprKind::Fst:
    case ExprKind::Snd: return "projection from a non-pair: " + pretty(r);
    case ExprKind::Match: return "match on a non-injection: " + pretty(r);
    case ExprKind::Load: return "load from a dangling or non-location: " + pretty(r);
    case ExprKind::Store: return "store to a dangling or non-location: " + pretty(r);
    case ExprKind::Rand: return "rand with an invalid bound or label: " + pretty(r);
    case ExprKind::AllocTape: return "alloctape with an invalid bound: " + pretty(r);
    default: return "stuck redex: " + pretty(r);
  }
}

struct StateLess {
  bool operator()(const State& x, const State& y) const {
    return cmp_state(x, y) < 0;
  }
};

using StateDist = SubDist<State, StateLess>;

/// Presampling ghost step: uniformly over k in {0..bound}, the state with k
/// appended to the end of tape `label`.  Unknown labels are an error.
inline StateDist state_step(const State& sigma, std::uint64_t label) {
  auto it = sigma.tapes.find(label);
  if (it == sigma.tapes.end())
    throw InputError("state_step: unknown tape label " + std::to_string(label));
  typename StateDist::Builder b;
  Rat p(Int(1), Int(it->second.bound) + 1);
  for (std::uint64_t k = 0; k <= it->second.bound; ++k) {
    State s = sigma;
    s.tapes[label].queue.push_back(k);
    b.add(std::move(s), p);
  }
  return std::move(b).build();
}

/// foldM of state_step over a list of labels.
inline StateDist state_step_fold(const State& sigma,
                                 const std::vector<std::uint64_t>& labels) {
  StateDist acc = StateDist::dirac(sigma);
  for (std::uint64_t l : labels)
    acc = mbind(acc, [l](const State& s) { return state_step(s, l); });
  return acc;
}

/// Views a closed program as a Markov chain over configurations: step is
/// step_distr, and a configuration is final iff its expression is a value.
struct ProgramModel {
  Model<Config, ConfigLess> model;
  Config start;
};

inline ProgramModel as_markov(ExprPtr program, State init_state = State{}) {
  if (!is_closed(program)) {
    auto fv = free_vars(program);
    throw InputError("program is not closed; free variable '" + *fv.begin() + "'");
  }
  return {{[](const Config& c) { return step_distr(c); },
           [](const Config& c) { return c.expr->is_value; }},
          Config{program, std::move(init_state)}};
}

/// Outcome of sampling one trajectory.
struct RunOutcome {
  enum class Status { Terminated, BudgetExhausted, Stuck } status;
  ExprPtr value{nullptr};  // when terminated
  std::uint64_t steps{0};
  Config final_config;
  std::string stuck_reason;
};

namespace detail {

/// Unbiased bounded sampling by rejection; deterministic given the engine
/// state (std::uniform_int_distribution is not portable across libraries).
inline std::uint64_t uniform_u64(std::mt19937_64& rng, std::uint64_t n) {
  if (n == std::numeric_limits<std::uint64_t>::max()) return rng();
  const std::uint64_t span = n + 1;
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() / span * span;
  for (;;) {
    std::uint64_t x = rng();
    if (x < limit) return x % span;
  }
}

}  // namespace detail

/// Derives a per-trial seed from a base seed (splitmix64 over seed, index).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

/// Samples one pseudorandom trajectory consistent with step_distr;
/// deterministic given the seed.  The only probabilistic redex is rand on an
/// empty or absent tape, which is uniform; everything else is Dirac.
inline RunOutcome run_sample(ExprPtr program, std::uint64_t seed,
                             std::uint64_t step_budget,
                             State init_state = State{}) {
  if (!is_closed(program)) {
    auto fv = free_vars(program);
    throw InputError("program is not closed; free variable '" + *fv.begin() + "'");
  }
  std::mt19937_64 rng(seed);
  Config cfg{program, std::move(init_state)};
  for (std::uint64_t steps = 0;; ++steps) {
    if (cfg.expr->is_value)
      return {RunOutcome::Status::Terminated, cfg.expr, steps, cfg, ""};
    if (steps >= step_budget)
      return {RunOutcome::Status::BudgetExhausted, nullptr, steps, cfg, ""};
    auto dec = decompose(cfg.expr);
    ExprPtr r = dec->redex;
    if (r->kind == ExprKind::Rand && r->a->kind == ExprKind::Int &&
        r->a->ival >= 0 && r->a->ival <= kMaxRandBound) {
      bool tape_pop = false;
      if (r->b) {
        if (r->b->kind != ExprKind::Lbl)
          return {RunOutcome::Status::Stuck, nullptr, steps, cfg,
                  classify_stuck(cfg).value_or("stuck")};
        auto it = cfg.state.tapes.find(r->b->idx);
        if (it == cfg.state.tapes.end())
          return {RunOutcome::Status::Stuck, nullptr, steps, cfg,
                  classify_stuck(cfg).value_or("stuck")};
        tape_pop = !it->second.queue.empty();
      }
      if (!tape_pop) {
        std::uint64_t n = r->a->ival.convert_to<std::uint64_t>();
        std::uint64_t k = detail::uniform_u64(rng, n);
        cfg = Config{recompose(dec->frames, mk_int(static_cast<long long>(k))),
                     cfg.state};
        continue;
      }
    }
    auto red = redex_step(r, cfg.state);
    if (!red)
      return {RunOutcome::Status::Stuck, nullptr, steps, cfg,
              classify_stuck(cfg).value_or("stuck")};
    const auto& e = *red->entries().begin();
    cfg = Config{recompose(dec->frames, e.first.first), e.first.second};
  }
}

}  // namespace termref::randml
