#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <type_traits>
#include <utility>
#include <vector>

#include "json.hpp"
#include "termref/rational.hpp"

namespace termref {

/// Finite-support sub-distribution with exact rational probabilities.
///
/// Entries map outcomes to probabilities; zero-probability outcomes are never
/// stored, and the total mass is at most 1.  Outcomes are kept in the
/// canonical order induced by `Less`, so iteration, equality, and
/// serialization are deterministic.  Values are immutable after construction.
template <class T, class Less = std::less<T>>
class SubDist {
 public:
  using Map = std::map<T, Prob, Less>;

  SubDist() = default;

  /// The everywhere-zero sub-distribution.
  static SubDist zero() { return SubDist(); }

  /// Dirac distribution: all mass on `a`.
  static SubDist dirac(T a) {
    SubDist d;
    d.entries_.emplace(std::move(a), Prob::one());
    return d;
  }

  /// Builds from (outcome, probability) pairs; merges duplicates, prunes
  /// zeros, and rejects totals above 1.
  static SubDist from_entries(const std::vector<std::pair<T, Rat>>& pairs) {
    Builder b;
    for (const auto& [t, p] : pairs) b.add(t, p);
    return std::move(b).build();
  }

  const Map& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t support_size() const { return entries_.size(); }

  /// Total mass, an exact rational in [0, 1].
  Prob mass() const {
    Rat m = 0;
    for (const auto& [t, p] : entries_) m += p.rat();
    return Prob(m);
  }

  Prob prob_of(const T& t) const {
    auto it = entries_.find(t);
    return it == entries_.end() ? Prob::zero() : it->second;
  }

  bool contains(const T& t) const { return entries_.count(t) > 0; }

  /// Equality is equality of the pruned entry maps.
  friend bool operator==(const SubDist& a, const SubDist& b) {
    if (a.entries_.size() != b.entries_.size()) return false;
    auto ia = a.entries_.begin();
    auto ib = b.entries_.begin();
    Less less;
    for (; ia != a.entries_.end(); ++ia, ++ib) {
      if (less(ia->first, ib->first) || less(ib->first, ia->first)) return false;
      if (ia->second != ib->second) return false;
    }
    return true;
  }
  friend bool operator!=(const SubDist& a, const SubDist& b) { return !(a == b); }

  /// Incremental construction with exact accumulation.
  class Builder {
   public:
    void add(const T& t, const Rat& p) {
      if (p == 0) return;
      if (p < 0) throw InputError("negative probability: " + rat_to_string(p));
      acc_[t] += p;
    }
    SubDist build() && {
      SubDist d;
      Rat total = 0;
      for (auto& [t, p] : acc_) {
        if (p == 0) continue;
        total += p;
        d.entries_.emplace(t, Prob(p));
      }
      if (total > 1)
        throw InputError("sub-distribution mass exceeds 1: " + rat_to_string(total));
      return d;
    }

   private:
    std::map<T, Rat, Less> acc_;
  };

 private:
  Map entries_;
};

/// Dirac distribution (the monad's return).
template <class T, class D = std::decay_t<T>, class Less = std::less<D>>
SubDist<D, Less> mret(T&& a) {
  return SubDist<D, Less>::dirac(std::forward<T>(a));
}

/// Monadic bind: result(b) = sum_a mu(a) * f(a)(b), computed exactly.
template <class T, class Less, class F>
auto mbind(const SubDist<T, Less>& mu, F&& f)
    -> std::invoke_result_t<F, const T&> {
  using Result = std::invoke_result_t<F, const T&>;
  typename Result::Builder out;
  for (const auto& [a, pa] : mu.entries()) {
    const auto fa = f(a);
    for (const auto& [b, pb] : fa.entries()) out.add(b, pa.rat() * pb.rat());
  }
  return std::move(out).build();
}

template <class T, class Less>
Prob mass(const SubDist<T, Less>& mu) {
  return mu.mass();
}

/// Uniform distribution over {0, ..., n}: each outcome has mass 1/(n+1).
inline SubDist<std::uint64_t> uniform(std::uint64_t n) {
  typename SubDist<std::uint64_t>::Builder b;
  Rat p(Int(1), Int(n) + 1);
  for (std::uint64_t k = 0; k <= n; ++k) b.add(k, p);
  return std::move(b).build();
}

/// Maps outcomes through `g` (merging collisions exactly).  The output
/// ordering defaults to std::less; pass `LessOut` explicitly for outcome
/// types with a custom canonical order.
template <class LessOut = void, class T, class Less, class G>
auto map_outcomes(const SubDist<T, Less>& mu, G&& g) {
  using U = std::decay_t<std::invoke_result_t<G, const T&>>;
  using LO = std::conditional_t<std::is_void_v<LessOut>, std::less<U>, LessOut>;
  typename SubDist<U, LO>::Builder b;
  for (const auto& [t, p] : mu.entries()) b.add(g(t), p.rat());
  return std::move(b).build();
}

/// Serializes as an array of {outcome, numerator, denominator} records in
/// canonical order.  `out` renders an outcome as JSON.
template <class T, class Less, class OutcomeToJson>
nlohmann::json subdist_to_json(const SubDist<T, Less>& mu, OutcomeToJson&& out) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [t, p] : mu.entries()) {
    arr.push_back({{"outcome", out(t)},
                   {"numerator", rat_num(p.rat()).str()},
                   {"denominator", rat_den(p.rat()).str()}});
  }
  return arr;
}

inline nlohmann::json subdist_to_json(const SubDist<nlohmann::json>& mu) {
  return subdist_to_json(mu, [](const nlohmann::json& j) { return j; });
}

}  // namespace termref
