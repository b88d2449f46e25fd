#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "termref/subdist.hpp"

namespace termref {

template <class LessA, class LessB>
struct PairLess {
  template <class A, class B>
  bool operator()(const std::pair<A, B>& x, const std::pair<A, B>& y) const {
    LessA la;
    if (la(x.first, y.first)) return true;
    if (la(y.first, x.first)) return false;
    return LessB()(x.second, y.second);
  }
};

/// A relation R over A x B, given either as an explicit finite set of pairs
/// or as a decidable predicate.  Predicates are only ever evaluated on the
/// supports of the distributions at hand.
template <class A, class B, class LessA = std::less<A>, class LessB = std::less<B>>
class Relation {
 public:
  using Pair = std::pair<A, B>;

  static Relation from_pairs(std::vector<Pair> pairs) {
    Relation r;
    r.pairs_.emplace(pairs.begin(), pairs.end());
    return r;
  }
  static Relation from_predicate(std::function<bool(const A&, const B&)> pred) {
    Relation r;
    r.pred_ = std::move(pred);
    return r;
  }
  /// The full relation A x B.
  static Relation full() {
    return from_predicate([](const A&, const B&) { return true; });
  }
  /// Equality; only available when both sides have the same type.
  static Relation equality()
    requires std::is_same_v<A, B>
  {
    return from_predicate([](const A& a, const B& b) {
      LessA less;
      return !less(a, b) && !less(b, a);
    });
  }

  bool contains(const A& a, const B& b) const {
    if (pairs_) return pairs_->count(Pair(a, b)) > 0;
    return pred_(a, b);
  }

 private:
  Relation() = default;
  std::optional<std::set<Pair, PairLess<LessA, LessB>>> pairs_;
  std::function<bool(const A&, const B&)> pred_;
};

/// A left-partial coupling candidate: a joint sub-distribution over A x B.
/// Validity (left marginal equal to mu1, right marginal dominated by mu2,
/// support inside R) is checked by `check_witness`.
template <class A, class B, class LessA = std::less<A>, class LessB = std::less<B>>
struct CouplingWitness {
  using Joint = SubDist<std::pair<A, B>, PairLess<LessA, LessB>>;
  Joint joint;

  SubDist<A, LessA> left_marginal() const {
    typename SubDist<A, LessA>::Builder b;
    for (const auto& [ab, p] : joint.entries()) b.add(ab.first, p.rat());
    return std::move(b).build();
  }
  SubDist<B, LessB> right_marginal() const {
    typename SubDist<B, LessB>::Builder b;
    for (const auto& [ab, p] : joint.entries()) b.add(ab.second, p.rat());
    return std::move(b).build();
  }
};

/// Result of validating a witness; false carries the first violated clause.
struct WitnessCheck {
  bool ok = true;
  std::string violation;
  explicit operator bool() const { return ok; }
};

/// Checks the three clauses of the left-partial R-coupling definition
/// exactly: the left marginal equals mu1, the right marginal is bounded by
/// mu2, and the support lies inside R.
template <class A, class B, class LessA, class LessB>
WitnessCheck check_witness(const SubDist<A, LessA>& mu1,
                           const SubDist<B, LessB>& mu2,
                           const Relation<A, B, LessA, LessB>& rel,
                           const CouplingWitness<A, B, LessA, LessB>& w) {
  const auto left = w.left_marginal();
  if (left != mu1) return {false, "left marginal differs from mu1"};
  const auto right = w.right_marginal();
  for (const auto& [b, p] : right.entries()) {
    if (p > mu2.prob_of(b))
      return {false, "right marginal exceeds mu2 at an outcome (" + p.str() +
                         " > " + mu2.prob_of(b).str() + ")"};
  }
  for (const auto& [ab, p] : w.joint.entries()) {
    (void)p;
    if (!rel.contains(ab.first, ab.second))
      return {false, "support contains a pair outside R"};
  }
  return {};
}

/// Outcome of the coupling existence decision.  When no witness exists the
/// deficit fields describe an unmatched part of the left marginal: a set of
/// left outcomes whose mass exceeds the mass mu2 makes available through R.
template <class A, class B, class LessA = std::less<A>, class LessB = std::less<B>>
struct CouplingResult {
  std::optional<CouplingWitness<A, B, LessA, LessB>> witness;
  Rat max_flow = 0;
  Rat required = 0;
  std::vector<A> deficit_left;  // empty when a witness exists
  Rat deficit_required = 0;     // mass(mu1 restricted to deficit_left)
  Rat deficit_available = 0;    // mass(mu2 restricted to R(deficit_left))
  Rat deficit() const { return required - max_flow; }
};

namespace detail {

// Edmonds-Karp max-flow on exact rationals.  Each BFS augmentation saturates
// at least one edge and shortest augmenting paths bound the number of
// augmentations by V*E, so termination does not depend on capacities being
// integral.
class RationalMaxFlow {
 public:
  explicit RationalMaxFlow(int n) : head_(n, -1) {}

  void add_edge(int from, int to, Rat cap) {
    edges_.push_back({to, head_[from], std::move(cap)});
    head_[from] = static_cast<int>(edges_.size()) - 1;
    edges_.push_back({from, head_[to], Rat(0)});
    head_[to] = static_cast<int>(edges_.size()) - 1;
  }

  Rat run(int source, int sink) {
    Rat total = 0;
    for (;;) {
      std::vector<int> pred_edge(head_.size(), -1);
      std::vector<char> seen(head_.size(), 0);
      std::deque<int> queue{source};
      seen[source] = 1;
      while (!queue.empty() && !seen[sink]) {
        int u = queue.front();
        queue.pop_front();
        for (int e = head_[u]; e != -1; e = edges_[e].next) {
          if (edges_[e].cap == 0 || seen[edges_[e].to]) continue;
          seen[edges_[e].to] = 1;
          pred_edge[edges_[e].to] = e;
          queue.push_back(edges_[e].to);
        }
      }
      if (!seen[sink]) return total;
      Rat aug;
      bool first = true;
      for (int v = sink; v != source;) {
        const auto& e = edges_[pred_edge[v]];
        if (first || e.cap < aug) aug = e.cap;
        first = false;
        v = edges_[pred_edge[v] ^ 1].to;
      }
      for (int v = sink; v != source;) {
        int ei = pred_edge[v];
        edges_[ei].cap -= aug;
        edges_[ei ^ 1].cap += aug;
        v = edges_[ei ^ 1].to;
      }
      total += aug;
    }
  }

  /// Flow pushed through edge id (edges are numbered in insertion order,
  /// forward edges at even indices).
  Rat flow_on(int edge_id) const { return edges_[2 * edge_id + 1].cap; }

  /// Vertices reachable from `source` in the residual graph.
  std::vector<char> residual_reachable(int source) const {
    std::vector<char> seen(head_.size(), 0);
    std::deque<int> queue{source};
    seen[source] = 1;
    while (!queue.empty()) {
      int u = queue.front();
      queue.pop_front();
      for (int e = head_[u]; e != -1; e = edges_[e].next) {
        if (edges_[e].cap == 0 || seen[edges_[e].to]) continue;
        seen[edges_[e].to] = 1;
        queue.push_back(edges_[e].to);
      }
    }
    return seen;
  }

 private:
  struct Edge {
    int to;
    int next;
    Rat cap;
  };
  std::vector<int> head_;
  std::vector<Edge> edges_;
};

}  // namespace detail

/// Decides left-partial R-coupling existence by exact max-flow on the
/// bipartite network source -> a (capacity mu1(a)), a -> b for (a,b) in R,
/// b -> sink (capacity mu2(b)).  A witness exists iff the max-flow value
/// equals mass(mu1); the witness is the flow on the middle edges.
///
/// R given as a predicate is materialized on supp(mu1) x supp(mu2) only:
/// outcomes outside the supports cannot carry witness mass.  Which witness is
/// returned when several exist is unspecified but deterministic, fixed by the
/// canonical ordering of the supports.
template <class A, class B, class LessA, class LessB>
CouplingResult<A, B, LessA, LessB> solve_coupling(
    const SubDist<A, LessA>& mu1, const SubDist<B, LessB>& mu2,
    const Relation<A, B, LessA, LessB>& rel) {
  CouplingResult<A, B, LessA, LessB> result;
  result.required = mu1.mass().rat();

  std::vector<const A*> left;
  std::vector<Rat> left_mass;
  for (const auto& [a, p] : mu1.entries()) {
    left.push_back(&a);
    left_mass.push_back(p.rat());
  }
  std::vector<const B*> right;
  std::vector<Rat> right_mass;
  for (const auto& [b, p] : mu2.entries()) {
    right.push_back(&b);
    right_mass.push_back(p.rat());
  }

  const int nl = static_cast<int>(left.size());
  const int nr = static_cast<int>(right.size());
  const int source = 0;
  const int sink = nl + nr + 1;
  detail::RationalMaxFlow net(nl + nr + 2);

  // No flow can exceed the total available mass, so this finite capacity is
  // a safe stand-in for the infinite middle-edge capacity.
  const Rat middle_cap = mu1.mass().rat() + mu2.mass().rat();

  std::vector<int> left_edge(nl), right_edge(nr);
  struct Middle {
    int edge_id;
    int a;
    int b;
  };
  std::vector<Middle> middles;
  int edge_count = 0;
  for (int i = 0; i < nl; ++i) left_edge[i] = edge_count++, net.add_edge(source, 1 + i, left_mass[i]);
  for (int j = 0; j < nr; ++j) right_edge[j] = edge_count++, net.add_edge(1 + nl + j, sink, right_mass[j]);
  for (int i = 0; i < nl; ++i)
    for (int j = 0; j < nr; ++j)
      if (rel.contains(*left[i], *right[j])) {
        middles.push_back({edge_count++, i, j});
        net.add_edge(1 + i, 1 + nl + j, middle_cap);
      }

  result.max_flow = net.run(source, sink);
  if (result.max_flow == result.required) {
    typename CouplingWitness<A, B, LessA, LessB>::Joint::Builder jb;
    for (const auto& m : middles) {
      Rat f = net.flow_on(m.edge_id);
      if (f != 0) jb.add(std::make_pair(*left[m.a], *right[m.b]), f);
    }
    result.witness = CouplingWitness<A, B, LessA, LessB>{std::move(jb).build()};
    return result;
  }

  // Infeasible: the residual min-cut yields a set S of left outcomes with
  // mu1(S) > mu2(R(S)), the Gale-Hoffman obstruction reported to callers.
  const auto seen = net.residual_reachable(source);
  Rat req = 0, avail = 0;
  std::vector<char> right_hit(nr, 0);
  for (int i = 0; i < nl; ++i) {
    if (!seen[1 + i]) continue;
    result.deficit_left.push_back(*left[i]);
    req += left_mass[i];
    for (const auto& m : middles)
      if (m.a == i && !right_hit[m.b]) {
        right_hit[m.b] = 1;
        avail += right_mass[m.b];
      }
  }
  result.deficit_required = req;
  result.deficit_available = avail;
  return result;
}

/// Existence decision returning just the witness (if any).
template <class A, class B, class LessA, class LessB>
std::optional<CouplingWitness<A, B, LessA, LessB>> exists_coupling(
    const SubDist<A, LessA>& mu1, const SubDist<B, LessB>& mu2,
    const Relation<A, B, LessA, LessB>& rel) {
  return solve_coupling(mu1, mu2, rel).witness;
}

/// Composition of couplings along the monadic structure: given a valid
/// R-witness for (mu1, mu2) and, for every (a, b) in its support, a valid
/// S-witness for (f1(a), f2(b)), produces a valid S-witness for
/// (bind(mu1, f1), bind(mu2, f2)).  Throws InputError when a per-pair
/// witness is missing or fails validation.
template <class A, class B, class A2, class B2, class LessA, class LessB,
          class LessA2 = std::less<A2>, class LessB2 = std::less<B2>, class F1,
          class F2, class PerPair>
CouplingWitness<A2, B2, LessA2, LessB2> compose(
    const CouplingWitness<A, B, LessA, LessB>& w1, F1&& f1, F2&& f2,
    const Relation<A2, B2, LessA2, LessB2>& s, PerPair&& per_pair) {
  typename CouplingWitness<A2, B2, LessA2, LessB2>::Joint::Builder jb;
  for (const auto& [ab, p] : w1.joint.entries()) {
    const auto& [a, b] = ab;
    std::optional<CouplingWitness<A2, B2, LessA2, LessB2>> wab = per_pair(a, b);
    if (!wab) throw InputError("compose: missing per-pair witness");
    auto check = check_witness(f1(a), f2(b), s, *wab);
    if (!check)
      throw InputError("compose: invalid per-pair witness: " + check.violation);
    for (const auto& [a2b2, q] : wab->joint.entries())
      jb.add(a2b2, p.rat() * q.rat());
  }
  return {std::move(jb).build()};
}

/// From a valid (=)-witness, re-checks the pointwise inequality
/// mu1(a) <= mu2(a) by direct comparison and returns the witness table.
/// A counterexample indicates a checker bug and raises InconsistencyError.
template <class A, class LessA>
std::vector<std::tuple<A, Prob, Prob>> pointwise_bound(
    const SubDist<A, LessA>& mu1, const SubDist<A, LessA>& mu2,
    const CouplingWitness<A, A, LessA, LessA>& w) {
  auto check = check_witness(mu1, mu2, Relation<A, A, LessA, LessA>::equality(), w);
  if (!check)
    throw InputError("pointwise_bound: not a valid (=)-witness: " + check.violation);
  std::vector<std::tuple<A, Prob, Prob>> rows;
  for (const auto& [a, p] : mu1.entries()) {
    Prob q = mu2.prob_of(a);
    if (p > q)
      throw InconsistencyError("pointwise inequality violated despite valid witness");
    rows.emplace_back(a, p, q);
  }
  return rows;
}

/// From any valid witness, re-checks mass(mu1) <= mass(mu2) exactly and
/// returns both masses.
template <class A, class B, class LessA, class LessB>
std::pair<Prob, Prob> mass_bound(const SubDist<A, LessA>& mu1,
                                 const SubDist<B, LessB>& mu2,
                                 const Relation<A, B, LessA, LessB>& rel,
                                 const CouplingWitness<A, B, LessA, LessB>& w) {
  auto check = check_witness(mu1, mu2, rel, w);
  if (!check) throw InputError("mass_bound: invalid witness: " + check.violation);
  Prob m1 = mu1.mass();
  Prob m2 = mu2.mass();
  if (m1 > m2)
    throw InconsistencyError("mass inequality violated despite valid witness");
  return {m1, m2};
}

/// Serializes a witness as an array of {left, right, numerator, denominator}.
template <class A, class B, class LessA, class LessB, class AToJson, class BToJson>
nlohmann::json witness_to_json(const CouplingWitness<A, B, LessA, LessB>& w,
                               AToJson&& left, BToJson&& right) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [ab, p] : w.joint.entries()) {
    arr.push_back({{"left", left(ab.first)},
                   {"right", right(ab.second)},
                   {"numerator", rat_num(p.rat()).str()},
                   {"denominator", rat_den(p.rat()).str()}});
  }
  return arr;
}

}  // namespace termref
