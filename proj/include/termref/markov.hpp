#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "termref/subdist.hpp"

namespace termref {

inline constexpr std::size_t kDefaultStateCap = 1'000'000;

/// A (sub-)Markov chain: a step function into sub-distributions over states
/// plus a decidable final predicate.  Final states must not step anywhere;
/// `exec` machinery treats a final state as absorbing.  Step functions must
/// be pure: two calls on the same state must return the same distribution.
template <class S, class Less = std::less<S>>
struct Model {
  std::function<SubDist<S, Less>(const S&)> step;
  std::function<bool(const S&)> is_final;
};

/// One row of a stratified-execution table.
struct ExecRow {
  Rat mass;               // mass(exec_depth): probability of being final within `depth` steps
  Rat frontier_mass;      // probability mass still on non-final states
  std::size_t final_count;
  std::size_t frontier_count;
};

/// Incremental evaluator of the stratified execution distribution
///
///   exec_0(s)     = ret(s) if final(s), else 0
///   exec_n(s)     = ret(s) if final(s), else step(s) >>= exec_{n-1}
///
/// computed as a forward dynamic program over the reachable state set with
/// exact rationals.  States are explored lazily; a configurable cap guards
/// against blow-up (ResourceError).  mass(exec_n) is non-decreasing in n and
/// is a certified lower bound on the termination probability (finite
/// approximations suffice for all bound checks in scope).
template <class S, class Less = std::less<S>>
class ExecRunner {
 public:
  ExecRunner(Model<S, Less> model, const S& start,
             std::size_t state_cap = kDefaultStateCap)
      : model_(std::move(model)), state_cap_(state_cap) {
    if (model_.is_final(start)) {
      finals_.emplace(start, Rat(1));
      final_mass_ = 1;
    } else {
      frontier_.emplace(start, Rat(1));
      frontier_mass_ = 1;
    }
    rows_.push_back(snapshot());
  }

  std::size_t depth() const { return rows_.size() - 1; }
  const std::vector<ExecRow>& rows() const { return rows_; }
  const ExecRow& row() const { return rows_.back(); }

  /// exec_depth(start), a sub-distribution over final states only.
  SubDist<S, Less> finals() const {
    typename SubDist<S, Less>::Builder b;
    for (const auto& [s, p] : finals_) b.add(s, p);
    return std::move(b).build();
  }

  Prob mass() const { return Prob(final_mass_); }
  bool frontier_empty() const { return frontier_.empty(); }

  /// Advances the table by one depth.  Returns false (and does nothing) once
  /// the frontier is exhausted, i.e. when exec_n has converged exactly.
  bool advance() {
    if (frontier_.empty()) return false;
    std::map<S, Rat, Less> next;
    Rat next_mass = 0;
    for (const auto& [s, p] : frontier_) {
      const auto mu = model_.step(s);
      for (const auto& [t, q] : mu.entries()) {
        Rat m = p * q.rat();
        if (model_.is_final(t)) {
          finals_[t] += m;
          final_mass_ += m;
        } else {
          next[t] += m;
          next_mass += m;
        }
      }
    }
    frontier_ = std::move(next);
    frontier_mass_ = std::move(next_mass);
    if (frontier_.size() + finals_.size() > state_cap_)
      throw ResourceError("state cap exceeded at depth " +
                          std::to_string(depth() + 1) + " (" +
                          std::to_string(frontier_.size()) + " frontier states)");
    rows_.push_back(snapshot());
    return true;
  }

  /// Advances until depth n (or convergence).
  void advance_to(std::size_t n) {
    while (depth() < n && advance()) {
    }
    // Converged early: the table is constant from here on.
    while (rows_.size() <= n) rows_.push_back(snapshot());
  }

 private:
  ExecRow snapshot() const {
    return {final_mass_, frontier_mass_, finals_.size(), frontier_.size()};
  }

  Model<S, Less> model_;
  std::size_t state_cap_;
  std::map<S, Rat, Less> frontier_;
  std::map<S, Rat, Less> finals_;
  Rat final_mass_ = 0;
  Rat frontier_mass_ = 0;
  std::vector<ExecRow> rows_;
};

/// Per-depth execution table for depths 0..n.
template <class S, class Less = std::less<S>>
struct ExecTable {
  std::vector<ExecRow> rows;
  SubDist<S, Less> finals;  // exec_n at the deepest row
};

template <class S, class Less>
ExecTable<S, Less> exec_table(const Model<S, Less>& model, const S& start,
                              std::size_t n,
                              std::size_t state_cap = kDefaultStateCap) {
  ExecRunner<S, Less> runner(model, start, state_cap);
  runner.advance_to(n);
  return {runner.rows(), runner.finals()};
}

/// exec_n(start): the distribution over final states reached within n steps.
template <class S, class Less>
SubDist<S, Less> exec_n(const Model<S, Less>& model, const S& start,
                        std::size_t n, std::size_t state_cap = kDefaultStateCap) {
  return exec_table(model, start, n, state_cap).finals;
}

/// mass(exec_n(start)): a certified lower bound on the termination
/// probability from `start`, non-decreasing in n.
template <class S, class Less>
Prob term_prob_lower(const Model<S, Less>& model, const S& start, std::size_t n,
                     std::size_t state_cap = kDefaultStateCap) {
  return exec_n(model, start, n, state_cap).mass();
}

/// CSV export of an execution table: depth, mass_num, mass_den.
inline std::string exec_rows_to_csv(const std::vector<ExecRow>& rows) {
  std::string out = "depth,mass_num,mass_den\n";
  for (std::size_t d = 0; d < rows.size(); ++d) {
    out += std::to_string(d) + "," + rat_num(rows[d].mass).str() + "," +
           rat_den(rows[d].mass).str() + "\n";
  }
  return out;
}

}  // namespace termref
