#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "termref/markov.hpp"
#include "termref/models.hpp"
#include "termref/randml/step.hpp"
#include "termref/refine.hpp"

namespace termref {

/// Exact truncated execution of a program: per-depth termination masses and
/// reachable-configuration counts.
struct ExactReport {
  std::vector<ExecRow> rows;            // depths 0..n
  randml::ConfigDist finals;            // exec_n over final configurations
  std::string csv() const { return exec_rows_to_csv(rows); }
};

/// Forward DP over configuration distributions with exact rationals.
/// Programs are canonically renamed first so that alpha-equivalent closures
/// created at equal binding depth hash identically and merge.
inline ExactReport exact_exec_program(randml::ExprPtr program,
                                      const randml::State& init_state,
                                      std::size_t n,
                                      std::size_t config_cap = kDefaultStateCap) {
  auto pm = randml::as_markov(randml::canonicalize(program), init_state);
  auto table = exec_table(pm.model, pm.start, n, config_cap);
  return {std::move(table.rows), std::move(table.finals)};
}

/// Monte-Carlo estimate of the termination probability with a
/// distribution-free two-sided Hoeffding bound.  Advisory only: estimates
/// never feed accept/reject decisions for refinement.
struct MCReport {
  std::uint64_t trials{0};
  std::uint64_t seed{0};
  std::uint64_t step_budget{0};
  std::uint64_t terminated{0};
  std::uint64_t stuck{0};
  double estimate{0.0};
  // Two-sided Hoeffding band: P(|est - p| >= half_width) <= delta with
  // half_width = sqrt(ln(2/delta) / (2 * trials)).
  double delta{0.01};
  double half_width{0.0};
  double lower{0.0};
  double upper{1.0};

  nlohmann::json to_json() const {
    return {{"trials", trials},
            {"seed", seed},
            {"step_budget", step_budget},
            {"terminated", terminated},
            {"stuck", stuck},
            {"estimate", estimate},
            {"interval", {{"method", "hoeffding"},
                          {"delta", delta},
                          {"half_width", half_width},
                          {"lower", lower},
                          {"upper", upper}}}};
  }
};

/// Termination-inequality harness: delegates to the soundness cross-check
/// and carries both exact mass curves for CSV export.
struct CompareReport {
  refine::CrossReport cross;
  std::string model_csv() const { return exec_rows_to_csv(cross.model_rows); }
  std::string program_csv() const { return exec_rows_to_csv(cross.program_rows); }
};

inline CompareReport compare(const JsonModel& model, const nlohmann::json& model_start,
                             randml::ExprPtr program, const randml::State& init_state,
                             std::size_t n, std::size_t depth_budget,
                             std::size_t state_cap = kDefaultStateCap) {
  return {refine::soundness_crosscheck(model, model_start, program, init_state, n,
                                       depth_budget, state_cap)};
}

inline MCReport mc_estimate(randml::ExprPtr program, std::uint64_t trials,
                            std::uint64_t step_budget, std::uint64_t seed,
                            double delta = 0.01,
                            const randml::State& init_state = randml::State{}) {
  if (trials < 1) throw InputError("mc_estimate requires at least one trial");
  MCReport r;
  r.trials = trials;
  r.seed = seed;
  r.step_budget = step_budget;
  r.delta = delta;
  for (std::uint64_t i = 0; i < trials; ++i) {
    auto out = randml::run_sample(program, randml::derive_seed(seed, i), step_budget,
                                  init_state);
    if (out.status == randml::RunOutcome::Status::Terminated) ++r.terminated;
    if (out.status == randml::RunOutcome::Status::Stuck) ++r.stuck;
  }
  r.estimate = static_cast<double>(r.terminated) / static_cast<double>(trials);
  r.half_width = std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(trials)));
  r.lower = std::max(0.0, r.estimate - r.half_width);
  r.upper = std::min(1.0, r.estimate + r.half_width);
  return r;
}

}  // namespace termref
