// Acceptance suite: every criterion below is pinned in code with its stated
// tolerance (exact rationals unless noted) and runtime bound, and prints one
// pass/fail line.

#include <gtest/gtest.h>

#include <chrono>
#include <cstdio>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "termref/analyze.hpp"
#include "termref/corpus.hpp"

using namespace termref;
using nlohmann::json;

namespace {

class Criterion {
 public:
  Criterion(int number, std::string summary, double seconds_limit)
      : number_(number),
        summary_(std::move(summary)),
        limit_(seconds_limit),
        start_(std::chrono::steady_clock::now()) {}

  ~Criterion() {
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                start_)
                      .count();
    bool ok = !::testing::Test::HasFailure() && secs < limit_;
    std::printf("[criterion %d] %s: %s (%.2fs, limit %.0fs)\n", number_,
                ok ? "PASS" : "FAIL", summary_.c_str(), secs, limit_);
    EXPECT_LT(secs, limit_) << "criterion " << number_ << " exceeded its time limit";
  }

 private:
  int number_;
  std::string summary_;
  double limit_;
  std::chrono::steady_clock::time_point start_;
};

std::filesystem::path root() { return TERMREF_CORPUS_DIR; }

corpus::CaseStudy fixture(const std::string& name) {
  return corpus::load_case(root() / name);
}

}  // namespace

TEST(Acceptance, Criterion1FlipClosedForm) {
  Criterion c(1, "flip model matches 1 - 2^-n exactly for n in 0..30", 1.0);
  auto flip = model_zoo("flip");
  for (std::size_t n = 0; n <= 30; ++n) {
    Rat expected = Rat(1) - Rat(Int(1), Int(1) << n);
    ASSERT_EQ(term_prob_lower(flip, json(true), n).rat(), expected) << "n=" << n;
  }
}

TEST(Acceptance, Criterion2WalkTruncationsVsOracle) {
  Criterion c(2, "random-walk exec_n from 1 equals path-enumeration oracle, n <= 16",
              5.0);
  auto walk = model_zoo("random_walk");
  ASSERT_EQ(term_prob_lower(walk, json(1), 3).rat(), Rat(5, 8));
  for (std::size_t n = 0; n <= 16; ++n)
    ASSERT_EQ(term_prob_lower(walk, json(1), n).rat(), oracles::walk_hit_prob(1, n))
        << "n=" << n;
}

TEST(Acceptance, Criterion3CouplingDeciderVsOracle) {
  Criterion c(3, "exists_coupling agrees with exhaustive feasibility on 500 instances",
              30.0);
  std::mt19937_64 rng(0xacce97);
  for (int i = 0; i < 500; ++i) {
    auto mu1 = oracles::random_subdist(rng);
    auto mu2 = oracles::random_subdist(rng);
    auto rel = oracles::random_relation(rng);
    auto witness = exists_coupling(mu1, mu2, rel);
    bool feasible = oracles::coupling_feasible_oracle(mu1, mu2, rel);
    ASSERT_EQ(witness.has_value(), feasible) << "instance " << i;
    if (witness) ASSERT_TRUE(check_witness(mu1, mu2, rel, *witness)) << "instance " << i;
  }
}

TEST(Acceptance, Criterion4AlgebraPropertySuites) {
  Criterion c(4, "monad laws, mass and pointwise lemmas, composition x1000 each", 60.0);
  std::mt19937_64 rng(0x5eed);
  using U64Dist = SubDist<std::uint64_t>;
  using Rel = Relation<std::uint64_t, std::uint64_t>;

  // Monad laws.
  auto f = [](const std::uint64_t& k) {
    typename U64Dist::Builder b;
    b.add(k % 3, Rat(1, 3));
    b.add(k + 2, Rat(1, 2));
    return std::move(b).build();
  };
  auto g = [](const std::uint64_t& k) {
    return k % 2 == 0 ? U64Dist::zero() : uniform(k % 4);
  };
  for (int i = 0; i < 1000; ++i) {
    auto mu = oracles::random_subdist(rng);
    std::uint64_t a = rng() % 6;
    ASSERT_EQ(mbind(mret(a), f), f(a));
    ASSERT_EQ(mbind(mu, [](const std::uint64_t& k) { return mret(k); }), mu);
    ASSERT_EQ(mbind(mbind(mu, f), g),
              mbind(mu, [&](const std::uint64_t& k) { return mbind(f(k), g); }));
  }

  // Mass lemma: any valid witness bounds mass(mu1) by mass(mu2).
  int checked = 0;
  for (int i = 0; checked < 1000 && i < 20000; ++i) {
    auto mu1 = oracles::random_subdist(rng);
    auto mu2 = oracles::random_subdist(rng);
    auto rel = oracles::random_relation(rng, 4, 65);
    if (auto w = exists_coupling(mu1, mu2, rel)) {
      auto [m1, m2] = mass_bound(mu1, mu2, Rel::full(), *w);
      ASSERT_LE(m1.rat(), m2.rat());
      ++checked;
    }
  }
  ASSERT_EQ(checked, 1000);

  // Pointwise lemma for (=)-witnesses.
  checked = 0;
  for (int i = 0; checked < 1000 && i < 20000; ++i) {
    auto mu1 = oracles::random_subdist(rng);
    auto mu2 = oracles::random_subdist(rng);
    if (auto w = exists_coupling(mu1, mu2, Rel::equality())) {
      for (const auto& [a, p1, p2] : pointwise_bound(mu1, mu2, *w)) {
        (void)a;
        ASSERT_LE(p1.rat(), p2.rat());
      }
      ++checked;
    }
  }
  ASSERT_EQ(checked, 1000);

  // Composition along the monad.
  auto f1 = [](const std::uint64_t& k) { return uniform(k % 3); };
  checked = 0;
  for (int i = 0; checked < 1000 && i < 40000; ++i) {
    auto mu1 = oracles::random_subdist(rng);
    auto mu2 = oracles::random_subdist(rng);
    auto rel = oracles::random_relation(rng, 4, 70);
    auto w1 = exists_coupling(mu1, mu2, rel);
    if (!w1) continue;
    auto s = Rel::full();
    auto composed = compose(*w1, f1, f1, s,
                            [&](const std::uint64_t& a, const std::uint64_t& b) {
                              return exists_coupling(f1(a), f1(b), s);
                            });
    ASSERT_TRUE(check_witness(mbind(mu1, f1), mbind(mu2, f1), s, composed))
        << "instance " << i;
    ++checked;
  }
  ASSERT_EQ(checked, 1000);
}

TEST(Acceptance, Criterion5FiniteIndexErasure) {
  Criterion c(5, "presampling erasure holds exactly for n <= 25 on the three drivers",
              60.0);
  using randml::Config;
  using randml::ConfigDist;
  using randml::State;

  auto exec_of = [](randml::ExprPtr e, const State& s, std::size_t n) {
    auto pm = randml::as_markov(e, s);
    return exec_n(pm.model, pm.start, n);
  };
  auto masked = [](const ConfigDist& d, std::uint64_t label) {
    return map_outcomes<randml::ConfigLess>(d, [label](const Config& cfg) {
      Config out = cfg;
      auto it = out.state.tapes.find(label);
      if (it != out.state.tapes.end()) it->second.queue.clear();
      return out;
    });
  };
  auto check = [&](randml::ExprPtr e, const State& s, std::uint64_t label) {
    for (std::size_t n = 0; n <= 25; ++n) {
      ConfigDist lhs = exec_of(e, s, n);
      typename ConfigDist::Builder rb;
      const auto presampled = randml::state_step(s, label);
      for (const auto& [s2, p] : presampled.entries()) {
        const ConfigDist branch = exec_of(e, s2, n);
        for (const auto& [cfg, q] : branch.entries())
          rb.add(cfg, p.rat() * q.rat());
      }
      ConfigDist rhs = std::move(rb).build();
      ASSERT_EQ(lhs.mass().rat(), rhs.mass().rat()) << "n=" << n;
      ASSERT_EQ(masked(lhs, label), masked(rhs, label)) << "n=" << n;
    }
  };

  State tape_state;
  tape_state.tapes[0] = randml::Tape{1, {}};
  tape_state.next_lbl = 1;
  check(fixture("flips").program, tape_state, 0);
  check(fixture("walk").program, tape_state, 0);

  Config cfg{fixture("lazyreal").program, State{}};
  for (;;) {
    auto mu = randml::step_distr(cfg);
    if (mu.support_size() != 1) break;
    cfg = mu.entries().begin()->first;
  }
  ASSERT_EQ(cfg.state.tapes.size(), 2u);
  check(cfg.expr, cfg.state, 0);
  check(cfg.expr, cfg.state, 1);
}

TEST(Acceptance, Criterion6RsmCertificates) {
  Criterion c(6, "listgen and two-coin RSMs verify with exact drifts", 1.0);
  auto lg = fixture("listgen");
  auto lg_report = check_rsm(*lg.model, *lg.rsm, lg.rsm_states);
  ASSERT_TRUE(lg_report.verified);
  Rat drift_q0, drift_q1;
  for (const auto& row : lg_report.rows) {
    if (row.state == json("q_0")) drift_q0 = row.drift;
    if (row.state == json("q_1")) drift_q1 = row.drift;
  }
  ASSERT_EQ(drift_q0, Rat(3, 2));
  ASSERT_EQ(drift_q1, Rat(5, 2));

  auto lr = fixture("lazyreal");
  auto lr_report = check_rsm(*lr.model, *lr.rsm, lr.rsm_states);
  ASSERT_TRUE(lr_report.verified);
  for (const auto& row : lr_report.rows)
    if (row.checked) {
      ASSERT_EQ(row.drift, Rat(1));
      ASSERT_EQ(row.bound, Rat(1));
    }
}

TEST(Acceptance, Criterion7RefinementCertificatesAndMutants) {
  Criterion c(7, "flips/walk certificates accept; all mutants rejected", 60.0);
  auto flips = fixture("flips");
  auto walk = fixture("walk");
  ASSERT_TRUE(refine::check_certificate(*flips.model, flips.model_start,
                                        {flips.program, {}}, *flips.certificate)
                  .accepted);
  ASSERT_TRUE(refine::check_certificate(*walk.model, walk.model_start,
                                        {walk.program, {}}, *walk.certificate)
                  .accepted);

  auto drop = [](json doc, const std::string& node, std::size_t i) {
    doc["nodes"][node]["relation"].erase(i);
    return doc;
  };
  auto perturb = [](JsonModel base, json at, JsonDist repl) {
    auto inner = base.step;
    base.step = [inner, at, repl](const json& s) { return s == at ? repl : inner(s); };
    return base;
  };
  json fdoc = corpus::read_json(root() / "flips" / "refinement.json");
  json wdoc = corpus::read_json(root() / "walk" / "refinement.json");

  struct Mutant {
    const corpus::CaseStudy* cs;
    refine::Certificate cert;
    std::optional<JsonModel> model;
  };
  std::vector<Mutant> mutants;
  for (std::size_t i = 0; i < 2; ++i)
    mutants.push_back({&flips, refine::certificate_from_json(drop(fdoc, "loop", i)), {}});
  mutants.push_back({&flips, refine::certificate_from_json(drop(fdoc, "init", 0)), {}});
  for (std::size_t i = 0; i < 3; ++i)
    mutants.push_back({&walk, refine::certificate_from_json(drop(wdoc, "flip", i)), {}});
  mutants.push_back({&walk, refine::certificate_from_json(drop(wdoc, "loop0", 0)), {}});
  mutants.push_back({&walk, refine::certificate_from_json(drop(wdoc, "init", 0)), {}});
  mutants.push_back({&flips, refine::certificate_from_json(fdoc),
                     perturb(model_zoo("flip"), json(true),
                             JsonDist::from_entries({{json(true), Rat(2, 3)},
                                                     {json(false), Rat(1, 3)}}))});
  mutants.push_back({&flips, refine::certificate_from_json(fdoc),
                     perturb(model_zoo("flip"), json(true),
                             JsonDist::from_entries({{json(true), Rat(1, 4)},
                                                     {json(false), Rat(3, 4)}}))});
  mutants.push_back({&walk, refine::certificate_from_json(wdoc),
                     perturb(model_zoo("random_walk"), json(1),
                             JsonDist::from_entries({{json(0), Rat(1, 3)},
                                                     {json(2), Rat(2, 3)}}))});
  mutants.push_back({&walk, refine::certificate_from_json(wdoc),
                     perturb(model_zoo("random_walk"), json(3),
                             JsonDist::from_entries({{json(2), Rat(1, 4)},
                                                     {json(4), Rat(3, 4)}}))});
  ASSERT_GE(mutants.size(), 10u);
  for (std::size_t i = 0; i < mutants.size(); ++i) {
    auto& m = mutants[i];
    auto report = refine::check_certificate(m.model ? *m.model : *m.cs->model,
                                            m.cs->model_start, {m.cs->program, {}},
                                            m.cert);
    ASSERT_FALSE(report.accepted) << "mutant " << i << " wrongly accepted";
    ASSERT_FALSE(report.inconclusive) << "mutant " << i;
  }
}

TEST(Acceptance, Criterion8SoundnessInequalities) {
  Criterion c(8, "Thm-style inequality witnessed exactly at documented depths", 300.0);
  for (const char* name : {"flips", "walk", "listgen", "lazyreal", "gentree"}) {
    SCOPED_TRACE(name);
    auto cs = fixture(name);
    ASSERT_TRUE(cs.compare_model_depth.has_value());
    ASSERT_GE(*cs.compare_model_depth, 4u);
    auto rep = refine::soundness_crosscheck(*cs.model, cs.model_start, cs.program, {},
                                            *cs.compare_model_depth,
                                            cs.compare_depth_budget);
    ASSERT_TRUE(rep.accepted) << name;
    ASSERT_EQ(rep.witness_depth, cs.compare_witness_depth) << name;
    ASSERT_LE(rep.model_mass, rep.program_mass) << name;
  }
}

TEST(Acceptance, Criterion9AstSubstitutes) {
  Criterion c(9,
              "AST at desk scale: monotone curves, finite-depth inequalities, "
              "MC bands, RSMs",
              300.0);
  // Monotone nondecreasing mass curves for every fixture pair.
  for (const char* name : {"flips", "walk", "listgen", "lazyreal", "gentree"}) {
    auto cs = fixture(name);
    auto rep = refine::soundness_crosscheck(*cs.model, cs.model_start, cs.program, {},
                                            *cs.compare_model_depth,
                                            cs.compare_depth_budget);
    ASSERT_TRUE(rep.accepted) << name;
    for (std::size_t d = 1; d < rep.model_rows.size(); ++d)
      ASSERT_LE(rep.model_rows[d - 1].mass, rep.model_rows[d].mass) << name;
    for (std::size_t d = 1; d < rep.program_rows.size(); ++d)
      ASSERT_LE(rep.program_rows[d - 1].mass, rep.program_rows[d].mass) << name;
  }
  // Monte-Carlo estimates within the Hoeffding band of 1 (advisory).
  for (const char* name : {"flips", "lazyreal"}) {
    auto cs = fixture(name);
    auto mc = mc_estimate(cs.program, 10000, 10000, 2024);
    ASSERT_GE(mc.estimate, 1.0 - mc.half_width) << name;
  }
  // The RSM certificates of criterion 6 remain verified.
  for (const char* name : {"listgen", "lazyreal"}) {
    auto cs = fixture(name);
    ASSERT_TRUE(check_rsm(*cs.model, *cs.rsm, cs.rsm_states).verified) << name;
  }
}
