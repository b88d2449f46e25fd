#include "termref/refine.hpp"

#include <gtest/gtest.h>

#include "termref/corpus.hpp"

using namespace termref;
using namespace termref::refine;
using nlohmann::json;

namespace {

corpus::CaseStudy load_fixture(const std::string& name) {
  return corpus::load_case(std::filesystem::path(TERMREF_CORPUS_DIR) / name);
}

json cert_doc(const std::string& name) {
  return corpus::read_json(std::filesystem::path(TERMREF_CORPUS_DIR) / name /
                           "refinement.json");
}

CertReport check_fixture(const corpus::CaseStudy& cs, const Certificate& cert,
                         const JsonModel* model_override = nullptr,
                         std::size_t budget = 1'000'000) {
  return check_certificate(model_override ? *model_override : *cs.model,
                           cs.model_start, {cs.program, {}}, cert, budget);
}

json drop_relation_entry(json doc, const std::string& node, std::size_t index) {
  auto& rel = doc.at("nodes").at(node).at("relation");
  rel.erase(rel.begin() + index);
  return doc;
}

/// The zoo model with one state's step distribution replaced.
JsonModel perturb(JsonModel base, json at, JsonDist replacement) {
  auto inner_step = base.step;
  base.step = [inner_step, at, replacement](const json& s) {
    return s == at ? replacement : inner_step(s);
  };
  return base;
}

}  // namespace

TEST(ParamExpr, EvalAndGuards) {
  ParamEnv env{{"n", 3}};
  EXPECT_EQ(eval_param_expr("n + 1", env), json(4));
  EXPECT_EQ(eval_param_expr("n - 4", env), json(-1));
  EXPECT_EQ(eval_param_expr("'q_0'", env), json("q_0"));
  EXPECT_EQ(eval_param_expr("true", env), json(true));
  EXPECT_EQ(eval_param_expr("[true, n]", env), json::array({true, 3}));
  EXPECT_TRUE(eval_guard("n >= 1", env));
  EXPECT_FALSE(eval_guard("n == 0", env));
  EXPECT_TRUE(eval_guard("n != 0", env));
  EXPECT_THROW(eval_param_expr("m + 1", env), InputError);
  EXPECT_THROW(eval_guard("n", env), InputError);
  // Non-string model fields are literals, strings are expressions.
  EXPECT_EQ(eval_state_field(json(true), env), json(true));
  EXPECT_EQ(eval_state_field(json("n + 1"), env), json(4));
}

TEST(Pattern, MatchAndInstantiate) {
  auto pat = pattern_from_json(json{{"expr", "if ${n} == 0 then () else ${n} - 1"}});
  ParamEnv env{{"n", 5}};
  Config inst = instantiate(pat, env);
  EXPECT_EQ(inst.expr, randml::parse("if 5 == 0 then () else 5 - 1"));
  ParamEnv out;
  EXPECT_TRUE(match_config(pat, inst, out));
  EXPECT_EQ(out.at("n"), 5);
  // Inconsistent hole bindings are rejected.
  Config bad{randml::parse("if 5 == 0 then () else 6 - 1"), {}};
  ParamEnv out2;
  EXPECT_FALSE(match_config(pat, bad, out2));
  // Heap domain and counters must agree exactly.
  auto pat2 = pattern_from_json(json{{"expr", "()"}, {"heap", {{"0", "${k}"}}}});
  randml::State st;
  st.heap[0] = randml::mk_int(9);
  st.next_loc = 1;
  ParamEnv out3;
  EXPECT_TRUE(match_config(pat2, {randml::mk_unit(), st}, out3));
  EXPECT_EQ(out3.at("k"), 9);
  st.heap[1] = randml::mk_int(1);
  ParamEnv out4;
  EXPECT_FALSE(match_config(pat2, {randml::mk_unit(), st}, out4));
  EXPECT_THROW(instantiate(pat, ParamEnv{}), InputError);
}

TEST(Certificate, ValidatesShape) {
  EXPECT_THROW(certificate_from_json(json::object()), InputError);
  // Dangling successor reference.
  json doc{{"root", "a"},
           {"nodes",
            {{"a",
              {{"rule", "ref_val"},
               {"model_state", 0},
               {"pattern", {{"expr", "()"}}},
               {"relation", json::array({json::array({"0", "missing"})})}}}}}};
  EXPECT_THROW(certificate_from_json(doc), InputError);
  doc["nodes"]["a"].erase("relation");
  EXPECT_NO_THROW(certificate_from_json(doc));
  doc["root"] = "nope";
  EXPECT_THROW(certificate_from_json(doc), InputError);
}

TEST(CheckNode, FlipsLoopNodeAccepts) {
  auto cs = load_fixture("flips");
  auto check = check_node(*cs.model, *cs.certificate, "loop", {});
  EXPECT_EQ(check.verdict, NodeCheck::Verdict::Accepted) << check.detail;
}

TEST(CheckNode, WalkLoopNodeAcceptsAtSamples) {
  auto cs = load_fixture("walk");
  for (long long n : {1, 2, 3, 5, 8}) {
    auto check = check_node(*cs.model, *cs.certificate, "flip", {{"n", n}});
    EXPECT_EQ(check.verdict, NodeCheck::Verdict::Accepted) << "n=" << n << ": " << check.detail;
  }
}

TEST(CheckNode, StuckConfigIsReducibilityViolation) {
  auto cs = load_fixture("flips");
  json doc{{"root", "a"},
           {"nodes",
            {{"a",
              {{"rule", "ref_model_prog"},
               {"model_state", true},
               {"pattern", {{"expr", "fst 3"}}}}}}}};
  auto cert = certificate_from_json(doc);
  auto check = check_node(*cs.model, cert, "a", {});
  EXPECT_EQ(check.verdict, NodeCheck::Verdict::Rejected);
  EXPECT_NE(check.detail.find("reducibility violation"), std::string::npos);
  // A final model state fails the model-side reducibility condition.
  json doc2 = doc;
  doc2["nodes"]["a"]["pattern"]["expr"] = "rand 1";
  doc2["nodes"]["a"]["model_state"] = false;
  auto check2 = check_node(*cs.model, certificate_from_json(doc2), "a", {});
  EXPECT_EQ(check2.verdict, NodeCheck::Verdict::Rejected);
  EXPECT_NE(check2.detail.find("reducibility violation: model"), std::string::npos);
}

TEST(Certificate, FlipsAccepts) {
  auto cs = load_fixture("flips");
  auto report = check_fixture(cs, *cs.certificate);
  EXPECT_TRUE(report.accepted) << report.to_json().dump(2);
  EXPECT_FALSE(report.inconclusive);
  // Every node accepted, none skipped (no parameters in this certificate).
  for (const auto& c : report.checks)
    EXPECT_EQ(c.verdict, NodeCheck::Verdict::Accepted) << c.key;
}

TEST(Certificate, WalkAccepts) {
  auto cs = load_fixture("walk");
  auto report = check_fixture(cs, *cs.certificate);
  EXPECT_TRUE(report.accepted) << report.to_json().dump(2);
  // The guard excludes n = 0 for the coupling node; the report records it.
  bool skipped = false, accepted = false;
  for (const auto& c : report.checks) {
    if (c.key == "flip" && c.verdict == NodeCheck::Verdict::Skipped) skipped = true;
    if (c.key == "flip" && c.verdict == NodeCheck::Verdict::Accepted) accepted = true;
  }
  EXPECT_TRUE(skipped);
  EXPECT_TRUE(accepted);
  // Pattern nodes were sampled: the report carries the inductive-shape note.
  ASSERT_FALSE(report.notes.empty());
  EXPECT_NE(report.notes[0].find("sampled"), std::string::npos);
}

TEST(Certificate, MutationSuiteAllRejected) {
  auto flips = load_fixture("flips");
  auto walk = load_fixture("walk");
  json flips_doc = cert_doc("flips");
  json walk_doc = cert_doc("walk");

  struct Mutant {
    std::string name;
    const corpus::CaseStudy* cs;
    Certificate cert;
    std::optional<JsonModel> model;
  };
  std::vector<Mutant> mutants;
  auto add = [&](std::string name, const corpus::CaseStudy& cs, json doc,
                 std::optional<JsonModel> model = std::nullopt) {
    mutants.push_back({std::move(name), &cs, certificate_from_json(doc), std::move(model)});
  };

  // Dropped relation pairs.
  add("flips: drop loop->done", flips, drop_relation_entry(flips_doc, "loop", 0));
  add("flips: drop loop->loop", flips, drop_relation_entry(flips_doc, "loop", 1));
  add("flips: drop init->loop", flips, drop_relation_entry(flips_doc, "init", 0));
  add("walk: drop flip n-1", walk, drop_relation_entry(walk_doc, "flip", 0));
  add("walk: drop flip n==1 exit", walk, drop_relation_entry(walk_doc, "flip", 1));
  add("walk: drop flip n+1", walk, drop_relation_entry(walk_doc, "flip", 2));
  add("walk: drop loop0->done", walk, drop_relation_entry(walk_doc, "loop0", 0));
  add("walk: drop init->flip", walk, drop_relation_entry(walk_doc, "init", 0));

  // Perturbed single probabilities in the model.
  add("flips: biased 2/3 coin", flips, flips_doc,
      perturb(model_zoo("flip"), json(true),
              JsonDist::from_entries({{json(true), Rat(2, 3)}, {json(false), Rat(1, 3)}})));
  add("flips: biased 1/4 coin", flips, flips_doc,
      perturb(model_zoo("flip"), json(true),
              JsonDist::from_entries({{json(true), Rat(1, 4)}, {json(false), Rat(3, 4)}})));
  add("walk: biased step at 1", walk, walk_doc,
      perturb(model_zoo("random_walk"), json(1),
              JsonDist::from_entries({{json(0), Rat(1, 3)}, {json(2), Rat(2, 3)}})));
  add("walk: biased step at 3", walk, walk_doc,
      perturb(model_zoo("random_walk"), json(3),
              JsonDist::from_entries({{json(2), Rat(1, 4)}, {json(4), Rat(3, 4)}})));

  ASSERT_GE(mutants.size(), 10u);
  for (auto& m : mutants) {
    auto report = check_fixture(*m.cs, m.cert, m.model ? &*m.model : nullptr);
    EXPECT_FALSE(report.accepted) << m.name << " was wrongly accepted";
    EXPECT_FALSE(report.inconclusive) << m.name;
    // The rejection carries a concrete coupling deficit.
    bool found = false;
    for (const auto& c : report.checks)
      if (c.verdict == NodeCheck::Verdict::Rejected &&
          c.detail.find("deficit") != std::string::npos)
        found = true;
    EXPECT_TRUE(found) << m.name << ": no deficit reported";
  }
}

TEST(Certificate, RejectionDeficitIsInfeasible) {
  // Dropping the loop->loop pair leaves the model's true-successor mass
  // unroutable: required 1/2 through an empty neighborhood.
  auto flips = load_fixture("flips");
  auto cert = certificate_from_json(drop_relation_entry(cert_doc("flips"), "loop", 1));
  auto report = check_fixture(flips, cert);
  ASSERT_FALSE(report.accepted);
  std::string detail;
  for (const auto& c : report.checks)
    if (c.verdict == NodeCheck::Verdict::Rejected) detail = c.detail;
  EXPECT_NE(detail.find("max-flow 1/2"), std::string::npos) << detail;
  EXPECT_NE(detail.find("required 1"), std::string::npos) << detail;
}

TEST(Certificate, BudgetMonotonicity) {
  auto cs = load_fixture("walk");
  // Small budgets are inconclusive, never falsely accepted or rejected.
  auto tiny = check_fixture(cs, *cs.certificate, nullptr, 3);
  EXPECT_FALSE(tiny.accepted);
  EXPECT_TRUE(tiny.inconclusive);
  // Find an accepting budget, then check acceptance is stable above it.
  std::size_t b = 8;
  while (b < (1u << 20) && !check_fixture(cs, *cs.certificate, nullptr, b).accepted) b *= 2;
  auto at = check_fixture(cs, *cs.certificate, nullptr, b);
  ASSERT_TRUE(at.accepted);
  EXPECT_TRUE(check_fixture(cs, *cs.certificate, nullptr, b + 7).accepted);
  EXPECT_TRUE(check_fixture(cs, *cs.certificate, nullptr, b * 2).accepted);
}

TEST(Certificate, RootMismatchRejected) {
  auto cs = load_fixture("flips");
  // Wrong start state: root resolves but the model state disagrees.
  auto report = check_certificate(*cs.model, json(false), {cs.program, {}}, *cs.certificate);
  EXPECT_FALSE(report.accepted);
  EXPECT_NE(report.root_detail.find("differs from the start state"), std::string::npos);
  // Wrong program: does not resolve to the root at all.
  auto other = randml::parse("rand 1");
  auto report2 = check_certificate(*cs.model, json(true), {other, {}}, *cs.certificate);
  EXPECT_FALSE(report2.accepted);
  EXPECT_NE(report2.root_detail.find("does not resolve"), std::string::npos);
}

TEST(Crosscheck, FlipsWitnessedAtDocumentedDepth) {
  auto cs = load_fixture("flips");
  auto rep = soundness_crosscheck(*cs.model, cs.model_start, cs.program, {}, 5, 200);
  ASSERT_TRUE(rep.accepted);
  EXPECT_EQ(rep.model_mass, Rat(31, 32));
  EXPECT_EQ(rep.witness_depth, 24u);
  EXPECT_EQ(rep.program_mass, Rat(31, 32));
}

TEST(Crosscheck, ZeroModelMassIsTrivial) {
  // exec_0 from a non-final model state has mass 0; witnessed at m = 0.
  auto cs = load_fixture("walk");
  auto rep = soundness_crosscheck(*cs.model, json(5), cs.program, {}, 0, 10);
  ASSERT_TRUE(rep.accepted);
  EXPECT_EQ(rep.model_mass, Rat(0));
  EXPECT_EQ(rep.witness_depth, 0u);
}

TEST(Crosscheck, WalkFromTwo) {
  auto cs = load_fixture("walk");
  auto rep = soundness_crosscheck(*cs.model, cs.model_start, cs.program, {}, 6, 300);
  ASSERT_TRUE(rep.accepted);
  EXPECT_EQ(rep.model_mass, Rat(29, 64));
  EXPECT_EQ(rep.witness_depth, 74u);
}

TEST(Crosscheck, BudgetExhaustionIsInconclusive) {
  auto cs = load_fixture("flips");
  auto rep = soundness_crosscheck(*cs.model, cs.model_start, cs.program, {}, 5, 10);
  EXPECT_FALSE(rep.accepted);
  EXPECT_FALSE(rep.witness_depth.has_value());
  // The curves are still reported for inspection.
  EXPECT_EQ(rep.program_rows.size(), 11u);
}
