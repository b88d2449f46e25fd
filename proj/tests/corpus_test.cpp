#include "termref/corpus.hpp"

#include <gtest/gtest.h>

#include <set>

#include "termref/analyze.hpp"

using namespace termref;
using nlohmann::json;

namespace {

std::filesystem::path root() { return TERMREF_CORPUS_DIR; }

corpus::CaseStudy fixture(const std::string& name) {
  return corpus::load_case(root() / name);
}

}  // namespace

TEST(Corpus, ListsAllSixCaseStudies) {
  auto all = corpus::corpus_list(root());
  std::set<std::string> names;
  for (const auto& cs : all) names.insert(cs.name);
  EXPECT_EQ(names, (std::set<std::string>{"flips", "walk", "listgen", "lazyreal",
                                          "treap", "gentree"}));
  for (const auto& cs : all) {
    EXPECT_TRUE(randml::is_closed(cs.program)) << cs.name;
    EXPECT_FALSE(cs.meta.at("description").get<std::string>().empty());
  }
}

TEST(Corpus, EveryFixtureRunsWithoutStuckStates) {
  for (const auto& cs : corpus::corpus_list(root())) {
    SCOPED_TRACE(cs.name);
    std::uint64_t stuck = 0, exhausted = 0;
    for (std::uint64_t i = 0; i < cs.run_trials; ++i) {
      auto out = randml::run_sample(cs.program, randml::derive_seed(2024, i),
                                    cs.run_step_budget);
      if (out.status == randml::RunOutcome::Status::Stuck) ++stuck;
      if (out.status == randml::RunOutcome::Status::BudgetExhausted) ++exhausted;
    }
    EXPECT_EQ(stuck, 0u);
    // Budget exhaustion is possible for the heavy-tailed walks but must stay
    // rare at these budgets.
    EXPECT_LE(exhausted, cs.run_trials / 50);
  }
}

TEST(Corpus, CertificatesAndRsmsAndComparisons) {
  for (const auto& cs : corpus::corpus_list(root())) {
    SCOPED_TRACE(cs.name);
    if (cs.certificate) {
      ASSERT_TRUE(cs.model.has_value());
      auto rep = refine::check_certificate(*cs.model, cs.model_start,
                                           {cs.program, {}}, *cs.certificate);
      EXPECT_TRUE(rep.accepted) << rep.to_json().dump(2);
    }
    if (cs.rsm) {
      auto rep = check_rsm(*cs.model, *cs.rsm, cs.rsm_states);
      EXPECT_TRUE(rep.verified) << rep.first_violation;
    }
    if (cs.compare_model_depth) {
      auto rep = refine::soundness_crosscheck(*cs.model, cs.model_start, cs.program,
                                              {}, *cs.compare_model_depth,
                                              cs.compare_depth_budget);
      ASSERT_TRUE(rep.accepted);
      EXPECT_EQ(rep.witness_depth, cs.compare_witness_depth);
      EXPECT_LE(rep.model_mass, rep.program_mass);
      // Both exact mass curves are monotone.
      for (std::size_t d = 1; d < rep.program_rows.size(); ++d)
        EXPECT_LE(rep.program_rows[d - 1].mass, rep.program_rows[d].mass);
    }
  }
}

TEST(Corpus, LazyRealComparisonsAreConsistent) {
  // The driver compares the same pair twice; digits are memoized in the
  // heap, so the two signs agree and are strict (+1 or -1) for distinct
  // samplers across every trajectory.
  auto cs = fixture("lazyreal");
  for (std::uint64_t i = 0; i < 500; ++i) {
    auto out = randml::run_sample(cs.program, randml::derive_seed(5, i),
                                  cs.run_step_budget);
    ASSERT_EQ(out.status, randml::RunOutcome::Status::Terminated);
    randml::ExprPtr v = out.value;
    ASSERT_EQ(v->kind, randml::ExprKind::Pair);
    EXPECT_EQ(v->a, v->b) << "comparison signs diverged";
    ASSERT_EQ(v->a->kind, randml::ExprKind::Int);
    EXPECT_TRUE(v->a->ival == 1 || v->a->ival == -1);
  }
}

TEST(Treap, InsertIntoEmptyMakesSingleNodeWithoutComparisons) {
  auto cs = corpus::transcribe_treap_insert(root());
  std::string preamble = cs.program_source.substr(0, cs.program_source.find("let t0"));
  auto prog = randml::parse(preamble + "insert (inl ()) 5");
  auto out = randml::run_sample(prog, 3, 100000);
  ASSERT_EQ(out.status, randml::RunOutcome::Status::Terminated);
  auto view = corpus::extract_treap(out.value, out.final_config.state);
  ASSERT_EQ(view.size(), 1u);
  EXPECT_EQ(view.nodes[0].key, Int(5));
  // No comparison ran, so no priority digit was sampled.
  EXPECT_TRUE(view.nodes[0].bits.empty());
  EXPECT_TRUE(corpus::validate_treap(view));
}

TEST(Treap, DuplicateInsertLeavesStructureUnchanged) {
  auto cs = corpus::transcribe_treap_insert(root());
  std::string preamble = cs.program_source.substr(0, cs.program_source.find("let t0"));
  auto once = randml::parse(preamble + "let t = insert (inl ()) 5 in t");
  auto twice = randml::parse(preamble + "let t = insert (inl ()) 5 in insert t 5");
  auto o1 = randml::run_sample(once, 11, 100000);
  auto o2 = randml::run_sample(twice, 11, 100000);
  ASSERT_EQ(o1.status, randml::RunOutcome::Status::Terminated);
  ASSERT_EQ(o2.status, randml::RunOutcome::Status::Terminated);
  auto v1 = corpus::extract_treap(o1.value, o1.final_config.state);
  auto v2 = corpus::extract_treap(o2.value, o2.final_config.state);
  ASSERT_EQ(v1.size(), 1u);
  ASSERT_EQ(v2.size(), 1u);
  EXPECT_EQ(v1.nodes[0].key, v2.nodes[0].key);
  EXPECT_EQ(v1.nodes[0].bits, v2.nodes[0].bits);
}

TEST(Treap, SeededInsertsBuildValidHeapOrderedBst) {
  auto cs = corpus::transcribe_treap_insert(root());
  std::set<std::vector<bool>> priority_shapes;
  for (std::uint64_t i = 0; i < 200; ++i) {
    auto out = randml::run_sample(cs.program, randml::derive_seed(77, i),
                                  cs.run_step_budget);
    ASSERT_EQ(out.status, randml::RunOutcome::Status::Terminated);
    auto view = corpus::extract_treap(out.value, out.final_config.state);
    ASSERT_EQ(view.size(), 3u) << "keys 2, 1, 3 with one duplicate insert";
    std::string why;
    EXPECT_TRUE(corpus::validate_treap(view, &why)) << "seed " << i << ": " << why;
    priority_shapes.insert(view.nodes[0].bits);
  }
  // The randomness actually varies the sampled priorities.
  EXPECT_GT(priority_shapes.size(), 1u);
}

TEST(Treap, ValidatorRejectsBrokenTrees) {
  corpus::TreapView bad;
  bad.nodes.push_back({Int(2), {true}, 1, -1});
  bad.nodes.push_back({Int(5), {false}, -1, -1});  // right child keyed left
  bad.root = 0;
  std::string why;
  EXPECT_FALSE(corpus::validate_treap(bad, &why));
  EXPECT_NE(why.find("BST"), std::string::npos);

  corpus::TreapView heap_bad;
  heap_bad.nodes.push_back({Int(2), {false}, 1, -1});
  heap_bad.nodes.push_back({Int(1), {true}, -1, -1});  // child outranks parent
  heap_bad.root = 0;
  EXPECT_FALSE(corpus::validate_treap(heap_bad, &why));
  EXPECT_NE(why.find("heap"), std::string::npos);

  corpus::TreapView undecided;
  undecided.nodes.push_back({Int(2), {true}, 1, -1});
  undecided.nodes.push_back({Int(1), {true, false}, -1, -1});  // prefix tie
  undecided.root = 0;
  EXPECT_FALSE(corpus::validate_treap(undecided, &why));
  EXPECT_NE(why.find("undecided"), std::string::npos);
}
