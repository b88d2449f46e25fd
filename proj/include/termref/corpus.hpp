#pragma once

#include <algorithm>
#include <cstdlib>
#include <functional>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "termref/refine.hpp"
#include "termref/rsm.hpp"

namespace termref::corpus {

using nlohmann::json;

/// One of the case-study fixtures: a program plus the model, certificates,
/// and documented comparison depths that go with it.
struct CaseStudy {
  std::string name;
  std::filesystem::path dir;
  std::string program_source;
  randml::ExprPtr program{nullptr};
  json meta;
  std::optional<JsonModel> model;
  json model_start;
  std::optional<refine::Certificate> certificate;
  std::optional<RSMCertificate> rsm;
  std::vector<json> rsm_states;
  // Documented soundness-inequality depths: model depth n and the program
  // depth m at which the inequality is witnessed.
  std::optional<std::size_t> compare_model_depth;
  std::optional<std::size_t> compare_witness_depth;
  std::size_t compare_depth_budget{200};
  std::uint64_t run_trials{1000};
  std::uint64_t run_step_budget{100000};
};

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json read_json(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError("malformed JSON in " + path.string() + ": " + e.what());
  }
}

/// Locates the corpus directory: $TERMREF_CORPUS, then ./corpus upwards.
inline std::filesystem::path corpus_root() {
  if (const char* env = std::getenv("TERMREF_CORPUS")) return env;
  auto dir = std::filesystem::current_path();
  for (int i = 0; i < 5; ++i) {
    auto candidate = dir / "corpus";
    if (std::filesystem::exists(candidate / "flips" / "meta.json")) return candidate;
    if (!dir.has_parent_path() || dir.parent_path() == dir) break;
    dir = dir.parent_path();
  }
  throw InputError("corpus directory not found; set TERMREF_CORPUS");
}

inline CaseStudy load_case(const std::filesystem::path& dir) {
  CaseStudy cs;
  cs.dir = dir;
  cs.meta = read_json(dir / "meta.json");
  cs.name = cs.meta.at("name").get<std::string>();
  cs.program_source = read_file(dir / cs.meta.value("program", "program.rml"));
  cs.program = randml::parse(cs.program_source);
  if (cs.meta.contains("model")) {
    const auto& m = cs.meta.at("model");
    if (m.contains("zoo"))
      cs.model = model_zoo(m.at("zoo").get<std::string>(), m.value("params", json()));
    else
      cs.model = finite_model_from_json(read_json(dir / m.at("file").get<std::string>())).model;
    cs.model_start = cs.meta.at("start");
  }
  if (cs.meta.contains("refinement"))
    cs.certificate = refine::certificate_from_json(
        read_json(dir / cs.meta.at("refinement").get<std::string>()));
  if (cs.meta.contains("rsm")) {
    cs.rsm = rsm_from_json(read_json(dir / cs.meta.at("rsm").at("file").get<std::string>()));
    for (const auto& s : cs.meta.at("rsm").at("states")) cs.rsm_states.push_back(s);
  }
  if (cs.meta.contains("compare")) {
    cs.compare_model_depth = cs.meta.at("compare").at("model_depth").get<std::size_t>();
    cs.compare_witness_depth = cs.meta.at("compare").at("witness_depth").get<std::size_t>();
    cs.compare_depth_budget = cs.meta.at("compare").value("depth_budget", 200);
  }
  cs.run_trials = cs.meta.value("run_trials", 1000);
  cs.run_step_budget = cs.meta.value("run_step_budget", 100000);
  return cs;
}

/// All case studies, in directory order.
inline std::vector<CaseStudy> corpus_list(
    const std::filesystem::path& root = corpus_root()) {
  std::vector<std::filesystem::path> dirs;
  for (const auto& entry : std::filesystem::directory_iterator(root))
    if (entry.is_directory() && std::filesystem::exists(entry.path() / "meta.json"))
      dirs.push_back(entry.path());
  std::sort(dirs.begin(), dirs.end());
  std::vector<CaseStudy> out;
  for (const auto& d : dirs) out.push_back(load_case(d));
  return out;
}

/// The executable treap insertion (search, leaf attach, rotate up while the
/// priority exceeds the parent's), with lazily sampled real priorities.
inline CaseStudy transcribe_treap_insert(
    const std::filesystem::path& root = corpus_root()) {
  return load_case(root / "treap");
}

// ---------------------------------------------------------------------------
// Treap inspection: walks the final heap and validates the structure.

struct TreapNode {
  Int key;
  std::vector<bool> bits;  // sampled priority digits, most significant first
  int left{-1};
  int right{-1};
};

struct TreapView {
  std::vector<TreapNode> nodes;
  int root{-1};
  std::size_t size() const { return nodes.size(); }
};

namespace detail {

inline std::vector<bool> read_bits(randml::ExprPtr cell, const randml::State& st) {
  std::vector<bool> bits;
  for (;;) {
    if (cell->kind != randml::ExprKind::Loc)
      throw InputError("lazy real cell is not a location");
    auto it = st.heap.find(cell->idx);
    if (it == st.heap.end()) throw InputError("dangling lazy real cell");
    randml::ExprPtr v = it->second;
    if (v->kind == randml::ExprKind::InjL) return bits;
    if (v->kind != randml::ExprKind::InjR || v->a->kind != randml::ExprKind::Pair)
      throw InputError("lazy real cell has unexpected shape");
    randml::ExprPtr b = v->a->a;
    if (b->kind != randml::ExprKind::Bool) throw InputError("lazy real digit is not a boolean");
    bits.push_back(b->bval);
    cell = v->a->b;
  }
}

inline int extract_node(randml::ExprPtr tree, const randml::State& st, TreapView& out) {
  if (tree->kind == randml::ExprKind::InjL) return -1;
  if (tree->kind != randml::ExprKind::InjR || tree->a->kind != randml::ExprKind::Loc)
    throw InputError("treap node has unexpected shape");
  auto it = st.heap.find(tree->a->idx);
  if (it == st.heap.end()) throw InputError("dangling treap node");
  // (key, (prio, (left, right)))
  randml::ExprPtr tup = it->second;
  if (tup->kind != randml::ExprKind::Pair || tup->b->kind != randml::ExprKind::Pair ||
      tup->b->b->kind != randml::ExprKind::Pair)
    throw InputError("treap node tuple has unexpected shape");
  TreapNode node;
  if (tup->a->kind != randml::ExprKind::Int) throw InputError("treap key is not an integer");
  node.key = tup->a->ival;
  node.bits = read_bits(tup->b->a, st);
  int self = static_cast<int>(out.nodes.size());
  out.nodes.push_back(std::move(node));
  int l = extract_node(tup->b->b->a, st, out);
  int r = extract_node(tup->b->b->b, st, out);
  out.nodes[self].left = l;
  out.nodes[self].right = r;
  return self;
}

/// Lexicographic comparison of sampled digit prefixes; nullopt when one is a
/// prefix of the other (the order was never decided by a comparison).
inline std::optional<int> cmp_bits(const std::vector<bool>& a,
                                   const std::vector<bool>& b) {
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
    if (a[i] != b[i]) return a[i] ? 1 : -1;
  return std::nullopt;
}

}  // namespace detail

/// Reads the treap rooted at `tree` (a value of shape inl () | inr loc) out
/// of the heap.
inline TreapView extract_treap(randml::ExprPtr tree, const randml::State& st) {
  TreapView view;
  view.root = detail::extract_node(tree, st, view);
  return view;
}

/// Validates the binary-search-tree order on keys and the max-heap order on
/// priorities.  Every parent/child pair must have been decided by a
/// comparison during insertion, so undecided priority pairs are violations.
inline bool validate_treap(const TreapView& t, std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  std::string msg;
  // BST order via bounds; heap order locally.
  std::function<bool(int, const Int*, const Int*)> go =
      [&](int i, const Int* lo, const Int* hi) -> bool {
    if (i < 0) return true;
    const TreapNode& n = t.nodes[i];
    if (lo && !(*lo < n.key)) return fail("BST order violated");
    if (hi && !(n.key < *hi)) return fail("BST order violated");
    for (int c : {n.left, n.right}) {
      if (c < 0) continue;
      auto cmp = detail::cmp_bits(t.nodes[c].bits, n.bits);
      if (!cmp) return fail("parent/child priority order undecided");
      if (*cmp >= 0) return fail("heap order violated");
    }
    return go(n.left, lo, &n.key) && go(n.right, &n.key, hi);
  };
  return go(t.root, nullptr, nullptr);
}

}  // namespace termref::corpus
