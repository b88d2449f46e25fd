#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "termref/coupling.hpp"
#include "termref/models.hpp"
#include "termref/randml/parse.hpp"
#include "termref/randml/print.hpp"
#include "termref/randml/step.hpp"

namespace termref::refine {

using nlohmann::json;
using randml::Config;
using randml::ConfigLess;
using randml::ExprPtr;
using randml::State;

// ---------------------------------------------------------------------------
// Parameter expressions.
//
// Certificates abstract families of joint nodes with integer parameters.
// Model states and guards are written in a tiny expression language:
//
//   pexpr  :=  pterm (('+' | '-') pterm)*
//   pterm  :=  INT | param | true | false | 'text' | [pexpr, ...] | (pexpr)
//   guard  :=  pexpr ('==' | '!=' | '<=' | '>=' | '<' | '>') pexpr
//
// Arithmetic is over integers; 'text' renders a JSON string, [..] a JSON
// array.  A JSON field that is not a string is taken as a literal state.

using ParamEnv = std::map<std::string, long long>;

namespace detail {

struct PExprParser {
  const std::string& src;
  const ParamEnv& env;
  std::size_t pos = 0;

  void skip() {
    while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
  }
  bool eat(char c) {
    skip();
    if (pos < src.size() && src[pos] == c) {
      ++pos;
      return true;
    }
    return false;
  }
  [[noreturn]] void fail(const std::string& msg) {
    throw InputError("in parameter expression '" + src + "': " + msg);
  }

  json atom() {
    skip();
    if (pos >= src.size()) fail("unexpected end");
    char c = src[pos];
    if (std::isdigit(static_cast<unsigned char>(c))) {
      std::size_t j = pos;
      while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
      long long v = std::stoll(src.substr(pos, j - pos));
      pos = j;
      return json(v);
    }
    if (c == '\'') {
      std::size_t j = pos + 1;
      while (j < src.size() && src[j] != '\'') ++j;
      if (j >= src.size()) fail("unterminated string literal");
      json s = src.substr(pos + 1, j - pos - 1);
      pos = j + 1;
      return s;
    }
    if (c == '[') {
      ++pos;
      json arr = json::array();
      skip();
      if (eat(']')) return arr;
      arr.push_back(expr());
      while (eat(',')) arr.push_back(expr());
      if (!eat(']')) fail("expected ']'");
      return arr;
    }
    if (c == '(') {
      ++pos;
      json v = expr();
      if (!eat(')')) fail("expected ')'");
      return v;
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::size_t j = pos;
      while (j < src.size() &&
             (std::isalnum(static_cast<unsigned char>(src[j])) || src[j] == '_'))
        ++j;
      std::string word = src.substr(pos, j - pos);
      pos = j;
      if (word == "true") return json(true);
      if (word == "false") return json(false);
      auto it = env.find(word);
      if (it == env.end()) fail("unbound parameter '" + word + "'");
      return json(it->second);
    }
    fail(std::string("unexpected character '") + c + "'");
  }

  json expr() {
    json v = atom();
    for (;;) {
      skip();
      if (pos < src.size() && (src[pos] == '+' || src[pos] == '-')) {
        char op = src[pos++];
        json w = atom();
        if (!v.is_number_integer() || !w.is_number_integer())
          fail("arithmetic on non-integers");
        long long a = v.get<long long>(), b = w.get<long long>();
        v = json(op == '+' ? a + b : a - b);
      } else {
        return v;
      }
    }
  }
};

}  // namespace detail

/// Evaluates a parameter expression to a JSON value.
inline json eval_param_expr(const std::string& src, const ParamEnv& env) {
  detail::PExprParser p{src, env};
  json v = p.expr();
  p.skip();
  if (p.pos != src.size()) p.fail("trailing input");
  return v;
}

/// A model-state field: a literal unless it is a string, which is parsed as
/// a parameter expression.
inline json eval_state_field(const json& field, const ParamEnv& env) {
  if (field.is_string()) return eval_param_expr(field.get<std::string>(), env);
  return field;
}

/// Evaluates a guard of the form "pexpr REL pexpr".
inline bool eval_guard(const std::string& src, const ParamEnv& env) {
  static const std::vector<std::pair<std::string, int>> ops = {
      {"==", 0}, {"!=", 1}, {"<=", 2}, {">=", 3}, {"<", 4}, {">", 5}};
  for (const auto& [sym, code] : ops) {
    auto at = src.find(sym);
    if (at == std::string::npos) continue;
    json l = eval_param_expr(src.substr(0, at), env);
    json r = eval_param_expr(src.substr(at + sym.size()), env);
    switch (code) {
      case 0: return l == r;
      case 1: return l != r;
      default: {
        if (!l.is_number_integer() || !r.is_number_integer())
          throw InputError("guard compares non-integers: " + src);
        long long a = l.get<long long>(), b = r.get<long long>();
        switch (code) {
          case 2: return a <= b;
          case 3: return a >= b;
          case 4: return a < b;
          default: return a > b;
        }
      }
    }
  }
  throw InputError("guard has no comparison operator: " + src);
}

// ---------------------------------------------------------------------------
// Configuration patterns.

/// A canonical configuration pattern with named integer holes: expression,
/// heap, tapes, and allocation counters.  Counters default to one past the
/// largest key (0 when empty), matching consecutive allocation.
struct ConfigPattern {
  ExprPtr expr{nullptr};
  std::map<std::uint64_t, ExprPtr> heap;
  std::map<std::uint64_t, randml::Tape> tapes;
  std::uint64_t next_loc{0};
  std::uint64_t next_lbl{0};
};

inline ConfigPattern pattern_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("expr"))
    throw InputError("config pattern needs an 'expr' field");
  ConfigPattern p;
  p.expr = randml::parse_pattern(doc.at("expr").get<std::string>());
  if (doc.contains("heap"))
    for (const auto& [k, v] : doc.at("heap").items())
      p.heap[std::stoull(k)] = randml::parse_pattern(v.get<std::string>());
  if (doc.contains("tapes"))
    for (const auto& [k, v] : doc.at("tapes").items()) {
      randml::Tape t;
      t.bound = v.at("bound").get<std::uint64_t>();
      if (v.contains("queue"))
        for (const auto& q : v.at("queue")) t.queue.push_back(q.get<std::uint64_t>());
      p.tapes[std::stoull(k)] = std::move(t);
    }
  p.next_loc = p.heap.empty() ? 0 : p.heap.rbegin()->first + 1;
  p.next_lbl = p.tapes.empty() ? 0 : p.tapes.rbegin()->first + 1;
  if (doc.contains("next_loc")) p.next_loc = doc.at("next_loc").get<std::uint64_t>();
  if (doc.contains("next_lbl")) p.next_lbl = doc.at("next_lbl").get<std::uint64_t>();
  return p;
}

namespace detail {

inline bool match_expr(ExprPtr pat, ExprPtr e, ParamEnv& env) {
  if (pat == e && !pat->has_hole) return true;  // identical interned trees
  if (pat->kind == randml::ExprKind::IntHole) {
    if (e->kind != randml::ExprKind::Int) return false;
    if (e->ival < std::numeric_limits<long long>::min() ||
        e->ival > std::numeric_limits<long long>::max())
      return false;
    long long v = e->ival.convert_to<long long>();
    auto [it, inserted] = env.emplace(pat->s1, v);
    return inserted || it->second == v;
  }
  if (!pat->has_hole) return pat == e;
  if (pat->kind != e->kind || pat->op != e->op || pat->bval != e->bval ||
      pat->idx != e->idx || pat->ival != e->ival || pat->s1 != e->s1 ||
      pat->s2 != e->s2)
    return false;
  if ((pat->a == nullptr) != (e->a == nullptr) ||
      (pat->b == nullptr) != (e->b == nullptr) ||
      (pat->c == nullptr) != (e->c == nullptr))
    return false;
  if (pat->a && !match_expr(pat->a, e->a, env)) return false;
  if (pat->b && !match_expr(pat->b, e->b, env)) return false;
  if (pat->c && !match_expr(pat->c, e->c, env)) return false;
  return true;
}

inline ExprPtr instantiate_expr(ExprPtr pat, const ParamEnv& env) {
  if (!pat->has_hole) return pat;
  if (pat->kind == randml::ExprKind::IntHole) {
    auto it = env.find(pat->s1);
    if (it == env.end())
      throw InputError("pattern hole '${" + pat->s1 + "}' has no value");
    return randml::mk_int(it->second);
  }
  randml::Expr copy = *pat;
  if (copy.a) copy.a = instantiate_expr(copy.a, env);
  if (copy.b) copy.b = instantiate_expr(copy.b, env);
  if (copy.c) copy.c = instantiate_expr(copy.c, env);
  return randml::intern(std::move(copy));
}

}  // namespace detail

/// Matches a concrete configuration against a pattern, extending `env` with
/// hole bindings.  Heap and tape domains, queue contents, and allocation
/// counters must agree exactly.
inline bool match_config(const ConfigPattern& pat, const Config& cfg, ParamEnv& env) {
  if (cfg.state.next_loc != pat.next_loc || cfg.state.next_lbl != pat.next_lbl)
    return false;
  if (cfg.state.heap.size() != pat.heap.size() ||
      cfg.state.tapes.size() != pat.tapes.size())
    return false;
  if (cfg.state.tapes != pat.tapes) return false;
  ParamEnv trial = env;
  if (!detail::match_expr(pat.expr, cfg.expr, trial)) return false;
  auto ih = cfg.state.heap.begin();
  for (const auto& [l, v] : pat.heap) {
    if (ih->first != l || !detail::match_expr(v, ih->second, trial)) return false;
    ++ih;
  }
  env = std::move(trial);
  return true;
}

/// Instantiates a pattern to a concrete configuration.
inline Config instantiate(const ConfigPattern& pat, const ParamEnv& env) {
  Config cfg;
  cfg.expr = detail::instantiate_expr(pat.expr, env);
  cfg.state.next_loc = pat.next_loc;
  cfg.state.next_lbl = pat.next_lbl;
  for (const auto& [l, v] : pat.heap)
    cfg.state.heap[l] = detail::instantiate_expr(v, env);
  cfg.state.tapes = pat.tapes;
  return cfg;
}

// ---------------------------------------------------------------------------
// Certificates.

enum class Rule { RefVal, RefProg, RefModelProg, RefModel, RefTape };

inline Rule rule_from_string(const std::string& s) {
  if (s == "ref_val") return Rule::RefVal;
  if (s == "ref_prog") return Rule::RefProg;
  if (s == "ref_model_prog") return Rule::RefModelProg;
  if (s == "ref_model") return Rule::RefModel;
  if (s == "ref_tape") return Rule::RefTape;
  throw InputError("unknown refinement rule: " + s);
}

inline const char* rule_name(Rule r) {
  switch (r) {
    case Rule::RefVal: return "ref_val";
    case Rule::RefProg: return "ref_prog";
    case Rule::RefModelProg: return "ref_model_prog";
    case Rule::RefModel: return "ref_model";
    case Rule::RefTape: return "ref_tape";
  }
  return "?";
}

struct RelEntry {
  json model_expr;              // literal or parameter expression
  std::string node;             // successor certificate node
  std::optional<std::string> when;
};

struct CertNode {
  Rule rule;
  json model_state;
  ConfigPattern pattern;
  std::vector<std::string> params;
  std::optional<std::vector<long long>> samples;
  std::optional<std::string> guard;
  std::vector<std::uint64_t> label_list;  // ref_tape only
  std::vector<RelEntry> relation;
};

/// A finite presentation of the guarded refinement relation: a graph of
/// joint (model state, configuration class) nodes, each tagged with the rule
/// that discharges it.  Pattern parameters are checked at sampled values.
struct Certificate {
  std::map<std::string, CertNode> nodes;
  std::string root;
  std::vector<long long> samples{0, 1, 2, 3, 4, 5, 6, 7, 8};
  std::size_t ff_budget = 64;
};

inline Certificate certificate_from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("nodes") || !doc.contains("root"))
    throw InputError("certificate needs 'nodes' and 'root'");
  Certificate cert;
  cert.root = doc.at("root").get<std::string>();
  if (doc.contains("samples")) {
    cert.samples.clear();
    for (const auto& s : doc.at("samples")) cert.samples.push_back(s.get<long long>());
  }
  if (doc.contains("ff_budget")) cert.ff_budget = doc.at("ff_budget").get<std::size_t>();
  for (const auto& [key, nd] : doc.at("nodes").items()) {
    CertNode node;
    node.rule = rule_from_string(nd.at("rule").get<std::string>());
    if (!nd.contains("model_state"))
      throw InputError("node '" + key + "' has no model_state");
    node.model_state = nd.at("model_state");
    node.pattern = pattern_from_json(nd.at("pattern"));
    if (nd.contains("params"))
      for (const auto& p : nd.at("params")) node.params.push_back(p.get<std::string>());
    if (nd.contains("samples")) {
      node.samples.emplace();
      for (const auto& s : nd.at("samples")) node.samples->push_back(s.get<long long>());
    }
    if (nd.contains("guard")) node.guard = nd.at("guard").get<std::string>();
    if (nd.contains("label_list"))
      for (const auto& l : nd.at("label_list"))
        node.label_list.push_back(l.get<std::uint64_t>());
    if (nd.contains("relation")) {
      for (const auto& ent : nd.at("relation")) {
        RelEntry e;
        if (ent.is_array()) {
          if (ent.size() != 2)
            throw InputError("relation entry must be [model, node]");
          e.model_expr = ent[0];
          e.node = ent[1].get<std::string>();
        } else {
          e.model_expr = ent.at("model");
          e.node = ent.at("node").get<std::string>();
          if (ent.contains("when")) e.when = ent.at("when").get<std::string>();
        }
        node.relation.push_back(std::move(e));
      }
    }
    cert.nodes.emplace(key, std::move(node));
  }
  if (!cert.nodes.count(cert.root))
    throw InputError("certificate root '" + cert.root + "' is not a node");
  for (const auto& [key, node] : cert.nodes)
    for (const auto& e : node.relation)
      if (!cert.nodes.count(e.node))
        throw InputError("node '" + key + "' references missing node '" + e.node + "'");
  return cert;
}

// ---------------------------------------------------------------------------
// Checking.

struct Resolution {
  ParamEnv env;
  std::size_t ff_steps{0};
};

/// Resolves a concrete configuration to a certificate node: the target
/// pattern must match either directly or after finitely many deterministic
/// (Dirac) steps.  Each skipped step is itself an instance of the
/// program-only rule with a singleton relation, so fast-forwarding composes
/// derivable steps rather than weakening the relation.
inline std::optional<Resolution> resolve_to(const Config& start,
                                            const CertNode& target,
                                            std::size_t ff_budget,
                                            std::size_t* ff_used = nullptr) {
  Config cfg = start;
  for (std::size_t k = 0;; ++k) {
    ParamEnv env;
    if (match_config(target.pattern, cfg, env)) {
      if (ff_used) *ff_used += k;
      return Resolution{std::move(env), k};
    }
    if (k == ff_budget) return std::nullopt;
    auto mu = randml::step_distr(cfg);
    if (mu.support_size() != 1 || !mu.mass().is_one()) return std::nullopt;
    cfg = mu.entries().begin()->first;
  }
}

struct NodeCheck {
  std::string key;
  ParamEnv env;
  enum class Verdict { Accepted, Rejected, Skipped, Unchecked } verdict;
  std::string detail;
};

struct CertReport {
  bool accepted{false};
  bool inconclusive{false};
  std::string root_detail;
  std::vector<NodeCheck> checks;
  std::vector<std::string> notes;

  json to_json() const {
    json cs = json::array();
    for (const auto& c : checks) {
      json env = json::object();
      for (const auto& [k, v] : c.env) env[k] = v;
      const char* verdict = c.verdict == NodeCheck::Verdict::Accepted   ? "accepted"
                            : c.verdict == NodeCheck::Verdict::Rejected ? "rejected"
                            : c.verdict == NodeCheck::Verdict::Skipped  ? "skipped"
                                                                        : "unchecked";
      cs.push_back({{"node", c.key}, {"params", env}, {"verdict", verdict},
                    {"detail", c.detail}});
    }
    return {{"accepted", accepted},
            {"inconclusive", inconclusive},
            {"root", root_detail},
            {"nodes", cs},
            {"notes", notes}};
  }
};

namespace detail {

using ModelConfigRel = Relation<json, Config, std::less<json>, ConfigLess>;
using ModelStateRel = Relation<json, State, std::less<json>, randml::StateLess>;

/// Builds the relation R for a node: for every successor object and every
/// active relation entry, the pair (successor model state, successor object)
/// is in R when the object resolves (fast-forward) to the entry's node and
/// that node's own model_state agrees under the matched parameters.
template <class Obj, class ObjLess, class ToConfig>
std::vector<std::pair<json, Obj>> build_relation(
    const Certificate& cert, const CertNode& node, const ParamEnv& env,
    const SubDist<Obj, ObjLess>& successors, ToConfig&& to_config,
    std::size_t* ff_used, std::string& diag) {
  std::vector<std::pair<json, Obj>> pairs;
  for (const auto& [obj, p] : successors.entries()) {
    (void)p;
    for (const auto& entry : node.relation) {
      if (entry.when && !eval_guard(*entry.when, env)) continue;
      const CertNode& target = cert.nodes.at(entry.node);
      auto res = resolve_to(to_config(obj), target, cert.ff_budget, ff_used);
      if (!res) continue;
      json expected = eval_state_field(entry.model_expr, env);
      json actual = eval_state_field(target.model_state, res->env);
      if (expected != actual) {
        diag += "entry -> '" + entry.node + "' matched but model states differ (" +
                expected.dump() + " vs " + actual.dump() + "); ";
        continue;
      }
      pairs.emplace_back(expected, obj);
    }
  }
  return pairs;
}

inline std::string render_deficit(const Rat& flow, const Rat& required,
                                  const Rat& avail) {
  return "coupling deficit " + rat_to_string(required - flow) + " (max-flow " +
         rat_to_string(flow) + " < required " + rat_to_string(required) +
         "; mass available through R: " + rat_to_string(avail) + ")";
}

}  // namespace detail

/// Discharges one node's obligation at one parameter valuation.
inline NodeCheck check_node(const JsonModel& model, const Certificate& cert,
                            const std::string& key, const ParamEnv& env,
                            std::size_t* ff_used = nullptr) {
  const CertNode& node = cert.nodes.at(key);
  NodeCheck out{key, env, NodeCheck::Verdict::Accepted, ""};
  auto reject = [&](const std::string& why) {
    out.verdict = NodeCheck::Verdict::Rejected;
    out.detail = why;
    return out;
  };

  json m = eval_state_field(node.model_state, env);
  Config cfg = instantiate(node.pattern, env);

  if (node.rule == Rule::RefVal) {
    if (!cfg.expr->is_value) return reject("ref_val: expression is not a value");
    out.detail = "value configuration";
    return out;
  }

  // Reducibility side conditions.
  const bool needs_prog_red =
      node.rule == Rule::RefProg || node.rule == Rule::RefModelProg;
  const bool needs_model_red = node.rule == Rule::RefModelProg ||
                               node.rule == Rule::RefModel ||
                               node.rule == Rule::RefTape;
  randml::ConfigDist prog_step;
  if (needs_prog_red) {
    prog_step = randml::step_distr(cfg);
    if (!prog_step.mass().is_one()) {
      auto why = randml::classify_stuck(cfg);
      return reject("reducibility violation: program side is " +
                    std::string(cfg.expr->is_value ? "a value" : "stuck") +
                    (why ? " (" + *why + ")" : ""));
    }
  }
  SubDist<json> model_step;
  if (needs_model_red) {
    model_step = model.step(m);
    if (!model_step.mass().is_one())
      return reject("reducibility violation: model state " + m.dump() +
                    " has step mass " + model_step.mass().str());
  }

  std::string diag;
  switch (node.rule) {
    case Rule::RefProg: {
      auto pairs = detail::build_relation(cert, node, env, prog_step,
                                          [](const Config& c) { return c; },
                                          ff_used, diag);
      auto rel = detail::ModelConfigRel::from_pairs(pairs);
      auto res = solve_coupling(SubDist<json>::dirac(m), prog_step, rel);
      if (!res.witness)
        return reject("ref_prog: " + detail::render_deficit(res.max_flow, res.required,
                                                            res.deficit_available) + diag);
      auto recheck = check_witness(SubDist<json>::dirac(m), prog_step, rel, *res.witness);
      if (!recheck) throw InconsistencyError("extracted witness failed re-validation");
      out.detail = "ret(m) coupled to program step over " +
                   std::to_string(pairs.size()) + " pairs";
      return out;
    }
    case Rule::RefModelProg: {
      auto pairs = detail::build_relation(cert, node, env, prog_step,
                                          [](const Config& c) { return c; },
                                          ff_used, diag);
      auto rel = detail::ModelConfigRel::from_pairs(pairs);
      auto res = solve_coupling(model_step, prog_step, rel);
      if (!res.witness)
        return reject("ref_model_prog: " +
                      detail::render_deficit(res.max_flow, res.required,
                                             res.deficit_available) + diag);
      auto recheck = check_witness(model_step, prog_step, rel, *res.witness);
      if (!recheck) throw InconsistencyError("extracted witness failed re-validation");
      out.detail = "model step coupled to program step over " +
                   std::to_string(pairs.size()) + " pairs";
      return out;
    }
    case Rule::RefModel: {
      auto target = randml::ConfigDist::dirac(cfg);
      auto pairs = detail::build_relation(cert, node, env, target,
                                          [](const Config& c) { return c; },
                                          ff_used, diag);
      auto rel = detail::ModelConfigRel::from_pairs(pairs);
      auto res = solve_coupling(model_step, target, rel);
      if (!res.witness)
        return reject("ref_model: " + detail::render_deficit(res.max_flow, res.required,
                                                             res.deficit_available) + diag);
      out.detail = "model step coupled to ret(config)";
      return out;
    }
    case Rule::RefTape: {
      for (auto l : node.label_list)
        if (!cfg.state.tapes.count(l))
          return reject("ref_tape: label " + std::to_string(l) +
                        " not in the configuration's tapes");
      auto folded = randml::state_step_fold(cfg.state, node.label_list);
      ExprPtr expr = cfg.expr;
      auto pairs = detail::build_relation(
          cert, node, env, folded,
          [expr](const State& s) { return Config{expr, s}; }, ff_used, diag);
      auto rel = detail::ModelStateRel::from_pairs(pairs);
      auto res = solve_coupling(model_step, folded, rel);
      if (!res.witness)
        return reject("ref_tape: " + detail::render_deficit(res.max_flow, res.required,
                                                            res.deficit_available) + diag);
      auto recheck = check_witness(model_step, folded, rel, *res.witness);
      if (!recheck) throw InconsistencyError("extracted witness failed re-validation");
      out.detail = "model step coupled to presampling fold over " +
                   std::to_string(node.label_list.size()) + " tapes";
      return out;
    }
    default:
      return reject("unreachable rule");
  }
}

/// Checks a whole certificate against a model and a program configuration.
///
/// Every node is checked at every sampled valuation of its parameters
/// (guards mark valuations out of range).  The exploration budget counts
/// node checks plus fast-forward steps; exhausting it marks remaining nodes
/// unchecked and the overall result inconclusive rather than accepted.
inline CertReport check_certificate(const JsonModel& model, const json& model_start,
                                    const Config& program_start,
                                    const Certificate& cert,
                                    std::size_t budget = 1'000'000) {
  CertReport report;
  bool any_rejected = false;

  // The initial configuration must resolve to the root node, and the root's
  // model state must be the model's start state.
  const CertNode& root = cert.nodes.at(cert.root);
  std::size_t ff_used = 0;
  auto rootres = resolve_to(program_start, root, cert.ff_budget, &ff_used);
  if (!rootres) {
    report.root_detail = "initial configuration does not resolve to root '" +
                         cert.root + "'";
    report.accepted = false;
    return report;
  }
  json root_state = eval_state_field(root.model_state, rootres->env);
  if (root_state != model_start) {
    report.root_detail = "root resolves but its model state " + root_state.dump() +
                         " differs from the start state " + model_start.dump();
    report.accepted = false;
    return report;
  }
  report.root_detail = "initial configuration resolves to '" + cert.root +
                       "' after " + std::to_string(rootres->ff_steps) +
                       " deterministic steps";

  bool has_pattern_nodes = false;
  for (const auto& [key, node] : cert.nodes) {
    std::vector<ParamEnv> valuations;
    if (node.params.empty()) {
      valuations.push_back({});
    } else {
      has_pattern_nodes = true;
      const auto& samples = node.samples ? *node.samples : cert.samples;
      std::vector<ParamEnv> acc{{}};
      for (const auto& param : node.params) {
        std::vector<ParamEnv> next;
        for (const auto& env : acc)
          for (long long v : samples) {
            ParamEnv e = env;
            e[param] = v;
            next.push_back(std::move(e));
          }
        acc = std::move(next);
      }
      valuations = std::move(acc);
    }
    for (const auto& env : valuations) {
      if (ff_used + report.checks.size() >= budget) {
        report.checks.push_back({key, env, NodeCheck::Verdict::Unchecked,
                                 "exploration budget exhausted"});
        report.inconclusive = true;
        continue;
      }
      if (node.guard && !eval_guard(*node.guard, env)) {
        report.checks.push_back({key, env, NodeCheck::Verdict::Skipped,
                                 "guard '" + *node.guard + "' excludes this valuation"});
        continue;
      }
      auto check = check_node(model, cert, key, env, &ff_used);
      if (check.verdict == NodeCheck::Verdict::Rejected) any_rejected = true;
      report.checks.push_back(std::move(check));
    }
  }

  if (has_pattern_nodes)
    report.notes.push_back(
        "pattern nodes were checked at sampled parameter values; uniformity "
        "of the node family in its parameters is an inductive-shape "
        "assumption, not mechanically verified");
  report.accepted = !any_rejected && !report.inconclusive;
  return report;
}

// ---------------------------------------------------------------------------
// Soundness cross-check (the termination inequality at finite depth).

/// Exact finite-depth witness of the soundness inequality: computes
/// mass(exec_n(model, start)) and mass(exec_m(program)) for increasing m and
/// accepts at the first m where the model mass is <= the program mass.  Both
/// masses are lower bounds of their limits and the model side is the binding
/// one, so a witnessing depth certifies the inequality at finite
/// approximation.  Budget exhaustion is inconclusive, not a refutation.
struct CrossReport {
  Rat model_mass;
  std::size_t model_depth{0};
  std::optional<std::size_t> witness_depth;
  Rat program_mass;
  bool accepted{false};
  std::vector<ExecRow> model_rows;
  std::vector<ExecRow> program_rows;

  json to_json() const {
    json j{{"model_depth", model_depth},
           {"model_mass", rat_to_string(model_mass)},
           {"accepted", accepted}};
    if (witness_depth) {
      j["witness_depth"] = *witness_depth;
      j["program_mass"] = rat_to_string(program_mass);
    }
    return j;
  }
};

inline CrossReport soundness_crosscheck(const JsonModel& model, const json& model_start,
                                        ExprPtr program, const State& init_state,
                                        std::size_t n, std::size_t depth_budget,
                                        std::size_t state_cap = kDefaultStateCap) {
  CrossReport report;
  report.model_depth = n;
  {
    auto table = exec_table(model, model_start, n, state_cap);
    report.model_rows = table.rows;
    report.model_mass = table.rows.back().mass;
  }
  auto pm = randml::as_markov(randml::canonicalize(program), init_state);
  ExecRunner<Config, ConfigLess> runner(pm.model, pm.start, state_cap);
  for (;;) {
    if (runner.mass().rat() >= report.model_mass) {
      report.witness_depth = runner.depth();
      report.program_mass = runner.mass().rat();
      report.accepted = true;
      break;
    }
    if (runner.depth() >= depth_budget || !runner.advance()) break;
  }
  report.program_rows = runner.rows();
  return report;
}

}  // namespace termref::refine
