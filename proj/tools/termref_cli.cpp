// termref: command-line front end for the refinement workbench.
//
// Subcommands: run | exec | estimate | coupling | refine | rsm | compare |
// corpus.  Exit codes: 0 accept/success, 1 reject/refuted, 2 inconclusive,
// 3 usage or input error.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "termref/analyze.hpp"
#include "termref/corpus.hpp"
#include "termref/refine.hpp"
#include "termref/rsm.hpp"

namespace {

using nlohmann::json;
using namespace termref;

constexpr int kExitAccept = 0;
constexpr int kExitReject = 1;
constexpr int kExitInconclusive = 2;
constexpr int kExitUsage = 3;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("TERMREF_SEED")) return std::stoull(env);
  return 0;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json_arg(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw InputError("malformed JSON for " + what + ": " + e.what());
  }
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  out << content;
}

/// Model selection shared by exec/refine/rsm/compare.
struct ModelArgs {
  std::string zoo;
  std::string params_text;
  std::string file;
  std::string start_text;

  void attach(CLI::App* cmd, bool need_start = true) {
    cmd->add_option("--model", zoo, "built-in model name (see `termref corpus`)");
    cmd->add_option("--model-params", params_text, "JSON parameters for the model");
    cmd->add_option("--model-json", file, "explicit finite model (JSON file)");
    if (need_start) cmd->add_option("--start", start_text, "model start state (JSON)");
  }

  bool given() const { return !zoo.empty() || !file.empty(); }

  std::pair<JsonModel, json> resolve(bool require_start = true) const {
    if (!zoo.empty()) {
      if (start_text.empty() && require_start)
        throw InputError("--start is required with --model");
      json params = params_text.empty() ? json() : parse_json_arg(params_text, "--model-params");
      json start = start_text.empty() ? json() : parse_json_arg(start_text, "--start");
      return {model_zoo(zoo, params), std::move(start)};
    }
    if (!file.empty()) {
      auto fm = finite_model_from_json(parse_json_arg(read_file(file), "--model-json"));
      json start = start_text.empty() ? fm.start : parse_json_arg(start_text, "--start");
      return {std::move(fm.model), std::move(start)};
    }
    throw InputError("no model given; use --model or --model-json");
  }
};

SubDist<std::string> dist_from_json_text(const std::string& text, const std::string& what) {
  json doc = parse_json_arg(text, what);
  if (!doc.is_object()) throw InputError(what + " must be a JSON object of outcome -> rational");
  typename SubDist<std::string>::Builder b;
  for (const auto& [k, v] : doc.items()) b.add(k, rat_from_json(v));
  return std::move(b).build();
}

int cmd_run(const std::string& program_path, std::uint64_t seed, std::uint64_t steps,
            const std::string& format) {
  auto program = randml::parse(read_file(program_path));
  auto out = randml::run_sample(program, seed, steps);
  json report{{"seed", seed},
              {"step_budget", steps},
              {"steps", out.steps}};
  int code = kExitAccept;
  switch (out.status) {
    case randml::RunOutcome::Status::Terminated:
      report["status"] = "terminated";
      report["value"] = randml::pretty(out.value);
      break;
    case randml::RunOutcome::Status::Stuck:
      report["status"] = "stuck";
      report["reason"] = out.stuck_reason;
      code = kExitReject;
      break;
    case randml::RunOutcome::Status::BudgetExhausted:
      report["status"] = "budget_exhausted";
      code = kExitInconclusive;
      break;
  }
  if (format == "json") {
    std::cout << report.dump(2) << "\n";
  } else {
    std::cout << report.at("status").get<std::string>();
    if (report.contains("value")) std::cout << ": " << report.at("value").get<std::string>();
    std::cout << " (" << out.steps << " steps)\n";
  }
  return code;
}

int cmd_exec(const ModelArgs& margs, const std::string& program_path, std::size_t n,
             std::size_t state_cap, const std::string& csv_path, const std::string& format) {
  std::vector<ExecRow> rows;
  std::string mass;
  if (!program_path.empty()) {
    auto program = randml::parse(read_file(program_path));
    auto report = exact_exec_program(program, {}, n, state_cap);
    rows = report.rows;
  } else {
    auto [model, start] = margs.resolve();
    rows = exec_table(model, start, n, state_cap).rows;
  }
  mass = rat_to_string(rows.back().mass);
  if (!csv_path.empty()) write_file(csv_path, exec_rows_to_csv(rows));
  if (format == "json") {
    json depths = json::array();
    for (std::size_t d = 0; d < rows.size(); ++d)
      depths.push_back({{"depth", d},
                        {"mass", rat_to_string(rows[d].mass)},
                        {"frontier_mass", rat_to_string(rows[d].frontier_mass)},
                        {"frontier_count", rows[d].frontier_count}});
    std::cout << json{{"n", n}, {"mass", mass}, {"table", depths}}.dump(2) << "\n";
  } else if (format == "csv") {
    std::cout << exec_rows_to_csv(rows);
  } else {
    std::cout << "mass(exec_" << n << ") = " << mass << "\n";
  }
  return kExitAccept;
}

int cmd_estimate(const std::string& program_path, std::uint64_t trials,
                 std::uint64_t steps, std::uint64_t seed) {
  auto program = randml::parse(read_file(program_path));
  auto report = mc_estimate(program, trials, steps, seed);
  std::cout << report.to_json().dump(2) << "\n";
  return kExitAccept;
}

int cmd_coupling(const std::string& mu1_text, const std::string& mu2_text,
                 const std::string& rel_text, const std::string& witness_path) {
  auto mu1 = dist_from_json_text(mu1_text, "--mu1");
  auto mu2 = dist_from_json_text(mu2_text, "--mu2");
  Relation<std::string, std::string> rel = Relation<std::string, std::string>::full();
  if (rel_text == "full") {
    // default
  } else if (rel_text == "eq") {
    rel = Relation<std::string, std::string>::equality();
  } else {
    json doc = parse_json_arg(rel_text, "--rel");
    std::vector<std::pair<std::string, std::string>> pairs;
    for (const auto& p : doc)
      pairs.emplace_back(p.at(0).get<std::string>(), p.at(1).get<std::string>());
    rel = Relation<std::string, std::string>::from_pairs(std::move(pairs));
  }
  auto res = solve_coupling(mu1, mu2, rel);
  if (res.witness) {
    json w = witness_to_json(*res.witness,
                             [](const std::string& s) { return json(s); },
                             [](const std::string& s) { return json(s); });
    if (!witness_path.empty()) write_file(witness_path, w.dump(2));
    std::cout << json{{"exists", true}, {"witness", w}}.dump(2) << "\n";
    return kExitAccept;
  }
  json deficit_left = json::array();
  for (const auto& a : res.deficit_left) deficit_left.push_back(a);
  std::cout << json{{"exists", false},
                    {"max_flow", rat_to_string(res.max_flow)},
                    {"required", rat_to_string(res.required)},
                    {"deficit", rat_to_string(res.deficit())},
                    {"unmatched", {{"left_outcomes", deficit_left},
                                   {"required_mass", rat_to_string(res.deficit_required)},
                                   {"available_mass", rat_to_string(res.deficit_available)}}}}
                   .dump(2)
            << "\n";
  return kExitReject;
}

int cmd_refine(const ModelArgs& margs, const std::string& program_path,
               const std::string& cert_path, std::size_t budget,
               const std::string& format) {
  auto [model, start] = margs.resolve();
  auto program = randml::parse(read_file(program_path));
  auto cert = refine::certificate_from_json(parse_json_arg(read_file(cert_path), "certificate"));
  auto report = refine::check_certificate(model, start, {program, {}}, cert, budget);
  if (format == "json") {
    std::cout << report.to_json().dump(2) << "\n";
  } else {
    std::cout << (report.accepted ? "accepted"
                  : report.inconclusive ? "inconclusive" : "rejected")
              << ": " << report.root_detail << "\n";
    for (const auto& c : report.checks)
      if (c.verdict == refine::NodeCheck::Verdict::Rejected)
        std::cout << "  rejected node '" << c.key << "': " << c.detail << "\n";
  }
  return report.accepted ? kExitAccept
         : report.inconclusive ? kExitInconclusive : kExitReject;
}

int cmd_rsm(const ModelArgs& margs, const std::string& cert_path,
            const std::string& states_text, const std::string& format) {
  auto [model, start] = margs.resolve(false);
  (void)start;
  auto cert = rsm_from_json(parse_json_arg(read_file(cert_path), "RSM certificate"));
  json states_doc = parse_json_arg(states_text, "--states");
  std::vector<json> states(states_doc.begin(), states_doc.end());
  auto report = check_rsm(model, cert, states);
  if (format == "json")
    std::cout << report.to_json().dump(2) << "\n";
  else
    std::cout << (report.verified ? "verified on explored set"
                                  : "rejected: " + report.first_violation)
              << "\n";
  return report.verified ? kExitAccept : kExitReject;
}

int cmd_compare(const ModelArgs& margs, const std::string& program_path, std::size_t n,
                std::size_t depth_budget, std::size_t state_cap,
                const std::string& csv_prefix) {
  auto [model, start] = margs.resolve();
  auto program = randml::parse(read_file(program_path));
  auto report = compare(model, start, program, {}, n, depth_budget, state_cap);
  if (!csv_prefix.empty()) {
    write_file(csv_prefix + "_model.csv", report.model_csv());
    write_file(csv_prefix + "_program.csv", report.program_csv());
  }
  std::cout << report.cross.to_json().dump(2) << "\n";
  return report.cross.accepted ? kExitAccept : kExitInconclusive;
}

int run_fixture(const corpus::CaseStudy& cs, std::uint64_t trials) {
  int failures = 0;
  auto say = [&](const std::string& what, bool ok, const std::string& detail = "") {
    std::cout << "  [" << (ok ? "ok" : "FAIL") << "] " << what;
    if (!detail.empty()) std::cout << ": " << detail;
    std::cout << "\n";
    if (!ok) ++failures;
  };
  std::uint64_t stuck = 0;
  std::uint64_t n_trials = std::min<std::uint64_t>(trials, cs.run_trials);
  for (std::uint64_t i = 0; i < n_trials; ++i) {
    auto out = randml::run_sample(cs.program, randml::derive_seed(1, i), cs.run_step_budget);
    if (out.status == randml::RunOutcome::Status::Stuck) ++stuck;
  }
  say("sampled " + std::to_string(n_trials) + " trajectories without stuck states",
      stuck == 0, stuck ? std::to_string(stuck) + " stuck" : "");
  if (cs.certificate && cs.model) {
    auto rep = refine::check_certificate(*cs.model, cs.model_start, {cs.program, {}},
                                         *cs.certificate);
    say("refinement certificate", rep.accepted, rep.root_detail);
    if (!rep.accepted) ++failures;
  }
  if (cs.rsm && cs.model) {
    auto rep = check_rsm(*cs.model, *cs.rsm, cs.rsm_states);
    say("RSM certificate (" + cs.rsm->description + ")", rep.verified, rep.first_violation);
  }
  if (cs.compare_model_depth && cs.model) {
    auto rep = refine::soundness_crosscheck(*cs.model, cs.model_start, cs.program, {},
                                            *cs.compare_model_depth, cs.compare_depth_budget);
    bool ok = rep.accepted && rep.witness_depth == cs.compare_witness_depth;
    std::string detail = "model mass " + rat_to_string(rep.model_mass);
    if (rep.witness_depth)
      detail += " <= program mass " + rat_to_string(rep.program_mass) + " at depth " +
                std::to_string(*rep.witness_depth);
    say("soundness inequality at documented depths", ok, detail);
  }
  return failures;
}

int cmd_corpus(const std::string& name, const std::string& dir, std::uint64_t trials) {
  auto root = dir.empty() ? corpus::corpus_root() : std::filesystem::path(dir);
  int failures = 0;
  for (const auto& cs : corpus::corpus_list(root)) {
    if (!name.empty() && cs.name != name) continue;
    std::cout << cs.name << ": " << cs.meta.value("description", "") << "\n";
    failures += run_fixture(cs, trials);
  }
  return failures == 0 ? kExitAccept : kExitReject;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"termref: termination-preserving refinement workbench"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "sample one program trajectory");
  std::string run_program, run_format = "text";
  std::uint64_t run_seed = default_seed(), run_steps = 100000;
  run->add_option("--program", run_program)->required();
  run->add_option("--seed", run_seed);
  run->add_option("--steps", run_steps);
  run->add_option("--format", run_format)->check(CLI::IsMember({"text", "json"}));

  // exec
  auto* exec = app.add_subcommand("exec", "exact truncated execution table");
  ModelArgs exec_model;
  exec_model.attach(exec);
  std::string exec_program, exec_csv, exec_format = "text";
  std::size_t exec_n = 10, exec_cap = kDefaultStateCap;
  exec->add_option("--program", exec_program);
  exec->add_option("--n", exec_n)->required();
  exec->add_option("--csv", exec_csv);
  exec->add_option("--states-cap", exec_cap);
  exec->add_option("--format", exec_format)->check(CLI::IsMember({"text", "json", "csv"}));

  // estimate
  auto* est = app.add_subcommand("estimate", "Monte-Carlo termination estimate");
  std::string est_program;
  std::uint64_t est_trials = 10000, est_steps = 100000, est_seed = default_seed();
  est->add_option("--program", est_program)->required();
  est->add_option("--trials", est_trials);
  est->add_option("--steps", est_steps);
  est->add_option("--seed", est_seed);

  // coupling
  auto* cpl = app.add_subcommand("coupling", "decide left-partial coupling existence");
  std::string cpl_mu1, cpl_mu2, cpl_rel = "full", cpl_witness;
  cpl->add_option("--mu1", cpl_mu1)->required();
  cpl->add_option("--mu2", cpl_mu2)->required();
  cpl->add_option("--rel", cpl_rel, "full | eq | JSON array of [left,right] pairs");
  cpl->add_option("--witness", cpl_witness, "write the witness JSON here");

  // refine
  auto* ref = app.add_subcommand("refine", "check a refinement certificate");
  ModelArgs ref_model;
  ref_model.attach(ref);
  std::string ref_program, ref_cert, ref_format = "text";
  std::size_t ref_budget = 1000000;
  ref->add_option("--program", ref_program)->required();
  ref->add_option("--cert", ref_cert)->required();
  ref->add_option("--budget", ref_budget);
  ref->add_option("--format", ref_format)->check(CLI::IsMember({"text", "json"}));

  // rsm
  auto* rsm = app.add_subcommand("rsm", "check a ranking-supermartingale certificate");
  ModelArgs rsm_model;
  rsm_model.attach(rsm, false);
  std::string rsm_cert, rsm_states, rsm_format = "text";
  rsm->add_option("--cert", rsm_cert)->required();
  rsm->add_option("--states", rsm_states, "JSON array of states to check")->required();
  rsm->add_option("--format", rsm_format)->check(CLI::IsMember({"text", "json"}));

  // compare
  auto* cmp = app.add_subcommand("compare", "witness the termination inequality");
  ModelArgs cmp_model;
  cmp_model.attach(cmp);
  std::string cmp_program, cmp_csv;
  std::size_t cmp_n = 5, cmp_budget = 200, cmp_cap = kDefaultStateCap;
  cmp->add_option("--program", cmp_program)->required();
  cmp->add_option("--n", cmp_n)->required();
  cmp->add_option("--depth-budget", cmp_budget);
  cmp->add_option("--states-cap", cmp_cap);
  cmp->add_option("--csv-prefix", cmp_csv);

  // corpus
  auto* cor = app.add_subcommand("corpus", "run a case-study fixture's full suite");
  std::string cor_name, cor_dir;
  std::uint64_t cor_trials = 1000;
  cor->add_option("--name", cor_name, "fixture name (default: all)");
  cor->add_option("--dir", cor_dir, "corpus directory");
  cor->add_option("--trials", cor_trials, "trajectory samples per fixture");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*run) return cmd_run(run_program, run_seed, run_steps, run_format);
    if (*exec) {
      if (exec_program.empty() && !exec_model.given())
        throw InputError("exec needs --program or a model");
      return cmd_exec(exec_model, exec_program, exec_n, exec_cap, exec_csv, exec_format);
    }
    if (*est) return cmd_estimate(est_program, est_trials, est_steps, est_seed);
    if (*cpl) return cmd_coupling(cpl_mu1, cpl_mu2, cpl_rel, cpl_witness);
    if (*ref) return cmd_refine(ref_model, ref_program, ref_cert, ref_budget, ref_format);
    if (*rsm) return cmd_rsm(rsm_model, rsm_cert, rsm_states, rsm_format);
    if (*cmp) return cmd_compare(cmp_model, cmp_program, cmp_n, cmp_budget, cmp_cap, cmp_csv);
    if (*cor) return cmd_corpus(cor_name, cor_dir, cor_trials);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
