#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "termref/models.hpp"

namespace termref {

/// Ranking-supermartingale certificate: a non-negative rational function on
/// states and a positive drift epsilon.  The ranking function is either an
/// explicit table or one of the built-in formulas:
///
///   "two_coin"  f(b1, b2) = 0 if b1 != b2 else 2
///   "listgen"   f(q_f) = 0, f(q_0) = 2, f(q_1) = 3
///
/// JSON: {"f": [{"state": ..., "num": ..., "den": ...}, ...] | "<builtin>",
///        "epsilon": {"num": ..., "den": ...}}
struct RSMCertificate {
  std::function<std::optional<Rat>(const nlohmann::json&)> f;
  Rat epsilon;
  std::string description;
};

inline RSMCertificate rsm_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("f") || !doc.contains("epsilon"))
    throw InputError("RSM certificate needs fields 'f' and 'epsilon'");
  RSMCertificate cert;
  cert.epsilon = rat_from_json(doc.at("epsilon"));
  if (cert.epsilon <= 0)
    throw InputError("RSM epsilon must be positive, got " + rat_to_string(cert.epsilon));
  const auto& f = doc.at("f");
  if (f.is_string()) {
    std::string id = f.get<std::string>();
    cert.description = "builtin " + id;
    if (id == "two_coin") {
      cert.f = [](const nlohmann::json& s) -> std::optional<Rat> {
        if (!s.is_array() || s.size() != 2 || !s[0].is_boolean() || !s[1].is_boolean())
          return std::nullopt;
        return s[0].get<bool>() != s[1].get<bool>() ? Rat(0) : Rat(2);
      };
      return cert;
    }
    if (id == "listgen") {
      cert.f = [](const nlohmann::json& s) -> std::optional<Rat> {
        if (!s.is_string()) return std::nullopt;
        std::string q = s.get<std::string>();
        if (q == "q_f") return Rat(0);
        if (q == "q_0") return Rat(2);
        if (q == "q_1") return Rat(3);
        return std::nullopt;
      };
      return cert;
    }
    throw InputError("unknown builtin RSM formula: " + id);
  }
  if (!f.is_array()) throw InputError("RSM 'f' must be a table or a builtin id");
  auto table = std::make_shared<std::map<nlohmann::json, Rat>>();
  for (const auto& row : f) {
    if (!row.is_object() || !row.contains("state"))
      throw InputError("RSM table row needs a 'state'");
    Rat v = rat_from_json(row);
    if (v < 0)
      throw InputError("RSM value must be non-negative at state " +
                       row.at("state").dump());
    (*table)[row.at("state")] = v;
  }
  cert.description = "table (" + std::to_string(table->size()) + " states)";
  cert.f = [table](const nlohmann::json& s) -> std::optional<Rat> {
    auto it = table->find(s);
    if (it == table->end()) return std::nullopt;
    return it->second;
  };
  return cert;
}

struct RSMRow {
  nlohmann::json state;
  bool final{false};
  bool checked{false};            // final states are exempt
  Rat drift;                      // sum_s' step(s)(s') * f(s')
  Rat bound;                      // f(s) - epsilon
  bool ok{true};
  std::string error;              // non-empty when the condition is inapplicable
};

/// Per-state drift report.  "verified" means: on the explored state set,
/// every non-final state s with mass(step(s)) = 1 satisfies
/// E[f(step(s))] <= f(s) - epsilon and f is non-negative everywhere it was
/// consulted.  This is explicitly not a global proof for infinite-state
/// models; the verdict is scoped to the explored set.
struct RSMReport {
  std::vector<RSMRow> rows;
  bool verified{false};
  std::string first_violation;

  nlohmann::json to_json() const {
    nlohmann::json rs = nlohmann::json::array();
    for (const auto& r : rows) {
      nlohmann::json row{{"state", r.state}, {"final", r.final}, {"checked", r.checked}};
      if (r.checked) {
        row["drift"] = rat_to_string(r.drift);
        row["bound"] = rat_to_string(r.bound);
        row["ok"] = r.ok;
      }
      if (!r.error.empty()) row["error"] = r.error;
      rs.push_back(std::move(row));
    }
    return {{"verified", verified},
            {"scope", "explored state set only"},
            {"states", rs},
            {"first_violation", first_violation}};
  }
};

inline RSMReport check_rsm(const JsonModel& model, const RSMCertificate& cert,
                           const std::vector<nlohmann::json>& states) {
  RSMReport report;
  report.verified = true;
  auto flag = [&](const std::string& msg) {
    if (report.verified) report.first_violation = msg;
    report.verified = false;
  };
  for (const auto& s : states) {
    RSMRow row;
    row.state = s;
    row.final = model.is_final(s);
    auto fs = cert.f(s);
    if (!fs) {
      row.error = "f undefined at state " + s.dump();
      flag(row.error);
      report.rows.push_back(std::move(row));
      continue;
    }
    if (row.final) {
      // Drift condition vacuous at absorbing states; f need not be 0 there.
      report.rows.push_back(std::move(row));
      continue;
    }
    const auto mu = model.step(s);
    if (!mu.mass().is_one()) {
      row.error = "non-final state " + s.dump() + " has step mass " +
                  mu.mass().str() + "; drift condition inapplicable";
      flag(row.error);
      report.rows.push_back(std::move(row));
      continue;
    }
    Rat drift = 0;
    bool defined = true;
    for (const auto& [t, p] : mu.entries()) {
      auto ft = cert.f(t);
      if (!ft) {
        row.error = "f undefined at successor " + t.dump();
        flag(row.error);
        defined = false;
        break;
      }
      drift += p.rat() * *ft;
    }
    if (!defined) {
      report.rows.push_back(std::move(row));
      continue;
    }
    row.checked = true;
    row.drift = drift;
    row.bound = *fs - cert.epsilon;
    row.ok = drift <= row.bound;
    if (!row.ok)
      flag("drift " + rat_to_string(drift) + " > " + rat_to_string(row.bound) +
           " at state " + s.dump());
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace termref
