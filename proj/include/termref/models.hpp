#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "termref/markov.hpp"

namespace termref {

using JsonModel = Model<nlohmann::json>;
using JsonDist = SubDist<nlohmann::json>;

namespace detail {

inline long long state_int(const nlohmann::json& s) {
  if (!s.is_number_integer())
    throw InputError("expected an integer model state, got " + s.dump());
  return s.get<long long>();
}

}  // namespace detail

/// The built-in model zoo.
///
///   random_walk   symmetric random walk on the naturals; 0 is final,
///                 step(n+1) = { n: 1/2, n+2: 1/2 }
///   flip          repeated fair coin; true is the live state,
///                 step(true) = { true: 1/2, false: 1/2 }, false is final
///   listgen       states "q_f" (final), "q_0", "q_1";
///                 step(q_0) = { q_f: 1/2, q_1: 1/2 },
///                 step(q_1) = { q_0: 1/2, q_1: 1/2 }
///   two_coin      states [b1, b2]; final iff b1 != b2; a live state steps
///                 uniformly to all four pairs (two independent coins until
///                 they disagree)
///   gw_walk       Galton-Watson walk for offspring distribution mu (a
///                 finite-support distribution over naturals with mass 1);
///                 0 is final, step(n+1) = { n+k: mu(k) }
///
/// For gw_walk, `params` must carry {"mu": {"k": "num/den", ...}}.
inline JsonModel model_zoo(const std::string& name,
                           const nlohmann::json& params = nlohmann::json()) {
  using nlohmann::json;
  if (name == "random_walk") {
    return {[](const json& s) -> JsonDist {
              long long n = detail::state_int(s);
              if (n <= 0) return JsonDist::zero();
              return JsonDist::from_entries(
                  {{json(n - 1), Rat(1, 2)}, {json(n + 1), Rat(1, 2)}});
            },
            [](const json& s) { return detail::state_int(s) == 0; }};
  }
  if (name == "flip") {
    return {[](const json& s) -> JsonDist {
              if (!s.is_boolean()) throw InputError("flip model state must be a boolean");
              if (!s.get<bool>()) return JsonDist::zero();
              return JsonDist::from_entries(
                  {{json(true), Rat(1, 2)}, {json(false), Rat(1, 2)}});
            },
            [](const json& s) {
              if (!s.is_boolean()) throw InputError("flip model state must be a boolean");
              return !s.get<bool>();
            }};
  }
  if (name == "listgen") {
    auto expect = [](const json& s) -> std::string {
      if (!s.is_string()) throw InputError("listgen model state must be a string");
      std::string q = s.get<std::string>();
      if (q != "q_f" && q != "q_0" && q != "q_1")
        throw InputError("unknown listgen state: " + q);
      return q;
    };
    return {[expect](const json& s) -> JsonDist {
              std::string q = expect(s);
              if (q == "q_f") return JsonDist::zero();
              if (q == "q_0")
                return JsonDist::from_entries(
                    {{json("q_f"), Rat(1, 2)}, {json("q_1"), Rat(1, 2)}});
              return JsonDist::from_entries(
                  {{json("q_0"), Rat(1, 2)}, {json("q_1"), Rat(1, 2)}});
            },
            [expect](const json& s) { return expect(s) == "q_f"; }};
  }
  if (name == "two_coin") {
    auto pair_of = [](const json& s) -> std::pair<bool, bool> {
      if (!s.is_array() || s.size() != 2 || !s[0].is_boolean() || !s[1].is_boolean())
        throw InputError("two_coin model state must be a pair of booleans");
      return {s[0].get<bool>(), s[1].get<bool>()};
    };
    return {[pair_of](const json& s) -> JsonDist {
              auto [b1, b2] = pair_of(s);
              if (b1 != b2) return JsonDist::zero();
              typename JsonDist::Builder b;
              for (bool c1 : {false, true})
                for (bool c2 : {false, true})
                  b.add(json::array({c1, c2}), Rat(1, 4));
              return std::move(b).build();
            },
            [pair_of](const json& s) {
              auto [b1, b2] = pair_of(s);
              return b1 != b2;
            }};
  }
  if (name == "gw_walk") {
    if (!params.is_object() || !params.contains("mu"))
      throw InputError("gw_walk requires params {\"mu\": {\"k\": \"num/den\", ...}}");
    std::map<long long, Rat> mu;
    Rat total = 0;
    for (const auto& [k, v] : params.at("mu").items()) {
      long long off;
      try {
        off = std::stoll(k);
      } catch (const std::exception&) {
        throw InputError("gw_walk offspring count must be a natural number: " + k);
      }
      if (off < 0) throw InputError("gw_walk offspring count must be a natural number");
      Rat p = rat_from_json(v);
      if (p <= 0) throw InputError("gw_walk offspring probabilities must be positive");
      mu[off] += p;
      total += p;
    }
    if (total != 1)
      throw InputError("gw_walk offspring distribution must have mass 1, got " +
                       rat_to_string(total));
    return {[mu](const json& s) -> JsonDist {
              long long n = detail::state_int(s);
              if (n <= 0) return JsonDist::zero();
              typename JsonDist::Builder b;
              for (const auto& [k, p] : mu) b.add(json(n - 1 + k), p);
              return std::move(b).build();
            },
            [](const json& s) { return detail::state_int(s) == 0; }};
  }
  throw InputError("unknown model name: " + name);
}

/// Uniform offspring distribution parameters for gw_walk: unif{0..n}.
inline nlohmann::json gw_uniform_params(std::uint64_t n) {
  nlohmann::json mu = nlohmann::json::object();
  for (std::uint64_t k = 0; k <= n; ++k)
    mu[std::to_string(k)] = "1/" + std::to_string(n + 1);
  return {{"mu", mu}};
}

/// An explicit finite model parsed from JSON.
struct FiniteModel {
  JsonModel model;
  nlohmann::json start;
};

/// Parses {states: [{id, final}], edges: [{from, to, num, den}], start}.
/// Rejects: final states with outgoing edges, non-final states whose edge
/// probabilities sum above 1, edges touching unknown states, and documents
/// without a start state.
inline FiniteModel finite_model_from_json(const nlohmann::json& doc) {
  using nlohmann::json;
  if (!doc.is_object()) throw InputError("finite model document must be an object");
  if (!doc.contains("start")) throw InputError("finite model has no start state");
  if (!doc.contains("states") || !doc.at("states").is_array() || doc.at("states").empty())
    throw InputError("finite model has no states");

  auto finals = std::make_shared<std::map<json, bool>>();
  for (const auto& st : doc.at("states")) {
    if (!st.is_object() || !st.contains("id"))
      throw InputError("finite model state entry must carry an id");
    (*finals)[st.at("id")] = st.value("final", false);
  }
  if (!finals->count(doc.at("start")))
    throw InputError("finite model start state is not declared");

  auto edges = std::make_shared<std::map<json, std::vector<std::pair<json, Rat>>>>();
  if (doc.contains("edges")) {
    for (const auto& e : doc.at("edges")) {
      if (!e.is_object() || !e.contains("from") || !e.contains("to"))
        throw InputError("finite model edge must carry from/to");
      Rat p = e.contains("p") ? rat_from_json(e.at("p")) : rat_from_json(e);
      if (p <= 0 || p > 1)
        throw InputError("edge probability out of (0,1]: " + rat_to_string(p));
      if (!finals->count(e.at("from")) || !finals->count(e.at("to")))
        throw InputError("edge refers to an undeclared state");
      (*edges)[e.at("from")].emplace_back(e.at("to"), p);
    }
  }
  for (const auto& [s, outs] : *edges) {
    if (finals->at(s))
      throw InputError("final state " + s.dump() + " has outgoing edges");
    Rat total = 0;
    for (const auto& [t, p] : outs) total += p;
    if (total > 1)
      throw InputError("outgoing probabilities of state " + s.dump() +
                       " sum to " + rat_to_string(total) + " > 1");
  }

  JsonModel model{
      [edges, finals](const json& s) -> JsonDist {
        if (!finals->count(s)) throw InputError("unknown model state: " + s.dump());
        auto it = edges->find(s);
        if (it == edges->end()) return JsonDist::zero();
        typename JsonDist::Builder b;
        for (const auto& [t, p] : it->second) b.add(t, p);
        return std::move(b).build();
      },
      [finals](const json& s) {
        auto it = finals->find(s);
        if (it == finals->end()) throw InputError("unknown model state: " + s.dump());
        return it->second;
      }};
  return {std::move(model), doc.at("start")};
}

}  // namespace termref
