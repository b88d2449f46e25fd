#pragma once

#include <boost/functional/hash.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <string>

#include "json.hpp"
#include "termref/common.hpp"

namespace termref {

using Int = boost::multiprecision::cpp_int;
using Rat = boost::multiprecision::cpp_rational;

inline Int rat_num(const Rat& r) { return boost::multiprecision::numerator(r); }
inline Int rat_den(const Rat& r) { return boost::multiprecision::denominator(r); }

/// Formats a rational as "num/den" ("3/4", "2", "-1/3").  Integers drop the
/// denominator.
inline std::string rat_to_string(const Rat& r) {
  if (rat_den(r) == 1) return rat_num(r).str();
  return rat_num(r).str() + "/" + rat_den(r).str();
}

/// Parses "num/den" or "num".  Whitespace around the tokens is accepted.
inline Rat rat_from_string(const std::string& text) {
  auto trim = [](std::string s) {
    const char* ws = " \t\n\r";
    auto b = s.find_first_not_of(ws);
    if (b == std::string::npos) return std::string();
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
  };
  std::string s = trim(text);
  if (s.empty()) throw InputError("empty rational literal");
  try {
    auto slash = s.find('/');
    if (slash == std::string::npos) return Rat(Int(s));
    Int num(trim(s.substr(0, slash)));
    Int den(trim(s.substr(slash + 1)));
    if (den == 0) throw InputError("rational with zero denominator: " + text);
    return Rat(num, den);
  } catch (const std::exception&) {
    throw InputError("malformed rational literal: " + text);
  }
}

/// Reads a rational from JSON: either a string "num/den", an integer, or an
/// object {"num": ..., "den": ...} whose fields are integers or strings.
inline Rat rat_from_json(const nlohmann::json& j) {
  if (j.is_string()) return rat_from_string(j.get<std::string>());
  if (j.is_number_integer()) return Rat(j.get<long long>());
  if (j.is_object() && j.contains("num") && j.contains("den")) {
    auto field = [](const nlohmann::json& v) -> Int {
      if (v.is_string()) return Int(v.get<std::string>());
      if (v.is_number_integer()) return Int(v.get<long long>());
      throw InputError("rational field must be an integer or string");
    };
    Int den = field(j.at("den"));
    if (den == 0) throw InputError("rational with zero denominator");
    return Rat(field(j.at("num")), den);
  }
  throw InputError("cannot read rational from JSON value: " + j.dump());
}

/// Exact probability: a rational in [0, 1].
class Prob {
 public:
  Prob() : value_(0) {}
  explicit Prob(Rat value) : value_(std::move(value)) {
    if (value_ < 0 || value_ > 1)
      throw InputError("probability out of [0,1]: " + rat_to_string(value_));
  }
  static Prob zero() { return Prob(); }
  static Prob one() { return Prob(Rat(1)); }

  const Rat& rat() const { return value_; }
  bool is_zero() const { return value_ == 0; }
  bool is_one() const { return value_ == 1; }
  std::string str() const { return rat_to_string(value_); }

  friend bool operator==(const Prob& a, const Prob& b) { return a.value_ == b.value_; }
  friend bool operator!=(const Prob& a, const Prob& b) { return a.value_ != b.value_; }
  friend bool operator<(const Prob& a, const Prob& b) { return a.value_ < b.value_; }
  friend bool operator<=(const Prob& a, const Prob& b) { return a.value_ <= b.value_; }
  friend bool operator>(const Prob& a, const Prob& b) { return a.value_ > b.value_; }
  friend bool operator>=(const Prob& a, const Prob& b) { return a.value_ >= b.value_; }

 private:
  Rat value_;
};

inline std::size_t hash_rat(const Rat& r) {
  std::size_t seed = 0;
  boost::hash_combine(seed, rat_num(r));
  boost::hash_combine(seed, rat_den(r));
  return seed;
}

}  // namespace termref
