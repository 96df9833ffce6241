#ifndef FINSLERHJ_REPORT_HPP_
#define FINSLERHJ_REPORT_HPP_

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace finslerhj {

struct Witness {
  std::string location;
  std::vector<double> values;

  friend bool operator==(Witness const&, Witness const&) = default;
};

//! Outcome of one verification check. Every entry of `bound` is an upper
//! limit for the same-named entry of `measured` (slack already included), so
//! `pass` can be re-derived from the report alone.
struct VerificationReport {
  std::string check;
  bool pass = true;
  std::map<std::string, double> measured;
  std::map<std::string, double> bound;
  //! Discretisation constant C (or relative tolerance) used by the check.
  double tolerance = 0.0;
  std::vector<Witness> witnesses;
  std::string provenance;

  //! Records measured <= limit and updates `pass`.
  void Require(std::string const& name, double value, double limit) {
    measured[name] = value;
    bound[name] = limit;
    pass = pass && (value <= limit);
  }

  //! Records limit <= value as (-value) <= (-limit).
  void RequireAtLeast(std::string const& name, double value, double limit) {
    Require("neg_" + name, -value, -limit);
  }

  void Info(std::string const& name, double value) { measured[name] = value; }

  friend bool operator==(VerificationReport const&,
                         VerificationReport const&) = default;
};

inline bool RederivePass(VerificationReport const& r) {
  for (auto const& [name, limit] : r.bound) {
    auto it = r.measured.find(name);
    if (it == r.measured.end()) return false;
    if (!(it->second <= limit)) return false;
  }
  return true;
}

namespace detail {

inline nlohmann::json JsonNumber(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

}  // namespace detail

inline nlohmann::json ToJson(VerificationReport const& r) {
  nlohmann::json j;
  j["check"] = r.check;
  j["pass"] = r.pass;
  j["measured"] = nlohmann::json::object();
  for (auto const& [k, v] : r.measured) j["measured"][k] = detail::JsonNumber(v);
  j["bound"] = nlohmann::json::object();
  for (auto const& [k, v] : r.bound) j["bound"][k] = detail::JsonNumber(v);
  j["tolerance"] = detail::JsonNumber(r.tolerance);
  j["witnesses"] = nlohmann::json::array();
  for (auto const& w : r.witnesses) {
    nlohmann::json wv = nlohmann::json::array();
    for (double v : w.values) wv.push_back(detail::JsonNumber(v));
    j["witnesses"].push_back({{"location", w.location}, {"values", wv}});
  }
  j["provenance"] = r.provenance;
  return j;
}

inline nlohmann::json ToJson(std::vector<VerificationReport> const& rs) {
  nlohmann::json arr = nlohmann::json::array();
  for (auto const& r : rs) arr.push_back(ToJson(r));
  return arr;
}

}  // namespace finslerhj

#endif  // FINSLERHJ_REPORT_HPP_
