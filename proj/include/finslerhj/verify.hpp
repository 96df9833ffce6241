#ifndef FINSLERHJ_VERIFY_HPP_
#define FINSLERHJ_VERIFY_HPP_

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "finslerhj/eikonal.hpp"
#include "finslerhj/evolution.hpp"
#include "finslerhj/report.hpp"
#include "finslerhj/stationary.hpp"
#include "finslerhj/subdiff.hpp"

namespace finslerhj {

//! Solved artifacts a suite may draw on. Every pointer is optional; a check
//! whose inputs are missing raises InputError.
struct SuiteContext {
  NormField2 const* metric = nullptr;
  GridDomain const* grid = nullptr;
  std::string provenance;

  // Eikonal.
  ScalarField const* eikonal = nullptr;
  BoundaryData const* boundary = nullptr;
  VerifyEikonalOptions eikonal_options{};

  // Stationary.
  ScalarField const* stationary = nullptr;
  StationaryHamiltonian const* hamiltonian = nullptr;
  std::optional<double> lower;
  std::optional<double> upper;
  std::optional<LipschitzRule> lipschitz;
  DistanceFrom const* from_x0 = nullptr;
  Point2 x0{0.0, 0.0};
  VerifyStationaryOptions stationary_options{};
  //! Second solve for the stability check: u2 solves with hamiltonian2.
  StationaryHamiltonian const* hamiltonian2 = nullptr;
  ScalarField const* stationary2 = nullptr;
  double stability_c = 5.0;

  // Condition (A), evolution flavour.
  EvolutionHamiltonian const* evolution_hamiltonian = nullptr;
  std::optional<EvolutionCertificate> evolution_certificate;

  // Deville: the field is the stationary solution if present, else the
  // eikonal one.
  std::optional<std::size_t> deville_node;
  double deville_delta = 0.0;

  // Evolution.
  EvolutionSolution const* evolution = nullptr;
  ScalarField const* initial = nullptr;
  std::optional<double> k0;
  std::optional<double> k1;
  //! Supersolution candidate for the comparison check.
  EvolutionSolution const* evolution_upper = nullptr;
  //! Run with (H2, h2) against `evolution` with (H1, h1).
  EvolutionSolution const* evolution_h2 = nullptr;
  EvolutionHamiltonian const* evolution_hamiltonian2 = nullptr;
  ScalarField const* initial2 = nullptr;
  EvolutionCheckOptions evolution_options{};
};

namespace detail {

template <typename T>
T const& Need(T const* p, char const* what) {
  if (p == nullptr) throw InputError(std::string("check needs ") + what);
  return *p;
}

template <typename T>
T const& Need(std::optional<T> const& p, char const* what) {
  if (!p) throw InputError(std::string("check needs ") + what);
  return *p;
}

//! Copy of `full` restricted to the named measurements; pass re-derived.
inline VerificationReport Subreport(VerificationReport const& full,
                                    std::string const& name,
                                    std::vector<std::string> const& keys) {
  VerificationReport r;
  r.check = name;
  r.tolerance = full.tolerance;
  r.provenance = full.provenance;
  for (auto const& k : keys) {
    if (auto it = full.measured.find(k); it != full.measured.end()) {
      r.measured[k] = it->second;
    }
    if (auto it = full.bound.find(k); it != full.bound.end()) r.bound[k] = it->second;
  }
  r.pass = RederivePass(r);
  if (!r.pass) r.witnesses = full.witnesses;
  return r;
}

inline VerificationReport EikonalPart(SuiteContext const& c, std::string const& name,
                                      std::vector<std::string> const& keys) {
  auto const full = VerifyEikonal(Need(c.eikonal, "an eikonal field"),
                                  Need(c.metric, "a metric"), Need(c.grid, "a grid"),
                                  Need(c.boundary, "boundary data"), c.eikonal_options);
  return Subreport(full, name, keys);
}

inline VerificationReport StationaryPart(SuiteContext const& c, std::string const& name,
                                         std::vector<std::string> const& keys,
                                         bool spot) {
  auto opts = c.stationary_options;
  opts.spot_check = spot;
  if (opts.distance_from_x0 == nullptr) opts.distance_from_x0 = c.from_x0;
  auto const& h = Need(c.hamiltonian, "a Hamiltonian");
  bool const wants_lipschitz =
      std::find(keys.begin(), keys.end(), "lipschitz") != keys.end();
  LipschitzRule const rule = wants_lipschitz
                                 ? Need(c.lipschitz, "an expected Lipschitz rule")
                                 : c.lipschitz.value_or(LipschitzRule{false, kInf, {}});
  // Default envelope -K1 <= u <= -K0.
  double const lo = c.lower.value_or(-h.k1);
  double const hi = c.upper.value_or(-h.k0);
  auto const full = VerifyStationary(Need(c.stationary, "a stationary field"), h, lo, hi, rule,
                                     Need(c.metric, "a metric"), Need(c.grid, "a grid"),
                                     opts);
  std::vector<std::string> wanted;
  for (auto const& [k, v] : full.measured) {
    for (auto const& prefix : keys) {
      if (k.rfind(prefix, 0) == 0) wanted.push_back(k);
    }
  }
  return Subreport(full, name, wanted);
}

}  // namespace detail

using SuiteCheck = std::function<VerificationReport(SuiteContext const&)>;

//! Named checks. Aliases "bounds", "lipschitz" and "viscosity" refer to the
//! stationary checks.
inline std::map<std::string, SuiteCheck> const& CheckRegistry() {
  using detail::Need;
  static std::map<std::string, SuiteCheck> const reg = [] {
    std::map<std::string, SuiteCheck> m;
    m["eikonal-boundary"] = [](SuiteContext const& c) {
      return detail::EikonalPart(c, "eikonal-boundary", {"boundary_error"});
    };
    m["eikonal-lipschitz"] = [](SuiteContext const& c) {
      return detail::EikonalPart(c, "eikonal-lipschitz", {"lipschitz"});
    };
    m["eikonal-gradient"] = [](SuiteContext const& c) {
      return detail::EikonalPart(c, "eikonal-gradient",
                                 {"gradient_norm_deviation", "differentiable_nodes",
                                  "ridge_subdiff_deficit", "probe_slack"});
    };
    m["ridge"] = [](SuiteContext const& c) {
      ScalarField const& u = c.eikonal ? *c.eikonal : Need(c.stationary, "a field");
      auto const nodes = RidgeDiagnostic(u, Need(c.metric, "a metric"), Need(c.grid, "a grid"),
                                         c.eikonal_options.ridge_threshold);
      VerificationReport r;
      r.check = "ridge";
      r.tolerance = c.eikonal_options.ridge_threshold;
      r.RequireAtLeast("ridge_nodes", static_cast<double>(nodes.size()), 1.0);
      for (std::size_t q = 0; q < nodes.size() && q < 10; ++q) {
        r.witnesses.push_back({"node " + std::to_string(nodes[q]),
                               {c.grid->Coord(nodes[q])[0], c.grid->Coord(nodes[q])[1]}});
      }
      return r;
    };
    m["stationary-bounds"] = [](SuiteContext const& c) {
      return detail::StationaryPart(c, "stationary-bounds", {"min_u", "neg_min_u", "max_u"}, false);
    };
    m["stationary-lipschitz"] = [](SuiteContext const& c) {
      return detail::StationaryPart(c, "stationary-lipschitz", {"lipschitz"}, false);
    };
    m["stationary-viscosity"] = [](SuiteContext const& c) {
      return detail::StationaryPart(c, "stationary-viscosity", {"spot_"}, true);
    };
    m["stationary-stability"] = [](SuiteContext const& c) {
      StabilityOptions so;
      so.c = c.stability_c;
      auto const gap = StabilityGap(Need(c.hamiltonian, "a Hamiltonian"),
                                    Need(c.hamiltonian2, "a second Hamiltonian"),
                                    Need(c.stationary, "a stationary field"),
                                    Need(c.stationary2, "a second stationary field"),
                                    Need(c.grid, "a grid"), so);
      VerificationReport r;
      r.check = "stationary-stability";
      r.tolerance = so.c;
      r.Info("sup_h2_minus_h1", gap.bound);
      r.Require("gap", gap.gap, gap.bound + so.c * c.grid->h());
      return r;
    };
    m["condition-A"] = [](SuiteContext const& c) {
      if (c.hamiltonian != nullptr) {
        return CheckConditionA(*c.hamiltonian, Need(c.metric, "a metric"),
                               Need(c.grid, "a grid"));
      }
      return CheckConditionAEvolution(Need(c.evolution_hamiltonian, "a Hamiltonian"),
                                      Need(c.evolution_certificate, "a certificate"),
                                      Need(c.metric, "a metric"), Need(c.grid, "a grid"));
    };
    m["coercivity"] = [](SuiteContext const& c) {
      auto const& h = Need(c.hamiltonian, "a Hamiltonian");
      VerificationReport r;
      r.check = "coercivity";
      r.tolerance = 1e-6;
      double const cap = 1e6;
      double big = kInf;
      try {
        big = CoercivityThreshold(h, h.k1, c.x0, 1e-6);
      } catch (CoercivityError const&) {
      }
      r.Require("threshold", big, cap);
      return r;
    };
    m["deville"] = [](SuiteContext const& c) {
      ScalarField const& f = c.stationary ? *c.stationary : Need(c.eikonal, "a field");
      auto const& g = Need(c.grid, "a grid");
      std::size_t const p = c.deville_node.value_or(g.NearestNode(c.x0));
      double const delta = c.deville_delta > 0.0 ? c.deville_delta : 4.0 * g.h();
      auto const lr = DevilleCheck(f, Need(c.metric, "a metric"), g, p, delta);
      VerificationReport r;
      r.check = "deville";
      r.tolerance = lr.tolerance;
      r.Info("k_bound", lr.k_bound);
      r.Require("lipschitz", lr.measured, lr.k_bound * (1.0 + lr.tolerance));
      for (std::size_t q = 0; q < lr.witnesses.size(); ++q) {
        r.witnesses.push_back({"pair (" + std::to_string(lr.witnesses[q].first) + ", " +
                                   std::to_string(lr.witnesses[q].second) + ")",
                               {lr.witness_slopes[q]}});
      }
      return r;
    };
    m["evolution-envelope"] = [](SuiteContext const& c) {
      return EnvelopeBoundsCheck(Need(c.evolution, "an evolution run"),
                                 Need(c.k0, "K0"), Need(c.k1, "K1"),
                                 Need(c.initial, "initial data"), Need(c.grid, "a grid"),
                                 c.evolution_options);
    };
    m["evolution-comparison"] = [](SuiteContext const& c) {
      auto const res = ComparisonCheck(Need(c.evolution, "an evolution run"),
                                       Need(c.evolution_upper, "a supersolution run"),
                                       Need(c.grid, "a grid"), c.evolution_options);
      VerificationReport r;
      r.check = "evolution-comparison";
      r.tolerance = c.evolution_options.c;
      r.RequireAtLeast("inf_gap", res.inf_gap, -res.slack);
      return r;
    };
    m["evolution-monotonicity"] = [](SuiteContext const& c) {
      auto const res = MonotonicityGap(
          Need(c.evolution_h2, "a run with (H2, h2)"), Need(c.evolution, "an evolution run"),
          Need(c.evolution_hamiltonian, "H1"), Need(c.evolution_hamiltonian2, "H2"),
          Need(c.initial, "h1"), Need(c.initial2, "h2"), Need(c.grid, "a grid"), 10.0,
          c.evolution_options);
      VerificationReport r;
      r.check = "evolution-monotonicity";
      r.tolerance = c.evolution_options.c;
      r.Info("bound", res.bound);
      r.Require("gap", res.gap, res.bound + res.slack);
      return r;
    };
    m["hopf-lax-agreement"] = [](SuiteContext const& c) {
      auto const& sol = Need(c.evolution, "an evolution run");
      auto const& g = Need(c.grid, "a grid");
      auto const oracle = HopfLaxOracle(Need(c.metric, "a metric"), g,
                                        Need(c.initial, "initial data"), sol.horizon);
      double err = 0.0;
      std::size_t worst = 0;
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (!g.InFrame(k, c.evolution_options.frame)) continue;
        double const e = std::abs(sol.final_field[k] - oracle[k]);
        if (e > err) {
          err = e;
          worst = k;
        }
      }
      VerificationReport r;
      r.check = "hopf-lax-agreement";
      r.tolerance = 3.0;
      r.Require("max_error", err, 3.0 * (g.h() + sol.dt));
      if (!r.pass) {
        r.witnesses.push_back({"node " + std::to_string(worst),
                               {sol.final_field[worst], oracle[worst]}});
      }
      return r;
    };
    m["bounds"] = m["stationary-bounds"];
    m["lipschitz"] = m["stationary-lipschitz"];
    m["viscosity"] = m["stationary-viscosity"];
    return m;
  }();
  return reg;
}

//! Runs the named checks in order. Unknown names raise InputError before any
//! check runs.
inline std::vector<VerificationReport> RunSuite(std::vector<std::string> const& names,
                                                SuiteContext const& ctx) {
  auto const& reg = CheckRegistry();
  for (auto const& n : names) {
    if (!reg.count(n)) throw InputError("unknown check: " + n);
  }
  std::vector<VerificationReport> out;
  for (auto const& n : names) {
    auto r = reg.at(n)(ctx);
    r.provenance = ctx.provenance;
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace finslerhj

#endif  // FINSLERHJ_VERIFY_HPP_
