#ifndef FINSLERHJ_STATIONARY_HPP_
#define FINSLERHJ_STATIONARY_HPP_

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "finslerhj/distance.hpp"
#include "finslerhj/grid.hpp"
#include "finslerhj/hamiltonian.hpp"
#include "finslerhj/norm_field.hpp"
#include "finslerhj/report.hpp"
#include "finslerhj/subdiff.hpp"
#include "finslerhj/upwind.hpp"

namespace finslerhj {

struct ConditionASampler {
  //! Nodes x1 carrying a distance field; x2 ranges over all nodes.
  std::size_t sources = 20;
  std::size_t budget = 100000;
  double t_max = 10.0;
  int stencil_order = 16;
  std::uint64_t seed = 0xa11ce;
  std::size_t max_witnesses = 10;
};

//! Samples |H(x1,t1) - H(x2,t2)| against omega(d, t1 - t2) + C max|t| d.
inline VerificationReport CheckConditionA(StationaryHamiltonian const& h,
                                          ConditionACertificate const& cert,
                                          NormField2 const& nf,
                                          GridDomain const& g,
                                          ConditionASampler const& s = {}) {
  if (!cert.omega) {
    throw InputError("condition (A) check needs a certificate");
  }
  VerificationReport rep;
  rep.check = "condition-A";
  rep.tolerance = 1e-9;
  std::size_t const n_src = std::min(s.sources, g.size());
  DistanceOptions dopt;
  dopt.stencil_order = s.stencil_order;
  std::vector<std::size_t> src;
  std::vector<ScalarField> dist;
  for (std::size_t q = 0; q < n_src; ++q) {
    std::size_t const k = (q * g.size()) / n_src + (g.size() / (2 * n_src));
    src.push_back(std::min(k, g.size() - 1));
    dist.push_back(DistanceFromNode(nf, g, src.back(), dopt).values);
  }
  std::mt19937_64 rng(s.seed);
  std::uniform_int_distribution<std::size_t> pick_src(0, n_src - 1);
  std::uniform_int_distribution<std::size_t> pick_node(0, g.size() - 1);
  std::uniform_real_distribution<double> pick_t(0.0, s.t_max);
  std::size_t violations = 0;
  double worst = -kInf;
  for (std::size_t n = 0; n < s.budget; ++n) {
    std::size_t const q = pick_src(rng);
    std::size_t const x2 = pick_node(rng);
    double const t1 = pick_t(rng);
    // Every fourth sample reuses t1 to probe the pure x-dependence.
    double const t2 = (n % 4 == 0) ? t1 : pick_t(rng);
    double const d = dist[q][x2];
    if (!std::isfinite(d)) continue;
    Point2 const p1 = g.Coord(src[q]);
    Point2 const p2 = g.Coord(x2);
    double const lhs = std::abs(h(p1, t1) - h(p2, t2));
    double const rhs = cert.omega(d, t1 - t2) +
                       cert.c * std::max(std::abs(t1), std::abs(t2)) * d;
    worst = std::max(worst, lhs - rhs);
    if (lhs > rhs + 1e-9) {
      ++violations;
      if (rep.witnesses.size() < s.max_witnesses) {
        std::ostringstream ss;
        ss << "x1=" << ToString(p1) << " x2=" << ToString(p2);
        rep.witnesses.push_back({ss.str(), {t1, t2, lhs, rhs}});
      }
    }
  }
  rep.Info("max_excess", worst);
  rep.Info("samples", static_cast<double>(s.budget));
  rep.Require("violations", static_cast<double>(violations), 0.0);
  return rep;
}

inline VerificationReport CheckConditionA(StationaryHamiltonian const& h,
                                          NormField2 const& nf,
                                          GridDomain const& g,
                                          ConditionASampler const& s = {}) {
  if (!h.certificate) throw InputError("condition (A) check needs a certificate");
  return CheckConditionA(h, *h.certificate, nf, g, s);
}

struct CoercivityOptions {
  //! Sampled z are the grid nodes within this euclidean radius of x (x
  //! itself always included).
  double radius = 0.0;
  double window = 10.0;
  double cap = 1e6;
  GridDomain const* grid = nullptr;
};

//! Smallest sampled R with H(z, t) > level for every sampled z near x and
//! t in (R, R + window], bisected to `tol`.
inline double CoercivityThreshold(StationaryHamiltonian const& h, double level,
                                  Point2 const& x, double tol,
                                  CoercivityOptions const& opts = {}) {
  if (h.coercivity == CoercivityClass::kNone) {
    throw CoercivityError("Hamiltonian declares no coercivity");
  }
  if (!(tol > 0.0)) throw InputError("tolerance must be positive");
  std::vector<Point2> zs{x};
  if (opts.grid != nullptr && opts.radius > 0.0) {
    auto const& g = *opts.grid;
    for (std::size_t k = 0; k < g.size(); ++k) {
      Point2 const p = g.Coord(k);
      if (std::hypot(p[0] - x[0], p[1] - x[1]) <= opts.radius) zs.push_back(p);
    }
  }
  std::vector<double> offsets;
  for (int k = 0; k <= 52; ++k) offsets.push_back(opts.window * std::ldexp(1.0, -k));
  for (int k = 1; k < 64; ++k) offsets.push_back(opts.window * k / 64.0);
  auto good = [&](double r) {
    for (auto const& z : zs) {
      for (double o : offsets) {
        if (!(h(z, r + o) > level)) return false;
      }
    }
    return true;
  };
  if (good(0.0)) return 0.0;
  double hi = 1.0;
  while (!good(hi)) {
    hi *= 2.0;
    if (hi > opts.cap) {
      throw CoercivityError("no coercivity threshold below the cap");
    }
  }
  double lo = hi > 1.0 ? hi / 2.0 : 0.0;
  while (hi - lo > tol) {
    double const mid = 0.5 * (lo + hi);
    (good(mid) ? hi : lo) = mid;
  }
  return hi;
}

//! Sampled monotonicity in t and K0 <= H(x, 0) <= K1; throws InputError.
inline void ValidateHamiltonian(StationaryHamiltonian const& h,
                                GridDomain const& g, double t_max = 10.0) {
  if (!h.monotone_in_t) {
    throw InputError("solver requires H nondecreasing in t");
  }
  if (!(h.k0 <= h.k1)) throw InputError("K0 must not exceed K1");
  std::size_t const stride = std::max<std::size_t>(1, g.size() / 997);
  for (std::size_t k = 0; k < g.size(); k += stride) {
    Point2 const x = g.Coord(k);
    double const h0 = h(x, 0.0);
    if (h0 < h.k0 - 1e-9 || h0 > h.k1 + 1e-9) {
      throw InputError("H(x,0) outside [K0, K1] at " + ToString(x));
    }
    double prev = h0;
    for (int q = 1; q <= 40; ++q) {
      double const t = t_max * q / 40.0;
      double const cur = h(x, t);
      if (prev > cur + 1e-12) {
        throw InputError("H is not nondecreasing in t at " + ToString(x));
      }
      prev = cur;
    }
  }
}

struct StationaryOptions {
  double tol = 1e-8;
  int max_sweeps = 4000;
  double bisect_tol = 1e-10;
  //! Jacobi updates from the previous iterate, rows split across threads.
  bool jacobi = false;
  unsigned threads = 1;
  //! Keep every sweep's field (for monotonicity checks); memory heavy.
  bool keep_history = false;
  bool validate = true;
};

struct StationarySolution {
  ScalarField u;
  int sweeps = 0;
  double last_update = 0.0;
  std::vector<ScalarField> history;
};

namespace detail {

// Lower end of the final bracket after a fixed number of halvings of
// [lo, hi]: the largest value known to satisfy v + H(x, P(v)) <= 0.
template <typename F>
double FixedBisection(F&& f, double lo, double hi, int iters) {
  for (int it = 0; it < iters; ++it) {
    double const mid = 0.5 * (lo + hi);
    if (f(mid) <= 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

struct StationaryUpdate {
  StationaryHamiltonian const& h;
  NormField2 const& nf;
  GridDomain const& g;
  double lo;
  double hi;
  int iters;

  double operator()(std::vector<double> const& u, std::size_t k) const {
    Point2 const x = g.Coord(k);
    auto const st = MakeUpwind(g, u, k, [](std::size_t) { return true; });
    auto f = [&](double v) { return v + h(x, UpwindMagnitude(nf, x, st, v)); };
    double const flo = f(lo);
    double const fhi = f(hi);
    if (!(flo < 0.0 && fhi > 0.0)) {
      std::ostringstream ss;
      ss << "bisection bracket lost its sign change at " << ToString(x)
         << ": f(" << lo << ")=" << flo << ", f(" << hi << ")=" << fhi;
      throw ConvergenceError(ss.str());
    }
    return FixedBisection(f, lo, hi, iters);
  }
};

}  // namespace detail

//! Discrete Perron iteration for u + H(x, ||du||_x) = 0 on the whole grid
//! rectangle: start from s0 = -K1 and apply Gauss-Seidel node updates in
//! the four axis orderings until the largest change drops below tol.
inline StationarySolution SolveStationary(StationaryHamiltonian const& h,
                                          NormField2 const& nf,
                                          GridDomain const& g,
                                          StationaryOptions const& opts = {}) {
  if (opts.validate) ValidateHamiltonian(h, g);
  double const lo = -h.k1 - 1.0;
  double const hi = -h.k0 + 1.0;
  int const iters =
      static_cast<int>(std::ceil(std::log2((hi - lo) / opts.bisect_tol)));
  detail::StationaryUpdate const update{h, nf, g, lo, hi, iters};

  StationarySolution sol;
  std::vector<double> u(g.size(), -h.k1);
  if (opts.keep_history) sol.history.emplace_back(g.nx(), g.ny(), u);
  long const nx = static_cast<long>(g.nx());
  long const ny = static_cast<long>(g.ny());

  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double change = 0.0;
    if (!opts.jacobi) {
      bool const rev_i = sweep % 4 == 1 || sweep % 4 == 2;
      bool const rev_j = sweep % 4 >= 2;
      for (long jj = 0; jj < ny; ++jj) {
        long const j = rev_j ? ny - 1 - jj : jj;
        for (long ii = 0; ii < nx; ++ii) {
          long const i = rev_i ? nx - 1 - ii : ii;
          auto const k = static_cast<std::size_t>(j * nx + i);
          double const v = update(u, k);
          change = std::max(change, std::abs(v - u[k]));
          u[k] = v;
        }
      }
    } else {
      std::vector<double> next(u.size());
      unsigned const nt = std::max(1u, opts.threads);
      std::vector<double> local_change(nt, 0.0);
      std::vector<std::exception_ptr> errors(nt);
      auto work = [&](unsigned t) {
        try {
          for (long j = t; j < ny; j += nt) {
            for (long i = 0; i < nx; ++i) {
              auto const k = static_cast<std::size_t>(j * nx + i);
              next[k] = update(u, k);
              local_change[t] = std::max(local_change[t], std::abs(next[k] - u[k]));
            }
          }
        } catch (...) {
          errors[t] = std::current_exception();
        }
      };
      {
        std::vector<std::jthread> pool;
        for (unsigned t = 1; t < nt; ++t) pool.emplace_back(work, t);
        work(0);
      }
      for (auto const& e : errors) {
        if (e) std::rethrow_exception(e);
      }
      for (double c : local_change) change = std::max(change, c);
      u.swap(next);
    }
    sol.sweeps = sweep + 1;
    sol.last_update = change;
    if (opts.keep_history) sol.history.emplace_back(g.nx(), g.ny(), u);
    if (change < opts.tol) {
      sol.u = ScalarField(g.nx(), g.ny(), std::move(u));
      return sol;
    }
  }
  std::ostringstream ss;
  ss << "stationary sweeps did not converge in " << opts.max_sweeps
     << " sweeps; last max update " << sol.last_update;
  throw ConvergenceError(ss.str());
}

struct EikonalSweepOptions {
  double tol = 1e-10;
  int max_sweeps = 400;
};

//! Fast sweeping for ||du||_x = 1 with Dirichlet values on the boundary
//! nodes: the zero-order term is dropped and each interior update solves
//! P(v) = 1 by bisection, keeping the minimum of old and new values.
inline ScalarField SweepEikonal(NormField2 const& nf, GridDomain const& g,
                                std::vector<Seed> const& boundary,
                                EikonalSweepOptions const& opts = {}) {
  std::vector<double> u(g.size(), kInf);
  for (auto const& s : boundary) u[s.node] = s.value;
  auto active = [&](std::size_t k) { return g.IsActive(k); };
  long const nx = static_cast<long>(g.nx());
  long const ny = static_cast<long>(g.ny());
  for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
    double change = 0.0;
    bool const rev_i = sweep % 4 == 1 || sweep % 4 == 2;
    bool const rev_j = sweep % 4 >= 2;
    for (long jj = 0; jj < ny; ++jj) {
      long const j = rev_j ? ny - 1 - jj : jj;
      for (long ii = 0; ii < nx; ++ii) {
        long const i = rev_i ? nx - 1 - ii : ii;
        auto const k = static_cast<std::size_t>(j * nx + i);
        if (!g.IsInterior(k)) continue;
        auto const st = MakeUpwind(g, u, k, active);
        double const base = st.MinNeighbor();
        if (std::isinf(base)) continue;
        Point2 const x = g.Coord(k);
        auto p = [&](double v) { return UpwindMagnitude(nf, x, st, v); };
        double step = g.h();
        while (p(base + step) < 1.0) step *= 2.0;
        double lo = base;
        double hi = base + step;
        for (int it = 0; it < 64; ++it) {
          double const mid = 0.5 * (lo + hi);
          (p(mid) < 1.0 ? lo : hi) = mid;
        }
        double const v = 0.5 * (lo + hi);
        if (v < u[k]) {
          change = std::max(change, std::isinf(u[k]) ? kInf : u[k] - v);
          u[k] = v;
        }
      }
    }
    if (sweep >= 3 && change < opts.tol) break;
  }
  ScalarField out(g.nx(), g.ny(), std::move(u));
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!g.IsActive(k)) out[k] = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

struct SpotCheckOptions {
  //! Residual allowance C * h.
  double c = 10.0;
  double frame = 0.1;
  std::size_t stride = 1;
  double curvature = 1.0;
  std::size_t max_witnesses = 10;
};

namespace detail {

template <typename Pred>
std::vector<std::size_t> FrameNodes(GridDomain const& g, double frame,
                                    std::size_t stride, Pred&& extra) {
  std::vector<std::size_t> out;
  std::size_t n = 0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!g.InFrame(k, frame) || !extra(k)) continue;
    if (n++ % stride == 0) out.push_back(k);
  }
  return out;
}

}  // namespace detail

//! Discrete viscosity subsolution test: for sampled frame nodes x and every
//! one-sided candidate Delta passing the superdifferential probe,
//! u(x) + H(x, ||Delta||*) <= C h. Measured: the largest residual.
inline VerificationReport SubsolutionSpotCheck(ScalarField const& u,
                                               StationaryHamiltonian const& h,
                                               NormField2 const& nf,
                                               GridDomain const& g,
                                               SpotCheckOptions const& opts = {}) {
  VerificationReport rep;
  rep.check = "subsolution-spot-check";
  rep.tolerance = opts.c;
  SubdiffProbe const probe = DefaultProbe(g, opts.curvature);
  double worst = -kInf;
  std::size_t tested = 0;
  for (std::size_t k : detail::FrameNodes(g, opts.frame, opts.stride,
                                          [&](std::size_t k) { return g.IsInterior(k); })) {
    Point2 const x = g.Coord(k);
    for (auto const& c : OneSidedCandidates(u, g, k)) {
      bool passed = false;
      try {
        passed = IsSuperdifferential(u, g, k, c, probe);
      } catch (ProbeError const&) {
        continue;
      }
      if (!passed) continue;
      ++tested;
      double const r = u[k] + h(x, nf.DualNorm(x, c));
      if (r > worst) worst = r;
      if (r > opts.c * g.h() && rep.witnesses.size() < opts.max_witnesses) {
        rep.witnesses.push_back({"node " + std::to_string(k), {u[k], nf.DualNorm(x, c), r}});
      }
    }
  }
  rep.Info("tested_candidates", static_cast<double>(tested));
  rep.Require("max_residual", tested ? worst : -kInf, opts.c * g.h());
  return rep;
}

//! Mirror: candidates passing the subdifferential probe satisfy
//! u(x) + H(x, ||Delta||*) >= -C h.
inline VerificationReport SupersolutionSpotCheck(ScalarField const& u,
                                                 StationaryHamiltonian const& h,
                                                 NormField2 const& nf,
                                                 GridDomain const& g,
                                                 SpotCheckOptions const& opts = {}) {
  VerificationReport rep;
  rep.check = "supersolution-spot-check";
  rep.tolerance = opts.c;
  SubdiffProbe const probe = DefaultProbe(g, opts.curvature);
  double worst = kInf;
  std::size_t tested = 0;
  for (std::size_t k : detail::FrameNodes(g, opts.frame, opts.stride,
                                          [&](std::size_t k) { return g.IsInterior(k); })) {
    Point2 const x = g.Coord(k);
    for (auto const& c : OneSidedCandidates(u, g, k)) {
      bool passed = false;
      try {
        passed = IsSubdifferential(u, g, k, c, probe);
      } catch (ProbeError const&) {
        continue;
      }
      if (!passed) continue;
      ++tested;
      double const r = u[k] + h(x, nf.DualNorm(x, c));
      worst = std::min(worst, r);
      if (r < -opts.c * g.h() && rep.witnesses.size() < opts.max_witnesses) {
        rep.witnesses.push_back({"node " + std::to_string(k), {u[k], nf.DualNorm(x, c), r}});
      }
    }
  }
  rep.Info("tested_candidates", static_cast<double>(tested));
  rep.RequireAtLeast("min_residual", tested ? worst : kInf, -opts.c * g.h());
  return rep;
}

struct VerifyStationaryOptions {
  double bound_slack = 1e-6;
  double frame = 0.1;
  int stencil_order = 16;
  //! Needed for radial Lipschitz rules: d(x0, .) at nodes.
  DistanceFrom const* distance_from_x0 = nullptr;
  SpotCheckOptions spot{};
  bool spot_check = true;
};

//! (a) lower - slack <= u <= upper + slack; (b) graph Lipschitz constant on
//! the frame interior against the expected rule times (1 + 5h); (c) the
//! subsolution spot check.
inline VerificationReport VerifyStationary(ScalarField const& u,
                                           StationaryHamiltonian const& h,
                                           double lower, double upper,
                                           LipschitzRule const& rule,
                                           NormField2 const& nf,
                                           GridDomain const& g,
                                           VerifyStationaryOptions const& opts = {}) {
  VerificationReport rep;
  rep.check = "stationary";
  rep.tolerance = opts.spot.c;
  double umin = kInf;
  double umax = -kInf;
  for (std::size_t k = 0; k < u.size(); ++k) {
    umin = std::min(umin, u[k]);
    umax = std::max(umax, u[k]);
  }
  rep.RequireAtLeast("min_u", umin, lower - opts.bound_slack);
  rep.Require("max_u", umax, upper + opts.bound_slack);

  double const factor = 1.0 + 5.0 * g.h();
  auto in_frame = [&](std::size_t k) { return g.InFrame(k, opts.frame); };
  if (!rule.radial) {
    std::pair<std::size_t, std::size_t> worst{0, 0};
    double const lip = GraphLipschitz(u, nf, g, opts.stencil_order, in_frame, &worst);
    rep.Require("lipschitz", lip, rule.constant * factor);
    if (lip > rule.constant * factor) {
      rep.witnesses.push_back({"pair (" + std::to_string(worst.first) + ", " +
                                   std::to_string(worst.second) + ")",
                               {u[worst.first], u[worst.second]}});
    }
  } else {
    if (opts.distance_from_x0 == nullptr) {
      throw InputError("radial Lipschitz rule needs d(x0, .)");
    }
    auto const& d = *opts.distance_from_x0;
    for (double r : rule.radii) {
      auto in_ball = [&](std::size_t k) {
        return in_frame(k) && d.AtNode(k) <= r / 4.0;
      };
      double const lip = GraphLipschitz(u, nf, g, opts.stencil_order, in_ball);
      std::ostringstream name;
      name << "lipschitz_R" << r;
      rep.Require(name.str(), lip, r * factor);
    }
  }
  if (opts.spot_check) {
    auto const spot = SubsolutionSpotCheck(u, h, nf, g, opts.spot);
    for (auto const& [k, v] : spot.measured) rep.measured["spot_" + k] = v;
    for (auto const& [k, v] : spot.bound) rep.bound["spot_" + k] = v;
    rep.pass = rep.pass && spot.pass;
    for (auto const& w : spot.witnesses) rep.witnesses.push_back(w);
  }
  return rep;
}

inline VerificationReport VerifyBuiltin(ScalarField const& u,
                                        BuiltinProblem const& p,
                                        NormField2 const& nf, GridDomain const& g,
                                        VerifyStationaryOptions const& opts = {}) {
  auto rep = VerifyStationary(u, p.hamiltonian, p.lower, p.upper, p.lipschitz,
                              nf, g, opts);
  rep.check = "stationary-" + ToString(p.id);
  return rep;
}

struct GapResult {
  double gap = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct StabilityOptions {
  double c = 5.0;
  double t_max = 10.0;
  int t_samples = 41;
};

//! gap = max(u1 - u2); bound = max sampled (H2 - H1); pass iff
//! gap <= bound + C h.
inline GapResult StabilityGap(StationaryHamiltonian const& h1,
                              StationaryHamiltonian const& h2,
                              ScalarField const& u1, ScalarField const& u2,
                              GridDomain const& g,
                              StabilityOptions const& opts = {}) {
  if (!u1.SameShape(u2) || u1.nx() != g.nx() || u1.ny() != g.ny()) {
    throw InputError("stability gap needs fields on the same grid");
  }
  GapResult r;
  r.gap = -kInf;
  for (std::size_t k = 0; k < u1.size(); ++k) r.gap = std::max(r.gap, u1[k] - u2[k]);
  r.bound = -kInf;
  for (std::size_t k = 0; k < g.size(); ++k) {
    Point2 const x = g.Coord(k);
    for (int q = 0; q < opts.t_samples; ++q) {
      double const t = opts.t_max * q / std::max(1, opts.t_samples - 1);
      r.bound = std::max(r.bound, h2(x, t) - h1(x, t));
    }
  }
  r.pass = r.gap <= r.bound + opts.c * g.h();
  return r;
}

//! Pointwise supremum of a family of discrete subsolutions, re-checked with
//! the subsolution spot check. On a grid the upper envelope of a finite
//! family is the pointwise maximum itself.
inline VerificationReport FamilySupDiagnostic(std::vector<ScalarField> const& fields,
                                              StationaryHamiltonian const& h,
                                              NormField2 const& nf,
                                              GridDomain const& g,
                                              SpotCheckOptions const& opts = {}) {
  if (fields.empty()) throw InputError("empty family");
  VerificationReport rep;
  rep.check = "family-sup";
  rep.tolerance = opts.c;
  std::size_t failing = 0;
  for (auto const& f : fields) {
    if (f.nx() != g.nx() || f.ny() != g.ny()) {
      throw InputError("family member on a different grid");
    }
    if (!SubsolutionSpotCheck(f, h, nf, g, opts).pass) ++failing;
  }
  rep.Require("failing_members", static_cast<double>(failing), 0.0);
  ScalarField sup = fields.front();
  for (auto const& f : fields) {
    for (std::size_t k = 0; k < sup.size(); ++k) sup[k] = std::max(sup[k], f[k]);
  }
  auto const spot = SubsolutionSpotCheck(sup, h, nf, g, opts);
  for (auto const& [k, v] : spot.measured) rep.measured["sup_" + k] = v;
  for (auto const& [k, v] : spot.bound) rep.bound["sup_" + k] = v;
  rep.pass = rep.pass && spot.pass;
  rep.witnesses = spot.witnesses;
  return rep;
}

}  // namespace finslerhj

#endif  // FINSLERHJ_STATIONARY_HPP_
