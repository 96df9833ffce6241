#ifndef FINSLERHJ_EVOLUTION_HPP_
#define FINSLERHJ_EVOLUTION_HPP_

#include <algorithm>
#include <cmath>
#include <exception>
#include <random>
#include <sstream>
#include <thread>
#include <vector>

#include "finslerhj/distance.hpp"
#include "finslerhj/grid.hpp"
#include "finslerhj/hamiltonian.hpp"
#include "finslerhj/norm_field.hpp"
#include "finslerhj/report.hpp"
#include "finslerhj/upwind.hpp"

namespace finslerhj {

struct EvolutionOptions {
  double cfl = 0.4;
  //! Explicit time step; 0 picks the largest step the CFL factor allows.
  double dt = 0.0;
  std::size_t stride = 10;
  //! Store every step (overrides stride).
  bool full_history = false;
  unsigned threads = 1;
  //! Upper end of the m range sampled when estimating L_H; 0 means
  //! max(1, 2 * largest upwind magnitude of the initial data).
  double m_max = 0.0;
};

struct EvolutionSolution {
  double dt = 0.0;
  double horizon = 0.0;
  std::size_t steps = 0;
  std::size_t stride = 1;
  double cfl = 0.0;
  double nu = 0.0;
  double lipschitz_m = 0.0;
  std::vector<double> times;
  std::vector<ScalarField> snapshots;
  //! Field at the horizon (also the last snapshot when steps % stride == 0).
  ScalarField final_field;
};

//! nu = max sampled ratio between the dual norm and the euclidean norm of
//! covectors, over nodes and directions.
inline double DualAnisotropy(NormField2 const& nf, GridDomain const& g,
                             std::size_t directions = 64) {
  double nu = 0.0;
  std::size_t const stride = std::max<std::size_t>(1, g.size() / 2000);
  for (std::size_t k = 0; k < g.size(); k += stride) {
    Point2 const x = g.Coord(k);
    for (std::size_t q = 0; q < directions; ++q) {
      double const a = std::acos(-1.0) * (static_cast<double>(q) + 0.5) /
                       static_cast<double>(directions);
      nu = std::max(nu, nf.DualNormUnchecked(x, {std::cos(a), std::sin(a)}));
    }
    nu = std::max(nu, nf.DualNormUnchecked(x, {1.0, 0.0}));
    nu = std::max(nu, nf.DualNormUnchecked(x, {0.0, 1.0}));
  }
  return nu;
}

//! Largest sampled |H(t,x,m1) - H(t,x,m2)| / |m1 - m2| over t in [0,T],
//! grid nodes and m in [0, m_max].
inline double EstimateLipschitzM(EvolutionHamiltonian const& h,
                                 GridDomain const& g, double horizon,
                                 double m_max) {
  double lip = 0.0;
  std::size_t const stride = std::max<std::size_t>(1, g.size() / 400);
  int const nm = 64;
  for (std::size_t k = 0; k < g.size(); k += stride) {
    Point2 const x = g.Coord(k);
    for (int q = 0; q <= 4; ++q) {
      double const t = horizon * q / 4.0;
      double prev = h(t, x, 0.0);
      for (int r = 1; r <= nm; ++r) {
        double const m = m_max * r / nm;
        double const cur = h(t, x, m);
        lip = std::max(lip, std::abs(cur - prev) / (m_max / nm));
        prev = cur;
      }
    }
  }
  return lip;
}

namespace detail {

inline void CheckMonotoneInM(EvolutionHamiltonian const& h, GridDomain const& g,
                             double horizon, double m_max) {
  std::size_t const stride = std::max<std::size_t>(1, g.size() / 400);
  for (std::size_t k = 0; k < g.size(); k += stride) {
    Point2 const x = g.Coord(k);
    for (int q = 0; q <= 4; ++q) {
      double const t = horizon * q / 4.0;
      double prev = h(t, x, 0.0);
      for (int r = 1; r <= 64; ++r) {
        double const cur = h(t, x, m_max * r / 64.0);
        if (prev > cur + 1e-12) {
          throw InputError("H is not nondecreasing in m at " + ToString(x));
        }
        prev = cur;
      }
    }
  }
}

inline double MaxUpwind(NormField2 const& nf, GridDomain const& g,
                        std::vector<double> const& u) {
  double m = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    auto const st = MakeUpwind(g, u, k, [](std::size_t) { return true; });
    m = std::max(m, UpwindMagnitude(nf, g.Coord(k), st, u[k]));
  }
  return m;
}

}  // namespace detail

//! Explicit monotone scheme u^{n+1} = u^n - dt H(t_n, x, P(u^n)) on the
//! grid rectangle.
inline EvolutionSolution SolveEvolution(EvolutionHamiltonian const& h,
                                        NormField2 const& nf,
                                        GridDomain const& g,
                                        ScalarField const& initial,
                                        double horizon,
                                        EvolutionOptions const& opts = {}) {
  if (initial.nx() != g.nx() || initial.ny() != g.ny()) {
    throw InputError("initial data is not on the grid");
  }
  for (double v : initial.values()) {
    if (!std::isfinite(v)) throw InputError("initial data must be finite");
  }
  if (!(horizon >= 0.0) || !std::isfinite(horizon)) {
    throw InputError("horizon must be finite and non-negative");
  }
  if (!h.monotone_in_m) throw InputError("solver requires H nondecreasing in m");
  if (!(opts.cfl > 0.0 && opts.cfl <= 0.5)) {
    throw InputError("cfl factor must lie in (0, 0.5]");
  }
  if (opts.stride == 0) throw InputError("stride must be positive");

  EvolutionSolution sol;
  sol.horizon = horizon;
  sol.cfl = opts.cfl;
  sol.stride = opts.full_history ? 1 : opts.stride;
  sol.nu = DualAnisotropy(nf, g);
  double const m_max = opts.m_max > 0.0
                           ? opts.m_max
                           : std::max(1.0, 2.0 * detail::MaxUpwind(nf, g, initial.values()));
  detail::CheckMonotoneInM(h, g, horizon, m_max);
  sol.lipschitz_m = h.lipschitz_m > 0.0 ? h.lipschitz_m
                                        : EstimateLipschitzM(h, g, horizon, m_max);
  double const dt_max = sol.lipschitz_m > 0.0
                            ? opts.cfl * g.h() / (sol.lipschitz_m * sol.nu)
                            : kInf;
  if (opts.dt > 0.0 && opts.dt > dt_max * (1.0 + 1e-12)) {
    std::ostringstream ss;
    ss << "requested dt " << opts.dt << " exceeds the CFL limit " << dt_max;
    throw InputError(ss.str());
  }
  double const target = opts.dt > 0.0 ? opts.dt : dt_max;
  if (horizon == 0.0) {
    sol.steps = 0;
    sol.dt = 0.0;
  } else {
    sol.steps = std::isinf(target)
                    ? 1
                    : static_cast<std::size_t>(std::ceil(horizon / target - 1e-12));
    sol.steps = std::max<std::size_t>(sol.steps, 1);
    sol.dt = horizon / static_cast<double>(sol.steps);
  }

  std::vector<double> u = initial.values();
  std::vector<double> next(u.size());
  sol.times.push_back(0.0);
  sol.snapshots.push_back(initial);
  unsigned const nt = std::max(1u, opts.threads);
  long const ny = static_cast<long>(g.ny());
  long const nx = static_cast<long>(g.nx());
  for (std::size_t n = 0; n < sol.steps; ++n) {
    double const tn = sol.dt * static_cast<double>(n);
    std::vector<std::exception_ptr> errors(nt);
    auto work = [&](unsigned t) {
      try {
        for (long j = t; j < ny; j += nt) {
          for (long i = 0; i < nx; ++i) {
            auto const k = static_cast<std::size_t>(j * nx + i);
            Point2 const x = g.Coord(k);
            auto const st = MakeUpwind(g, u, k, [](std::size_t) { return true; });
            next[k] = u[k] - sol.dt * h(tn, x, UpwindMagnitude(nf, x, st, u[k]));
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
    u.swap(next);
    if ((n + 1) % sol.stride == 0) {
      sol.times.push_back(sol.dt * static_cast<double>(n + 1));
      sol.snapshots.emplace_back(g.nx(), g.ny(), u);
    }
  }
  sol.final_field = ScalarField(g.nx(), g.ny(), std::move(u));
  return sol;
}

//! x -> min{h(y) : d(x, y) <= t}, one truncated Dijkstra per node.
inline ScalarField HopfLaxOracle(NormField2 const& nf, GridDomain const& g,
                                 ScalarField const& h, double t,
                                 int stencil_order = 16) {
  if (g.size() > 10000) {
    throw BudgetError("Hopf-Lax oracle is limited to 10^4 nodes");
  }
  if (!(t >= 0.0)) throw InputError("time must be non-negative");
  ScalarField out(g.nx(), g.ny(), kInf);
  DistanceOptions opts;
  opts.stencil_order = stencil_order;
  opts.cutoff = t;
  double const eps = 1e-12 * (1.0 + t);
  for (std::size_t x = 0; x < g.size(); ++x) {
    if (t == 0.0) {
      out[x] = h[x];
      continue;
    }
    auto const df = DistanceFromNode(nf, g, x, opts);
    double best = kInf;
    for (std::size_t y = 0; y < g.size(); ++y) {
      if (df.values[y] <= t + eps) best = std::min(best, h[y]);
    }
    out[x] = best;
  }
  return out;
}

//! K0 = inf and K1 = sup of H over t in [0,T], grid nodes and m in [0, L].
inline std::pair<double, double> EnvelopeConstants(EvolutionHamiltonian const& h,
                                                   GridDomain const& g,
                                                   double horizon, double lip) {
  double k0 = kInf;
  double k1 = -kInf;
  for (std::size_t k = 0; k < g.size(); ++k) {
    Point2 const x = g.Coord(k);
    for (int q = 0; q <= 8; ++q) {
      double const t = horizon * q / 8.0;
      for (int r = 0; r <= 16; ++r) {
        double const v = h(t, x, lip * r / 16.0);
        k0 = std::min(k0, v);
        k1 = std::max(k1, v);
      }
    }
  }
  return {k0, k1};
}

struct EvolutionCheckOptions {
  double c = 5.0;
  double frame = 0.1;
  std::size_t max_witnesses = 10;
};

namespace detail {

inline double EvolutionSlackUnit(GridDomain const& g, double dt, double t) {
  return (g.h() + dt) * (1.0 + t);
}

}  // namespace detail

//! -K1 t + h <= u(t) <= -K0 t + h on the frame interior for every stored
//! time. Measured: the worst violation divided by (h + dt)(1 + t), i.e. the
//! smallest C that would make the band hold.
inline VerificationReport EnvelopeBoundsCheck(EvolutionSolution const& sol,
                                              double k0, double k1,
                                              ScalarField const& h,
                                              GridDomain const& g,
                                              EvolutionCheckOptions const& opts = {}) {
  VerificationReport rep;
  rep.check = "evolution-envelope";
  rep.tolerance = opts.c;
  double below = 0.0;
  double above = 0.0;
  auto visit = [&](ScalarField const& u, double t) {
    double const unit = detail::EvolutionSlackUnit(g, sol.dt, t);
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (!g.InFrame(k, opts.frame)) continue;
      double const lo = -k1 * t + h[k];
      double const hi = -k0 * t + h[k];
      double const b = (lo - u[k]) / unit;
      double const a = (u[k] - hi) / unit;
      if ((b > opts.c || a > opts.c) && rep.witnesses.size() < opts.max_witnesses) {
        rep.witnesses.push_back({"node " + std::to_string(k), {t, lo, u[k], hi}});
      }
      below = std::max(below, b);
      above = std::max(above, a);
    }
  };
  for (std::size_t s = 0; s < sol.snapshots.size(); ++s) {
    visit(sol.snapshots[s], sol.times[s]);
  }
  visit(sol.final_field, sol.horizon);
  rep.Info("k0", k0);
  rep.Info("k1", k1);
  rep.Info("dt", sol.dt);
  rep.Require("lower_violation_c", below, opts.c);
  rep.Require("upper_violation_c", above, opts.c);
  return rep;
}

struct ComparisonResult {
  double inf_gap = 0.0;
  double slack = 0.0;
  bool pass = false;
};

namespace detail {

inline void SameRun(EvolutionSolution const& u, EvolutionSolution const& v) {
  if (u.snapshots.size() != v.snapshots.size() || u.dt != v.dt ||
      u.steps != v.steps || u.final_field.nx() != v.final_field.nx() ||
      u.final_field.ny() != v.final_field.ny()) {
    throw InputError("evolution runs differ in grid or time stepping");
  }
}

template <typename F>
void ForEachStored(EvolutionSolution const& u, EvolutionSolution const& v, F&& f) {
  for (std::size_t s = 0; s < u.snapshots.size(); ++s) {
    f(u.snapshots[s], v.snapshots[s]);
  }
  f(u.final_field, v.final_field);
}

}  // namespace detail

//! inf over stored times and the frame interior of v - u; pass iff
//! >= -C (h + dt)(1 + T). Assumes, without certifying, that one of the two
//! runs is locally Lipschitz.
inline ComparisonResult ComparisonCheck(EvolutionSolution const& u,
                                        EvolutionSolution const& v,
                                        GridDomain const& g,
                                        EvolutionCheckOptions const& opts = {}) {
  detail::SameRun(u, v);
  ComparisonResult r;
  r.inf_gap = kInf;
  detail::ForEachStored(u, v, [&](ScalarField const& a, ScalarField const& b) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (g.InFrame(k, opts.frame)) r.inf_gap = std::min(r.inf_gap, b[k] - a[k]);
    }
  });
  r.slack = opts.c * detail::EvolutionSlackUnit(g, u.dt, u.horizon);
  r.pass = r.inf_gap >= -r.slack;
  return r;
}

struct MonotonicityResult {
  double gap = 0.0;
  double bound = 0.0;
  double slack = 0.0;
  bool pass = false;
};

//! u solves with (H2, h2), v with (H1, h1), H1 <= H2 and h2 <= h1:
//! sup(u - v) <= sup(H2 - H1) + sup(h2 - h1) up to C (h + dt)(1 + T).
inline MonotonicityResult MonotonicityGap(EvolutionSolution const& u,
                                          EvolutionSolution const& v,
                                          EvolutionHamiltonian const& h1,
                                          EvolutionHamiltonian const& h2,
                                          ScalarField const& init1,
                                          ScalarField const& init2,
                                          GridDomain const& g,
                                          double m_max = 10.0,
                                          EvolutionCheckOptions const& opts = {}) {
  detail::SameRun(u, v);
  if (!init1.SameShape(init2) || init1.nx() != g.nx() || init1.ny() != g.ny()) {
    throw InputError("initial data on different grids");
  }
  MonotonicityResult r;
  r.bound = -kInf;
  double sup_h = -kInf;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (init2[k] > init1[k]) {
      std::ostringstream ss;
      ss << "h2 <= h1 violated at node " << k << ": " << init2[k] << " > "
         << init1[k];
      throw InputError(ss.str());
    }
    sup_h = std::max(sup_h, init2[k] - init1[k]);
  }
  double sup_dh = -kInf;
  std::size_t const stride = std::max<std::size_t>(1, g.size() / 1000);
  for (std::size_t k = 0; k < g.size(); k += stride) {
    Point2 const x = g.Coord(k);
    for (int q = 0; q <= 8; ++q) {
      double const t = u.horizon * q / 8.0;
      for (int s = 0; s <= 32; ++s) {
        double const m = m_max * s / 32.0;
        double const d = h2(t, x, m) - h1(t, x, m);
        if (d < -1e-12) {
          std::ostringstream ss;
          ss << "H1 <= H2 violated at " << ToString(x) << ", t=" << t << ", m=" << m;
          throw InputError(ss.str());
        }
        sup_dh = std::max(sup_dh, d);
      }
    }
  }
  r.bound = sup_dh + sup_h;
  r.gap = -kInf;
  detail::ForEachStored(u, v, [&](ScalarField const& a, ScalarField const& b) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (g.InFrame(k, opts.frame)) r.gap = std::max(r.gap, a[k] - b[k]);
    }
  });
  r.slack = opts.c * detail::EvolutionSlackUnit(g, u.dt, u.horizon);
  r.pass = r.gap <= r.bound + r.slack;
  return r;
}

struct EvolutionSampler {
  std::size_t sources = 20;
  std::size_t budget = 100000;
  double t_max = 10.0;
  double m_max = 10.0;
  int stencil_order = 16;
  std::uint64_t seed = 0xe701;
  std::size_t max_witnesses = 10;
};

//! |H(t1,x1,r1) - H(t2,x2,r2)| <= omega(|t1-t2|, d, r1-r2)
//!   + C max(|r1|,|r2|)(|t1-t2| + d) on sampled tuples.
inline VerificationReport CheckConditionAEvolution(EvolutionHamiltonian const& h,
                                                   EvolutionCertificate const& cert,
                                                   NormField2 const& nf,
                                                   GridDomain const& g,
                                                   EvolutionSampler const& s = {}) {
  if (!cert.omega) throw InputError("condition (A) check needs a certificate");
  VerificationReport rep;
  rep.check = "condition-A-evolution";
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
  std::uniform_real_distribution<double> pick_m(0.0, s.m_max);
  std::size_t violations = 0;
  double worst = -kInf;
  for (std::size_t n = 0; n < s.budget; ++n) {
    std::size_t const q = pick_src(rng);
    std::size_t const x2 = pick_node(rng);
    double const t1 = pick_t(rng);
    double const t2 = (n % 3 == 0) ? t1 : pick_t(rng);
    double const r1 = pick_m(rng);
    double const r2 = (n % 3 == 1) ? r1 : pick_m(rng);
    double const d = dist[q][x2];
    if (!std::isfinite(d)) continue;
    Point2 const p1 = g.Coord(src[q]);
    Point2 const p2 = g.Coord(x2);
    double const dt = std::abs(t1 - t2);
    double const lhs = std::abs(h(t1, p1, r1) - h(t2, p2, r2));
    double const rhs = cert.omega(dt, d, r1 - r2) +
                       cert.c * std::max(std::abs(r1), std::abs(r2)) * (dt + d);
    worst = std::max(worst, lhs - rhs);
    if (lhs > rhs + 1e-9) {
      ++violations;
      if (rep.witnesses.size() < s.max_witnesses) {
        std::ostringstream ss;
        ss << "x1=" << ToString(p1) << " x2=" << ToString(p2);
        rep.witnesses.push_back({ss.str(), {t1, t2, r1, r2, lhs, rhs}});
      }
    }
  }
  rep.Info("max_excess", worst);
  rep.Info("samples", static_cast<double>(s.budget));
  rep.Require("violations", static_cast<double>(violations), 0.0);
  return rep;
}

}  // namespace finslerhj

#endif  // FINSLERHJ_EVOLUTION_HPP_
