#ifndef FINSLERHJ_SUBDIFF_HPP_
#define FINSLERHJ_SUBDIFF_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "finslerhj/distance.hpp"
#include "finslerhj/grid.hpp"
#include "finslerhj/norm_field.hpp"
#include "finslerhj/report.hpp"
#include "finslerhj/types.hpp"

namespace finslerhj {

using Covector = Vec2;

//! Finite-radius, finite-slack version of the first-order lim inf condition:
//! Delta passes at x when f(y) >= f(x) + Delta(y-x) - slack*|y-x| for every
//! node y with |y-x| <= radius.
struct SubdiffProbe {
  double radius = 0.0;
  double slack = 0.0;
  //! 0 = every node of the ball.
  std::size_t sample_count = 0;

  void Validate(GridDomain const& g) const {
    if (!(radius >= 2.0 * g.h() * (1.0 - 1e-12))) {
      throw InputError("probe radius must cover two grid shells");
    }
    if (!(slack > 0.0)) throw InputError("probe slack must be positive");
  }
};

//! radius 4h, slack 10 * h * curvature.
inline SubdiffProbe DefaultProbe(GridDomain const& g, double curvature = 1.0) {
  return {4.0 * g.h(), 10.0 * g.h() * curvature, 0};
}

namespace detail {

inline std::vector<std::size_t> ProbeBall(GridDomain const& g, std::size_t x,
                                          SubdiffProbe const& probe) {
  if (x >= g.size() || !g.IsInterior(x)) {
    throw ProbeError("probe centre must be an interior node");
  }
  long const ri = static_cast<long>(std::floor(probe.radius / g.hx() + 1e-9));
  long const rj = static_cast<long>(std::floor(probe.radius / g.hy() + 1e-9));
  long const ci = static_cast<long>(g.I(x));
  long const cj = static_cast<long>(g.J(x));
  Point2 const px = g.Coord(x);
  std::vector<std::size_t> out;
  for (long dj = -rj; dj <= rj; ++dj) {
    for (long di = -ri; di <= ri; ++di) {
      if (di == 0 && dj == 0) continue;
      double const dist = std::hypot(di * g.hx(), dj * g.hy());
      if (dist > probe.radius * (1.0 + 1e-12)) continue;
      long const i = ci + di;
      long const j = cj + dj;
      if (i < 0 || j < 0 || i >= static_cast<long>(g.nx()) ||
          j >= static_cast<long>(g.ny())) {
        throw ProbeError("probe ball exits the grid at " + ToString(px));
      }
      std::size_t const k = g.Index(static_cast<std::size_t>(i),
                                    static_cast<std::size_t>(j));
      if (!g.IsActive(k)) {
        throw ProbeError("probe ball exits the domain at " + ToString(px));
      }
      out.push_back(k);
    }
  }
  if (probe.sample_count > 0 && out.size() > probe.sample_count) {
    // Evenly strided deterministic subsample.
    std::vector<std::size_t> sub;
    double const stride = static_cast<double>(out.size()) / probe.sample_count;
    for (std::size_t s = 0; s < probe.sample_count; ++s) {
      sub.push_back(out[static_cast<std::size_t>(s * stride)]);
    }
    out = std::move(sub);
  }
  return out;
}

// Signed first-order defect f(y) - f(x) - Delta(y - x) and |y - x|.
template <typename F>
bool ForAllDefects(ScalarField const& f, GridDomain const& g, std::size_t x,
                   Covector const& delta, SubdiffProbe const& probe, F&& ok) {
  Point2 const px = g.Coord(x);
  for (std::size_t y : ProbeBall(g, x, probe)) {
    Point2 const py = g.Coord(y);
    double const dx = py[0] - px[0];
    double const dy = py[1] - px[1];
    double const lin = delta[0] * dx + delta[1] * dy;
    double const defect = f[y] - f[x] - lin;
    if (!ok(defect, std::hypot(dx, dy))) return false;
  }
  return true;
}

}  // namespace detail

//! Delta in the discrete subdifferential of f at node x.
inline bool IsSubdifferential(ScalarField const& f, GridDomain const& g,
                              std::size_t x, Covector const& delta,
                              SubdiffProbe const& probe) {
  probe.Validate(g);
  return detail::ForAllDefects(f, g, x, delta, probe, [&](double d, double r) {
    return d >= -probe.slack * r;
  });
}

//! Mirror image: f(y) <= f(x) + Delta(y-x) + slack*|y-x|.
inline bool IsSuperdifferential(ScalarField const& f, GridDomain const& g,
                                std::size_t x, Covector const& delta,
                                SubdiffProbe const& probe) {
  probe.Validate(g);
  return detail::ForAllDefects(f, g, x, delta, probe, [&](double d, double r) {
    return d <= probe.slack * r;
  });
}

struct OneSided {
  double forward_x, backward_x, forward_y, backward_y;
};

//! One-sided axis differences at x; requires all four axis neighbours.
inline std::optional<OneSided> OneSidedDifferences(ScalarField const& f,
                                                   GridDomain const& g,
                                                   std::size_t x) {
  std::size_t const i = g.I(x);
  std::size_t const j = g.J(x);
  if (i == 0 || j == 0 || i + 1 >= g.nx() || j + 1 >= g.ny()) return std::nullopt;
  std::size_t const e = x + 1, w = x - 1, n = x + g.nx(), s = x - g.nx();
  if (!g.IsActive(e) || !g.IsActive(w) || !g.IsActive(n) || !g.IsActive(s)) {
    return std::nullopt;
  }
  return OneSided{(f[e] - f[x]) / g.hx(), (f[x] - f[w]) / g.hx(),
                  (f[n] - f[x]) / g.hy(), (f[x] - f[s]) / g.hy()};
}

//! The four one-sided difference combinations (forward/backward per axis).
inline std::vector<Covector> OneSidedCandidates(ScalarField const& f,
                                                GridDomain const& g,
                                                std::size_t x) {
  auto const d = OneSidedDifferences(f, g, x);
  if (!d) return {};
  return {{d->forward_x, d->forward_y},
          {d->forward_x, d->backward_y},
          {d->backward_x, d->forward_y},
          {d->backward_x, d->backward_y}};
}

//! Central, forward and backward per axis: nine candidates, central first.
inline std::vector<Covector> DifferenceCandidates(ScalarField const& f,
                                                  GridDomain const& g,
                                                  std::size_t x) {
  auto const d = OneSidedDifferences(f, g, x);
  if (!d) return {};
  double const cx = 0.5 * (d->forward_x + d->backward_x);
  double const cy = 0.5 * (d->forward_y + d->backward_y);
  std::vector<Covector> out;
  for (double gx : {cx, d->forward_x, d->backward_x}) {
    for (double gy : {cy, d->forward_y, d->backward_y}) out.push_back({gx, gy});
  }
  return out;
}

//! Median |second difference| over the given nodes, floored at `floor`.
inline double CurvatureEstimate(ScalarField const& f, GridDomain const& g,
                                std::vector<std::size_t> const& nodes,
                                double floor = 1.0) {
  std::vector<double> s;
  for (std::size_t k : nodes) {
    auto const d = OneSidedDifferences(f, g, k);
    if (!d) continue;
    s.push_back(std::abs(d->forward_x - d->backward_x) / g.hx());
    s.push_back(std::abs(d->forward_y - d->backward_y) / g.hy());
  }
  if (s.empty()) return floor;
  auto mid = s.begin() + static_cast<long>(s.size() / 2);
  std::nth_element(s.begin(), mid, s.end());
  return std::max(floor, *mid);
}

//! max over y with 0 < d(x,y) <= radius of |f(y) - f(x)| / d(x,y), where
//! `from_x` is a single-seed distance field rooted at x.
inline double LocalLipschitz(ScalarField const& f, DistanceField const& from_x,
                             double radius) {
  if (from_x.seeds.size() != 1) {
    throw InputError("local Lipschitz needs a single-seed distance field");
  }
  std::size_t const x = from_x.seeds.front().node;
  double const base = from_x.seeds.front().value;
  double best = 0.0;
  bool any = false;
  for (std::size_t y = 0; y < f.size(); ++y) {
    double const d = from_x.values[y] - base;
    if (y == x || !(d > 0.0) || d > radius) continue;
    any = true;
    best = std::max(best, std::abs(f[y] - f[x]) / d);
  }
  if (!any) throw ProbeError("empty Lipschitz neighbourhood");
  return best;
}

struct LipschitzReport {
  std::string region;
  double k_bound = 0.0;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  //! Node pairs whose slope exceeds k_bound * (1 + tolerance).
  std::vector<std::pair<std::size_t, std::size_t>> witnesses;
  std::vector<double> witness_slopes;
};

inline nlohmann::json ToJson(LipschitzReport const& r) {
  nlohmann::json w = nlohmann::json::array();
  for (std::size_t k = 0; k < r.witnesses.size(); ++k) {
    w.push_back({{"pair", {r.witnesses[k].first, r.witnesses[k].second}},
                 {"slope", r.witness_slopes[k]}});
  }
  return {{"check", "deville"},     {"region", r.region},
          {"k_bound", r.k_bound},   {"measured", r.measured},
          {"tolerance", r.tolerance}, {"pass", r.pass},
          {"witnesses", w}};
}

struct DevilleOptions {
  int stencil_order = 16;
  //! Subdifferential probe; radius/slack default from the grid and the
  //! region's median curvature when left at zero.
  SubdiffProbe probe{};
  std::size_t max_witnesses = 10;
};

//! Executable local mean value inequality: bound K by the dual norms of all
//! passing one-sided subdifferential candidates over B(p, 4 delta), then
//! measure the Lipschitz constant of f over node pairs of B(p, delta).
inline LipschitzReport DevilleCheck(ScalarField const& f, NormField2 const& nf,
                                    GridDomain const& g, std::size_t p,
                                    double delta,
                                    DevilleOptions const& opts = {}) {
  if (!(delta > 0.0)) throw InputError("delta must be positive");
  DistanceOptions dopt;
  dopt.stencil_order = opts.stencil_order;
  auto const from_p = DistanceFromNode(nf, g, p, dopt);
  std::vector<std::size_t> outer, inner;
  for (std::size_t k = 0; k < g.size(); ++k) {
    double const d = from_p.values[k];
    if (d <= 4.0 * delta) {
      if (!g.IsInterior(k)) {
        throw GeometryError("B(p, 4 delta) exits the domain");
      }
      outer.push_back(k);
      if (d <= delta) inner.push_back(k);
    }
  }
  // The 4-delta ball must not touch the grid edge either.
  for (std::size_t k : outer) {
    if (!OneSidedDifferences(f, g, k)) {
      throw GeometryError("B(p, 4 delta) touches the grid edge");
    }
  }

  SubdiffProbe probe = opts.probe;
  if (probe.radius == 0.0) probe.radius = 4.0 * g.h();
  if (probe.slack == 0.0) {
    probe.slack = 10.0 * g.h() * CurvatureEstimate(f, g, outer);
  }
  probe.Validate(g);

  LipschitzReport rep;
  {
    std::ostringstream ss;
    ss << "B(node " << p << " " << ToString(g.Coord(p)) << ", " << delta << ")";
    rep.region = ss.str();
  }
  rep.tolerance = 5.0 * g.h() / delta;

  double k_bound = 0.0;
  for (std::size_t x : outer) {
    for (auto const& c : OneSidedCandidates(f, g, x)) {
      bool passed = false;
      try {
        passed = IsSubdifferential(f, g, x, c, probe);
      } catch (ProbeError const&) {
        passed = false;
      }
      if (passed) k_bound = std::max(k_bound, nf.DualNorm(g.Coord(x), c));
    }
  }
  rep.k_bound = k_bound;

  struct Pair {
    double slope;
    std::size_t a, b;
  };
  std::vector<Pair> pairs;
  double measured = 0.0;
  std::vector<char> in_inner(g.size(), 0);
  for (std::size_t k : inner) in_inner[k] = 1;
  DistanceOptions cut = dopt;
  cut.cutoff = 2.0 * delta * (1.0 + 1e-9) + g.h();
  double const limit = k_bound * (1.0 + rep.tolerance);
  for (std::size_t a : inner) {
    auto const from_a = DistanceFromNode(nf, g, a, cut);
    for (std::size_t b : inner) {
      if (b <= a) continue;
      double const d = from_a.values[b];
      if (!(d > 0.0) || std::isinf(d)) continue;
      double const slope = std::abs(f[a] - f[b]) / d;
      measured = std::max(measured, slope);
      if (slope > limit) pairs.push_back({slope, a, b});
    }
  }
  rep.measured = measured;
  rep.pass = measured <= limit;
  std::sort(pairs.begin(), pairs.end(), [](Pair const& l, Pair const& r) {
    if (l.slope != r.slope) return l.slope > r.slope;
    return std::tie(l.a, l.b) < std::tie(r.a, r.b);
  });
  for (std::size_t k = 0; k < pairs.size() && k < opts.max_witnesses; ++k) {
    rep.witnesses.push_back({pairs[k].a, pairs[k].b});
    rep.witness_slopes.push_back(pairs[k].slope);
  }
  return rep;
}

struct Differentiability {
  bool differentiable = false;
  std::optional<Covector> gradient;
  //! Largest dual-norm distance between any two candidates passing both
  //! probes (0 when at most one passes).
  double spread = 0.0;
};

//! f is differentiable at x iff some candidate covector passes both the sub-
//! and the superdifferential probe; that candidate is the gradient.
inline Differentiability DifferentiabilityCriterion(ScalarField const& f,
                                                    NormField2 const& nf,
                                                    GridDomain const& g,
                                                    std::size_t x,
                                                    SubdiffProbe const& probe) {
  Differentiability out;
  std::vector<Covector> passing;
  for (auto const& c : DifferenceCandidates(f, g, x)) {
    if (IsSubdifferential(f, g, x, c, probe) &&
        IsSuperdifferential(f, g, x, c, probe)) {
      passing.push_back(c);
    }
  }
  if (passing.empty()) return out;
  out.differentiable = true;
  out.gradient = passing.front();
  Point2 const px = g.Coord(x);
  for (std::size_t a = 0; a < passing.size(); ++a) {
    for (std::size_t b = a + 1; b < passing.size(); ++b) {
      out.spread =
          std::max(out.spread, nf.DualNorm(px, passing[a] - passing[b]));
    }
  }
  return out;
}

}  // namespace finslerhj

#endif  // FINSLERHJ_SUBDIFF_HPP_
