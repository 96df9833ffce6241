#ifndef FINSLERHJ_EIKONAL_HPP_
#define FINSLERHJ_EIKONAL_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>
#include <vector>

#include "finslerhj/distance.hpp"
#include "finslerhj/grid.hpp"
#include "finslerhj/norm_field.hpp"
#include "finslerhj/report.hpp"
#include "finslerhj/subdiff.hpp"

namespace finslerhj {

//! Boundary values h(y) on the boundary nodes of a grid.
struct BoundaryData {
  std::vector<Seed> entries;

  static BoundaryData Constant(GridDomain const& g, double c) {
    BoundaryData b;
    for (std::size_t k : g.boundary_nodes()) b.entries.push_back({k, c});
    return b;
  }

  static BoundaryData FromFunction(GridDomain const& g,
                                   std::function<double(Point2 const&)> const& h) {
    BoundaryData b;
    for (std::size_t k : g.boundary_nodes()) b.entries.push_back({k, h(g.Coord(k))});
    return b;
  }

  //! Throws InputError unless every boundary node has exactly one value.
  void CheckCoverage(GridDomain const& g) const {
    std::vector<char> seen(g.size(), 0);
    for (auto const& e : entries) {
      if (e.node >= g.size() || !g.IsBoundary(e.node)) {
        throw InputError("boundary data given at a non-boundary node");
      }
      if (seen[e.node]) throw InputError("boundary node listed twice");
      seen[e.node] = 1;
    }
    for (std::size_t k : g.boundary_nodes()) {
      if (!seen[k]) throw InputError("boundary data misses a boundary node");
    }
  }
};

struct BoundaryLipschitzOptions {
  int stencil_order = 16;
  double tolerance = 1e-9;
  //! Boundary nodes used as Dijkstra sources (evenly strided).
  std::size_t max_sources = 64;
  std::size_t max_witnesses = 10;
};

//! |h(y) - h(z)| <= d(y, z) (1 + tol) for sampled boundary pairs, with d the
//! stencil-graph distance through the domain closure.
inline VerificationReport CheckBoundaryLipschitz(
    NormField2 const& nf, GridDomain const& g, BoundaryData const& h,
    BoundaryLipschitzOptions const& opts = {}) {
  VerificationReport rep;
  rep.check = "boundary-lipschitz";
  rep.tolerance = opts.tolerance;
  std::vector<double> value(g.size(), std::numeric_limits<double>::quiet_NaN());
  for (auto const& e : h.entries) value[e.node] = e.value;
  auto const& bnodes = g.boundary_nodes();
  std::size_t const n_src = std::min(opts.max_sources, bnodes.size());
  double const stride = static_cast<double>(bnodes.size()) / std::max<std::size_t>(1, n_src);
  DistanceOptions dopt;
  dopt.stencil_order = opts.stencil_order;
  double worst = 0.0;
  std::size_t violations = 0;
  for (std::size_t s = 0; s < n_src; ++s) {
    std::size_t const y = bnodes[static_cast<std::size_t>(s * stride)];
    auto const dy = DistanceFromNode(nf, g, y, dopt);
    for (std::size_t z : bnodes) {
      if (z == y) continue;
      double const d = dy.values[z];
      double const diff = std::abs(value[y] - value[z]);
      double const ratio = d > 0 ? diff / d : kInf;
      worst = std::max(worst, ratio);
      if (diff > d * (1.0 + opts.tolerance)) {
        ++violations;
        if (rep.witnesses.size() < opts.max_witnesses) {
          std::ostringstream ss;
          ss << "boundary pair (" << y << ", " << z << ")";
          rep.witnesses.push_back({ss.str(), {value[y], value[z], d}});
        }
      }
    }
  }
  rep.Info("max_slope", worst);
  rep.Require("violations", static_cast<double>(violations), 0.0);
  return rep;
}

struct EikonalOptions {
  int stencil_order = 16;
  //! Solve even when h is not 1-Lipschitz (violations kept in the result).
  bool waive_lipschitz = false;
};

struct EikonalSolution {
  //! u on the domain closure; NaN at outside nodes.
  ScalarField u;
  std::vector<std::size_t> unreachable;
  VerificationReport boundary_check;
};

//! u(x) = min over boundary nodes y of h(y) + d(y, x), one multi-source
//! Dijkstra seeded with (y, h(y)).
inline EikonalSolution SolveEikonal(NormField2 const& nf, GridDomain const& g,
                                    BoundaryData const& h,
                                    EikonalOptions const& opts = {}) {
  h.CheckCoverage(g);
  BoundaryLipschitzOptions bopt;
  bopt.stencil_order = opts.stencil_order;
  EikonalSolution sol;
  sol.boundary_check = CheckBoundaryLipschitz(nf, g, h, bopt);
  if (!sol.boundary_check.pass && !opts.waive_lipschitz) {
    std::ostringstream ss;
    ss << "boundary data is not 1-Lipschitz";
    if (!sol.boundary_check.witnesses.empty()) {
      auto const& w = sol.boundary_check.witnesses.front();
      ss << ": " << w.location << " values " << w.values[0] << ", "
         << w.values[1] << " at distance " << w.values[2];
    }
    throw InputError(ss.str());
  }
  DistanceOptions dopt;
  dopt.stencil_order = opts.stencil_order;
  auto df = ComputeDistanceField(nf, g, h.entries, dopt);
  sol.u = std::move(df.values);
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!g.IsActive(k)) sol.u[k] = std::numeric_limits<double>::quiet_NaN();
  }
  sol.unreachable = std::move(df.unreachable);
  return sol;
}

//! Nodes where the concave kink of u exceeds `threshold` in dual norm.
//! Per axis the kink is min(0, forward - backward) plus the larger same-axis
//! neighbour kink, so a ridge passing between two nodes is measured in full
//! rather than split between them. Only concave kinks count: a ridge of a min
//! of distances is concave, while the facets of the stencil metric give convex
//! kinks. Crossing unit gradients at right angles give sqrt(2); the staircase
//! boundary of a masked disk gives at most 1.23 up to 201x201. Nodes with a
//! non-interior axis neighbour are skipped.
inline std::vector<std::size_t> RidgeDiagnostic(ScalarField const& u,
                                                NormField2 const& nf,
                                                GridDomain const& g,
                                                double threshold = 1.3) {
  std::size_t const n = g.size();
  std::vector<double> kx(n, 0.0), ky(n, 0.0);
  std::vector<char> usable(n, 0);
  for (std::size_t k = 0; k < n; ++k) {
    if (!g.IsInterior(k)) continue;
    bool inner = true;
    g.ForAxisNeighbors(k, [&](std::size_t m) { inner = inner && g.IsInterior(m); });
    if (!inner) continue;
    auto const d = OneSidedDifferences(u, g, k);
    if (!d) continue;
    kx[k] = std::min(0.0, d->forward_x - d->backward_x);
    ky[k] = std::min(0.0, d->forward_y - d->backward_y);
    usable[k] = std::isfinite(kx[k]) && std::isfinite(ky[k]);
  }
  std::size_t const nx = g.nx();
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < n; ++k) {
    if (!usable[k]) continue;
    // neighbours of a usable node are interior, hence inside the frame
    Covector const kink{kx[k] + std::min(kx[k - 1], kx[k + 1]),
                        ky[k] + std::min(ky[k - nx], ky[k + nx])};
    if (nf.DualNorm(g.Coord(k), kink) > threshold) out.push_back(k);
  }
  return out;
}

struct VerifyEikonalOptions {
  double c = 5.0;
  int stencil_order = 16;
  //! Probe curvature bound; <= 0 means the median second difference
  //! (floored at 1) over the interior.
  double curvature = 0.0;
  double ridge_threshold = 1.3;
  std::size_t max_witnesses = 10;
};

//! Checks (a) u = h on the boundary, (b) 1-Lipschitz against the graph
//! metric within 1 + 5h, (c) recovered gradients have dual norm in
//! [1 - Ch, 1 + Ch], (d) no passing subdifferential candidate of dual norm
//! below 1 - Ch at ridge nodes.
inline VerificationReport VerifyEikonal(ScalarField const& u,
                                        NormField2 const& nf,
                                        GridDomain const& g,
                                        BoundaryData const& h,
                                        VerifyEikonalOptions const& opts = {}) {
  VerificationReport rep;
  rep.check = "eikonal";
  rep.tolerance = opts.c;
  double const hh = g.h();

  double boundary_err = 0.0;
  for (auto const& e : h.entries) {
    double err = std::abs(u[e.node] - e.value);
    if (std::isnan(err)) err = kInf;
    if (err > 0 && rep.witnesses.size() < opts.max_witnesses) {
      rep.witnesses.push_back({"boundary node " + std::to_string(e.node),
                               {u[e.node], e.value}});
    }
    boundary_err = std::max(boundary_err, err);
  }
  rep.Require("boundary_error", boundary_err, 0.0);

  std::pair<std::size_t, std::size_t> worst{0, 0};
  double const lip = GraphLipschitz(
      u, nf, g, opts.stencil_order, [&](std::size_t k) { return g.IsActive(k); },
      &worst);
  rep.Require("lipschitz", lip, 1.0 + 5.0 * hh);
  if (lip > 1.0 + 5.0 * hh) {
    rep.witnesses.push_back({"lipschitz pair (" + std::to_string(worst.first) +
                                 ", " + std::to_string(worst.second) + ")",
                             {u[worst.first], u[worst.second]}});
  }

  double const curv = opts.curvature > 0
                          ? opts.curvature
                          : CurvatureEstimate(u, g, g.interior_nodes());
  SubdiffProbe const probe = DefaultProbe(g, curv);
  rep.Info("probe_slack", probe.slack);

  double grad_dev = 0.0;
  std::size_t n_diff = 0;
  for (std::size_t k : g.interior_nodes()) {
    Differentiability dd;
    try {
      dd = DifferentiabilityCriterion(u, nf, g, k, probe);
    } catch (ProbeError const&) {
      continue;
    }
    if (!dd.differentiable) continue;
    ++n_diff;
    double const n = nf.DualNorm(g.Coord(k), *dd.gradient);
    double const dev = std::abs(n - 1.0);
    if (dev > grad_dev) {
      grad_dev = dev;
      if (dev > opts.c * hh && rep.witnesses.size() < opts.max_witnesses) {
        rep.witnesses.push_back({"gradient at node " + std::to_string(k), {n}});
      }
    }
  }
  rep.Info("differentiable_nodes", static_cast<double>(n_diff));
  rep.Require("gradient_norm_deviation", grad_dev, opts.c * hh);

  auto const ridge = RidgeDiagnostic(u, nf, g, opts.ridge_threshold);
  rep.Info("ridge_nodes", static_cast<double>(ridge.size()));
  double deficit = -kInf;
  for (std::size_t k : ridge) {
    for (auto const& c : OneSidedCandidates(u, g, k)) {
      bool passed = false;
      try {
        passed = IsSubdifferential(u, g, k, c, probe);
      } catch (ProbeError const&) {
        continue;
      }
      if (!passed) continue;
      double const n = nf.DualNorm(g.Coord(k), c);
      deficit = std::max(deficit, (1.0 - opts.c * hh) - n);
      if (n < 1.0 - opts.c * hh && rep.witnesses.size() < opts.max_witnesses) {
        rep.witnesses.push_back({"subdifferential at ridge node " + std::to_string(k), {n}});
      }
    }
  }
  // deficit <= 0 means every passing candidate has norm >= 1 - Ch.
  rep.Require("ridge_subdiff_deficit", std::max(deficit, -1.0), 0.0);
  return rep;
}

}  // namespace finslerhj

#endif  // FINSLERHJ_EIKONAL_HPP_
