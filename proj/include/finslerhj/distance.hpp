#ifndef FINSLERHJ_DISTANCE_HPP_
#define FINSLERHJ_DISTANCE_HPP_

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <utility>
#include <vector>

#include "finslerhj/grid.hpp"
#include "finslerhj/norm_field.hpp"
#include "finslerhj/types.hpp"

namespace finslerhj {

struct Offset {
  int di;
  int dj;
};

//! Neighbour offsets of the 8-, 16- or 32-point stencil. Larger stencils are
//! supersets of smaller ones.
inline std::vector<Offset> StencilOffsets(int order) {
  if (order != 8 && order != 16 && order != 32) {
    throw InputError("stencil order must be 8, 16 or 32");
  }
  std::vector<Offset> out;
  auto add_sym = [&](int a, int b) {
    for (int sa : {1, -1}) {
      for (int sb : {1, -1}) {
        out.push_back({sa * a, sb * b});
        if (a != b) out.push_back({sb * b, sa * a});
      }
    }
  };
  out.push_back({1, 0});
  out.push_back({-1, 0});
  out.push_back({0, 1});
  out.push_back({0, -1});
  add_sym(1, 1);
  if (order >= 16) add_sym(1, 2);
  if (order >= 32) {
    add_sym(1, 3);
    add_sym(2, 3);
  }
  return out;
}

struct Seed {
  std::size_t node;
  double value;
};

struct DistanceOptions {
  int stencil_order = 16;
  QuadratureRule rule = QuadratureRule::kMidpoint;
  //! Nodes farther than this are left at +inf (and not reported unreachable).
  double cutoff = kInf;
};

struct DistanceField {
  std::vector<Seed> seeds;
  ScalarField values;
  int stencil_order = 16;
  //! Active nodes never reached (value +inf); empty when a cutoff was used.
  std::vector<std::size_t> unreachable;
};

namespace detail {

inline double EdgeWeight(NormField2 const& nf, GridDomain const& g,
                         std::size_t a, std::size_t b, QuadratureRule rule) {
  Point2 const p = g.Coord(a);
  Point2 const q = g.Coord(b);
  Vec2 const d = q - p;
  if (rule == QuadratureRule::kMidpoint) {
    return nf.NormUnchecked({0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])}, d);
  }
  return (nf.NormUnchecked(p, d) +
          4.0 * nf.NormUnchecked({0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])}, d) +
          nf.NormUnchecked(q, d)) /
         6.0;
}

}  // namespace detail

//! Multi-source Dijkstra over the stencil graph of active grid nodes. Seed
//! values are pinned; every other node gets min over seeds of
//! (seed value + graph distance). Ties pop in node-index order.
inline DistanceField ComputeDistanceField(NormField2 const& nf,
                                          GridDomain const& g,
                                          std::vector<Seed> seeds,
                                          DistanceOptions const& opts = {}) {
  if (seeds.empty()) throw InputError("distance field needs at least one seed");
  auto const offsets = StencilOffsets(opts.stencil_order);
  DistanceField out;
  out.stencil_order = opts.stencil_order;
  out.values = ScalarField(g.nx(), g.ny(), kInf);
  std::vector<char> pinned(g.size(), 0);
  std::vector<char> done(g.size(), 0);

  using Entry = std::pair<double, std::size_t>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
  for (auto const& s : seeds) {
    if (s.node >= g.size() || !g.IsActive(s.node)) {
      throw InputError("seed node outside the domain closure");
    }
    if (!std::isfinite(s.value)) throw InputError("non-finite seed value");
    if (pinned[s.node]) throw InputError("duplicate seed node");
    pinned[s.node] = 1;
    out.values[s.node] = s.value;
    pq.push({s.value, s.node});
  }

  auto const nx = static_cast<long>(g.nx());
  auto const ny = static_cast<long>(g.ny());
  while (!pq.empty()) {
    auto const [dist, k] = pq.top();
    pq.pop();
    if (done[k] || dist > out.values[k]) continue;
    done[k] = 1;
    if (dist > opts.cutoff) continue;
    long const i = static_cast<long>(g.I(k));
    long const j = static_cast<long>(g.J(k));
    for (auto const& o : offsets) {
      long const ni = i + o.di;
      long const nj = j + o.dj;
      if (ni < 0 || nj < 0 || ni >= nx || nj >= ny) continue;
      std::size_t const n = static_cast<std::size_t>(nj * nx + ni);
      if (!g.IsActive(n) || pinned[n] || done[n]) continue;
      double const cand = dist + detail::EdgeWeight(nf, g, k, n, opts.rule);
      if (cand < out.values[n]) {
        out.values[n] = cand;
        pq.push({cand, n});
      }
    }
  }
  if (std::isinf(opts.cutoff)) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (g.IsActive(k) && std::isinf(out.values[k])) out.unreachable.push_back(k);
    }
  } else {
    for (std::size_t k = 0; k < g.size(); ++k) {
      if (out.values[k] > opts.cutoff) out.values[k] = kInf;
    }
  }
  out.seeds = std::move(seeds);
  return out;
}

//! Distance field from a single node with value 0.
inline DistanceField DistanceFromNode(NormField2 const& nf, GridDomain const& g,
                                      std::size_t node,
                                      DistanceOptions const& opts = {}) {
  return ComputeDistanceField(nf, g, {{node, 0.0}}, opts);
}

//! All nodes with value <= r.
inline std::vector<std::size_t> MetricBall(DistanceField const& df, double r) {
  if (!(r >= 0.0)) throw InputError("ball radius must be non-negative");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < df.values.size(); ++k) {
    if (df.values[k] <= r) out.push_back(k);
  }
  return out;
}

//! Bilinear interpolation of a grid field at an arbitrary point of the box.
//! Exact at nodes; +inf propagates.
inline double Interpolate(GridDomain const& g, ScalarField const& f,
                          Point2 const& x) {
  double const fx = (x[0] - g.bounds().lo[0]) / g.hx();
  double const fy = (x[1] - g.bounds().lo[1]) / g.hy();
  if (fx < -1e-9 || fy < -1e-9 || fx > g.nx() - 1 + 1e-9 ||
      fy > g.ny() - 1 + 1e-9) {
    throw DomainError("interpolation point outside the grid: " + ToString(x));
  }
  double const cx = std::clamp(fx, 0.0, static_cast<double>(g.nx() - 1));
  double const cy = std::clamp(fy, 0.0, static_cast<double>(g.ny() - 1));
  auto i0 = static_cast<std::size_t>(std::floor(cx));
  auto j0 = static_cast<std::size_t>(std::floor(cy));
  i0 = std::min(i0, g.nx() - 2);
  j0 = std::min(j0, g.ny() - 2);
  double const tx = cx - static_cast<double>(i0);
  double const ty = cy - static_cast<double>(j0);
  if (tx == 0.0 && ty == 0.0) return f(i0, j0);
  if (tx == 1.0 && ty == 0.0) return f(i0 + 1, j0);
  if (tx == 0.0 && ty == 1.0) return f(i0, j0 + 1);
  if (tx == 1.0 && ty == 1.0) return f(i0 + 1, j0 + 1);
  return (1 - tx) * (1 - ty) * f(i0, j0) + tx * (1 - ty) * f(i0 + 1, j0) +
         (1 - tx) * ty * f(i0, j0 + 1) + tx * ty * f(i0 + 1, j0 + 1);
}

//! x -> d(x0, x) backed by a stencil-graph distance field from the node
//! nearest to x0. Cheap to copy.
class DistanceFrom {
 public:
  DistanceFrom(NormField2 const& nf, GridDomain const& g, Point2 const& x0,
               DistanceOptions const& opts = {})
      : grid_(std::make_shared<GridDomain const>(g)),
        source_(g.NearestNode(x0)),
        field_(std::make_shared<ScalarField const>(
            DistanceFromNode(nf, g, source_, opts).values)) {}

  double operator()(Point2 const& x) const {
    return Interpolate(*grid_, *field_, x);
  }
  double AtNode(std::size_t k) const { return (*field_)[k]; }
  std::size_t source() const { return source_; }
  ScalarField const& field() const { return *field_; }

 private:
  std::shared_ptr<GridDomain const> grid_;
  std::size_t source_;
  std::shared_ptr<ScalarField const> field_;
};

//! Lipschitz constant of u with respect to the stencil-graph metric: the
//! largest |u(a) - u(b)| / w(a, b) over stencil edges between nodes accepted
//! by `keep`. For a path metric this equals the global constant.
template <typename Keep>
double GraphLipschitz(ScalarField const& u, NormField2 const& nf,
                      GridDomain const& g, int stencil_order, Keep&& keep,
                      std::pair<std::size_t, std::size_t>* worst = nullptr) {
  auto const offsets = StencilOffsets(stencil_order);
  double best = 0.0;
  auto const nx = static_cast<long>(g.nx());
  auto const ny = static_cast<long>(g.ny());
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (!keep(k)) continue;
    long const i = static_cast<long>(g.I(k));
    long const j = static_cast<long>(g.J(k));
    for (auto const& o : offsets) {
      long const ni = i + o.di;
      long const nj = j + o.dj;
      if (ni < 0 || nj < 0 || ni >= nx || nj >= ny) continue;
      auto const n = static_cast<std::size_t>(nj * nx + ni);
      if (n < k || !keep(n)) continue;
      double const w = detail::EdgeWeight(nf, g, k, n, QuadratureRule::kMidpoint);
      double const slope = std::abs(u[k] - u[n]) / w;
      if (slope > best) {
        best = slope;
        if (worst) *worst = {k, n};
      }
    }
  }
  return best;
}

}  // namespace finslerhj

#endif  // FINSLERHJ_DISTANCE_HPP_
