#ifndef FINSLERHJ_UPWIND_HPP_
#define FINSLERHJ_UPWIND_HPP_

#include <algorithm>
#include <cmath>
#include <vector>

#include "finslerhj/grid.hpp"
#include "finslerhj/norm_field.hpp"
#include "finslerhj/types.hpp"

namespace finslerhj {

//! Upwind neighbour data at one node: per axis the smaller neighbour value
//! and the sign of the one-sided difference it produces.
struct UpwindStencil {
  double ax = kInf;
  double ay = kInf;
  double sx = 1.0;
  double sy = 1.0;
  double hx = 1.0;
  double hy = 1.0;

  //! Covector with components sign * max(v - a_i, 0) / h_i.
  Vec2 Covector(double v) const {
    double const gx = std::isinf(ax) ? 0.0 : std::max(v - ax, 0.0) / hx;
    double const gy = std::isinf(ay) ? 0.0 : std::max(v - ay, 0.0) / hy;
    return {sx * gx, sy * gy};
  }

  double MinNeighbor() const { return std::min(ax, ay); }
};

//! Neighbours taken from `u`; `use(k)` selects which nodes may serve as
//! neighbours (active nodes for masked domains, all for rectangles).
template <typename Use>
UpwindStencil MakeUpwind(GridDomain const& g, std::vector<double> const& u,
                         std::size_t k, Use&& use) {
  UpwindStencil s;
  s.hx = g.hx();
  s.hy = g.hy();
  std::size_t const i = g.I(k);
  std::size_t const j = g.J(k);
  // A minimum on the backward side means u increases along +e_i.
  if (i > 0 && use(k - 1)) {
    s.ax = u[k - 1];
    s.sx = 1.0;
  }
  if (i + 1 < g.nx() && use(k + 1) && u[k + 1] < s.ax) {
    s.ax = u[k + 1];
    s.sx = -1.0;
  }
  if (j > 0 && use(k - g.nx())) {
    s.ay = u[k - g.nx()];
    s.sy = 1.0;
  }
  if (j + 1 < g.ny() && use(k + g.nx()) && u[k + g.nx()] < s.ay) {
    s.ay = u[k + g.nx()];
    s.sy = -1.0;
  }
  return s;
}

//! P(v) = dual norm at x of the upwind covector.
inline double UpwindMagnitude(NormField2 const& nf, Point2 const& x,
                              UpwindStencil const& s, double v) {
  Vec2 const g = s.Covector(v);
  if (g[0] == 0.0 && g[1] == 0.0) return 0.0;
  return nf.DualNormUnchecked(x, g);
}

}  // namespace finslerhj

#endif  // FINSLERHJ_UPWIND_HPP_
