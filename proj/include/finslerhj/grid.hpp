#ifndef FINSLERHJ_GRID_HPP_
#define FINSLERHJ_GRID_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <queue>
#include <vector>

#include "finslerhj/norm_field.hpp"
#include "finslerhj/types.hpp"

namespace finslerhj {

enum class NodeRole : std::uint8_t { kOutside, kInterior, kBoundary };

//! Uniform Cartesian discretisation of a 2-D domain. Interior nodes carry the
//! open set; boundary nodes are the non-interior nodes axis-adjacent to an
//! interior node; the rest is outside. Grid edge nodes are never interior.
class GridDomain {
 public:
  using Predicate = std::function<bool(Point2 const&)>;

  //! Whole rectangle: interior = all non-edge nodes, boundary = edge ring.
  static GridDomain Rectangle(Box<2> bounds, std::size_t nx, std::size_t ny) {
    return GridDomain(bounds, nx, ny, [](Point2 const&) { return true; },
                      /*full=*/true);
  }

  //! Nodes where `inside` holds (and not on the rectangle edge) are interior.
  static GridDomain Masked(Box<2> bounds, std::size_t nx, std::size_t ny,
                           Predicate const& inside) {
    return GridDomain(bounds, nx, ny, inside);
  }

  //! Interior given explicitly per node (raster); row-major, size nx*ny.
  static GridDomain FromRaster(Box<2> bounds, std::size_t nx, std::size_t ny,
                               std::vector<bool> const& raster) {
    if (raster.size() != nx * ny) throw InputError("raster size mismatch");
    double const hx = (bounds.hi[0] - bounds.lo[0]) / static_cast<double>(nx - 1);
    double const hy = (bounds.hi[1] - bounds.lo[1]) / static_cast<double>(ny - 1);
    auto inside = [&](Point2 const& p) {
      auto const i = static_cast<std::size_t>(std::lround((p[0] - bounds.lo[0]) / hx));
      auto const j = static_cast<std::size_t>(std::lround((p[1] - bounds.lo[1]) / hy));
      return static_cast<bool>(raster[j * nx + i]);
    };
    return GridDomain(bounds, nx, ny, inside);
  }

  Box<2> const& bounds() const { return bounds_; }
  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return nx_ * ny_; }
  double hx() const { return hx_; }
  double hy() const { return hy_; }
  //! Smallest spacing; the "h" of all tolerances.
  double h() const { return std::min(hx_, hy_); }

  std::size_t Index(std::size_t i, std::size_t j) const { return j * nx_ + i; }
  std::size_t I(std::size_t k) const { return k % nx_; }
  std::size_t J(std::size_t k) const { return k / nx_; }

  Point2 Coord(std::size_t k) const {
    return {bounds_.lo[0] + hx_ * static_cast<double>(I(k)),
            bounds_.lo[1] + hy_ * static_cast<double>(J(k))};
  }

  //! Nearest node to x (clamped to the grid).
  std::size_t NearestNode(Point2 const& x) const {
    auto clampi = [](double v, std::size_t n) {
      long const r = std::lround(v);
      return static_cast<std::size_t>(
          std::clamp<long>(r, 0, static_cast<long>(n) - 1));
    };
    return Index(clampi((x[0] - bounds_.lo[0]) / hx_, nx_),
                 clampi((x[1] - bounds_.lo[1]) / hy_, ny_));
  }

  NodeRole Role(std::size_t k) const { return role_[k]; }
  bool IsInterior(std::size_t k) const { return role_[k] == NodeRole::kInterior; }
  bool IsBoundary(std::size_t k) const { return role_[k] == NodeRole::kBoundary; }
  //! Interior or boundary (the closure of the domain).
  bool IsActive(std::size_t k) const { return role_[k] != NodeRole::kOutside; }

  std::vector<std::size_t> const& boundary_nodes() const { return boundary_; }
  std::vector<std::size_t> const& interior_nodes() const { return interior_; }

  //! True when node k lies at least `frac` of the extent away from every
  //! rectangle edge (the verification frame).
  bool InFrame(std::size_t k, double frac) const {
    double const fx = frac * (bounds_.hi[0] - bounds_.lo[0]);
    double const fy = frac * (bounds_.hi[1] - bounds_.lo[1]);
    Point2 const p = Coord(k);
    double const eps = 1e-12;
    return p[0] >= bounds_.lo[0] + fx - eps && p[0] <= bounds_.hi[0] - fx + eps &&
           p[1] >= bounds_.lo[1] + fy - eps && p[1] <= bounds_.hi[1] - fy + eps;
  }

  bool IsFullRectangle() const { return full_; }

  //! Checks the structural invariants; throws GeometryError on violation.
  void Validate() const {
    for (std::size_t b : boundary_) {
      bool adjacent = full_;
      ForAxisNeighbors(b, [&](std::size_t n) { adjacent |= IsInterior(n); });
      if (!adjacent) throw GeometryError("boundary node without interior neighbour");
    }
    // Every interior node must reach the boundary through interior nodes.
    std::vector<char> seen(size(), 0);
    std::queue<std::size_t> q;
    for (std::size_t b : boundary_) {
      seen[b] = 1;
      q.push(b);
    }
    while (!q.empty()) {
      std::size_t const k = q.front();
      q.pop();
      ForAxisNeighbors(k, [&](std::size_t n) {
        if (!seen[n] && IsInterior(n)) {
          seen[n] = 1;
          q.push(n);
        }
      });
    }
    for (std::size_t k : interior_) {
      if (!seen[k]) throw GeometryError("interior node cannot reach the boundary");
    }
  }

  template <typename F>
  void ForAxisNeighbors(std::size_t k, F&& f) const {
    std::size_t const i = I(k);
    std::size_t const j = J(k);
    if (i > 0) f(k - 1);
    if (i + 1 < nx_) f(k + 1);
    if (j > 0) f(k - nx_);
    if (j + 1 < ny_) f(k + nx_);
  }

  ScalarField Sample(std::function<double(Point2 const&)> const& f) const {
    ScalarField out(nx_, ny_);
    for (std::size_t k = 0; k < size(); ++k) out[k] = f(Coord(k));
    return out;
  }

 private:
  GridDomain(Box<2> bounds, std::size_t nx, std::size_t ny,
             Predicate const& inside, bool full = false)
      : bounds_(bounds), nx_(nx), ny_(ny), full_(full) {
    if (nx < 3 || ny < 3) throw InputError("grid needs at least 3 nodes per axis");
    if (!(bounds.hi[0] > bounds.lo[0]) || !(bounds.hi[1] > bounds.lo[1])) {
      throw InputError("empty grid bounds");
    }
    hx_ = (bounds.hi[0] - bounds.lo[0]) / static_cast<double>(nx - 1);
    hy_ = (bounds.hi[1] - bounds.lo[1]) / static_cast<double>(ny - 1);
    role_.assign(size(), NodeRole::kOutside);
    for (std::size_t k = 0; k < size(); ++k) {
      std::size_t const i = I(k);
      std::size_t const j = J(k);
      bool const edge = i == 0 || j == 0 || i + 1 == nx || j + 1 == ny;
      if (!edge && inside(Coord(k))) role_[k] = NodeRole::kInterior;
    }
    Classify();
  }

  void Classify() {
    boundary_.clear();
    interior_.clear();
    for (std::size_t k = 0; k < size(); ++k) {
      if (role_[k] == NodeRole::kInterior) {
        interior_.push_back(k);
        continue;
      }
      role_[k] = NodeRole::kOutside;
      bool adjacent = false;
      ForAxisNeighbors(k, [&](std::size_t n) {
        adjacent |= role_[n] == NodeRole::kInterior;
      });
      // The rectangle corners touch the interior only diagonally.
      if (adjacent || full_) {
        role_[k] = NodeRole::kBoundary;
        boundary_.push_back(k);
      }
    }
    if (interior_.empty()) throw GeometryError("domain has no interior nodes");
  }

  Box<2> bounds_;
  std::size_t nx_;
  std::size_t ny_;
  bool full_ = false;
  double hx_ = 0.0;
  double hy_ = 0.0;
  std::vector<NodeRole> role_;
  std::vector<std::size_t> boundary_;
  std::vector<std::size_t> interior_;
};

}  // namespace finslerhj

#endif  // FINSLERHJ_GRID_HPP_
