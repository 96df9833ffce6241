#ifndef FINSLERHJ_TESTS_FIXTURES_HPP_
#define FINSLERHJ_TESTS_FIXTURES_HPP_

#include <cmath>

#include "finslerhj/grid.hpp"
#include "finslerhj/norm_field.hpp"

namespace finslerhj::testing {

inline Box<2> Square(double lo, double hi) { return {{lo, lo}, {hi, hi}}; }

//! Unit disk inside [-1.1, 1.1]^2 with spacing 2.2 / (n - 1).
inline GridDomain Disk(std::size_t n) {
  return GridDomain::Masked(Square(-1.1, 1.1), n, n,
                            [](Point2 const& x) { return std::hypot(x[0], x[1]) < 1.0; });
}

inline GridDomain UnitSquare(std::size_t n) { return GridDomain::Rectangle(Square(0, 1), n, n); }

inline NormField2 Euclid(Box<2> b) { return NormField2::Euclidean(b); }

//! A(x) = diag(1 + x1^2, 1).
inline NormField2 StretchedX(Box<2> b) {
  return NormField2::Riemannian(b, [](Point2 const& x) {
    NormField2::Matrix a;
    a << 1.0 + x[0] * x[0], 0.0, 0.0, 1.0;
    return a;
  });
}

inline double BoxDistance(Point2 const& x) {
  return std::min({x[0], 1.0 - x[0], x[1], 1.0 - x[1]});
}

}  // namespace finslerhj::testing

#endif  // FINSLERHJ_TESTS_FIXTURES_HPP_
