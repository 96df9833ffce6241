#ifndef FINSLERHJ_TYPES_HPP_
#define FINSLERHJ_TYPES_HPP_

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace finslerhj {

template <std::size_t N>
using Point = std::array<double, N>;

template <std::size_t N>
using Vec = std::array<double, N>;

using Point2 = Point<2>;
using Vec2 = Vec<2>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

//! Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

//! A point lies outside the bounds of a field or grid.
class DomainError : public Error {
 public:
  using Error::Error;
};

//! Malformed or hypothesis-violating input.
class InputError : public Error {
 public:
  using Error::Error;
};

//! The metric is degenerate at a point (singular or indefinite matrix).
class MetricError : public Error {
 public:
  using Error::Error;
};

//! A probe neighbourhood leaves the domain, or is empty.
class ProbeError : public Error {
 public:
  using Error::Error;
};

//! A required ball does not fit inside the domain.
class GeometryError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class CoercivityError : public Error {
 public:
  using Error::Error;
};

//! Brute-force oracle asked to process a grid above its budget.
class BudgetError : public Error {
 public:
  using Error::Error;
};

template <std::size_t N>
double Dot(Vec<N> const& a, Vec<N> const& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) s += a[i] * b[i];
  return s;
}

template <std::size_t N>
double EuclideanNorm(Vec<N> const& v) {
  if constexpr (N == 2) {
    return std::hypot(v[0], v[1]);
  } else {
    return std::sqrt(Dot(v, v));
  }
}

template <std::size_t N>
Vec<N> operator+(Vec<N> a, Vec<N> const& b) {
  for (std::size_t i = 0; i < N; ++i) a[i] += b[i];
  return a;
}

template <std::size_t N>
Vec<N> operator-(Vec<N> a, Vec<N> const& b) {
  for (std::size_t i = 0; i < N; ++i) a[i] -= b[i];
  return a;
}

template <std::size_t N>
Vec<N> operator*(double s, Vec<N> a) {
  for (auto& x : a) x *= s;
  return a;
}

template <std::size_t N>
bool AllFinite(Vec<N> const& v) {
  for (double x : v) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

template <std::size_t N>
std::string ToString(std::array<double, N> const& a) {
  std::ostringstream ss;
  ss << "(";
  for (std::size_t i = 0; i < N; ++i) {
    ss << a[i];
    if (i + 1 != N) ss << ", ";
  }
  ss << ")";
  return ss.str();
}

//! Grid-sampled real function, row-major (index = j * nx + i).
class ScalarField {
 public:
  ScalarField() = default;
  ScalarField(std::size_t nx, std::size_t ny, double fill = 0.0)
      : nx_(nx), ny_(ny), values_(nx * ny, fill) {}
  ScalarField(std::size_t nx, std::size_t ny, std::vector<double> values)
      : nx_(nx), ny_(ny), values_(std::move(values)) {
    if (values_.size() != nx_ * ny_) {
      throw InputError("scalar field size mismatch");
    }
  }

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t size() const { return values_.size(); }

  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator()(std::size_t i, std::size_t j) { return values_[j * nx_ + i]; }
  double operator()(std::size_t i, std::size_t j) const {
    return values_[j * nx_ + i];
  }

  std::vector<double> const& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  bool SameShape(ScalarField const& o) const {
    return nx_ == o.nx_ && ny_ == o.ny_;
  }

  friend bool operator==(ScalarField const&, ScalarField const&) = default;

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::vector<double> values_;
};

}  // namespace finslerhj

#endif  // FINSLERHJ_TYPES_HPP_
