#ifndef FINSLERHJ_NORM_FIELD_HPP_
#define FINSLERHJ_NORM_FIELD_HPP_

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "finslerhj/types.hpp"

namespace finslerhj {

//! Axis-aligned box [lo_1,hi_1] x ... x [lo_n,hi_n].
template <std::size_t N>
struct Box {
  Point<N> lo{};
  Point<N> hi{};

  bool Contains(Point<N> const& x) const {
    for (std::size_t i = 0; i < N; ++i) {
      double const slack = 1e-9 * std::max(1.0, hi[i] - lo[i]);
      if (!(x[i] >= lo[i] - slack && x[i] <= hi[i] + slack)) return false;
    }
    return true;
  }
};

enum class NormKind { kEuclidean, kRiemannian, kWeightedP, kScaled, kCustom };

inline std::string ToString(NormKind k) {
  switch (k) {
    case NormKind::kEuclidean: return "euclidean";
    case NormKind::kRiemannian: return "riemannian";
    case NormKind::kWeightedP: return "weighted-p";
    case NormKind::kScaled: return "scaled";
    case NormKind::kCustom: return "custom";
  }
  return "unknown";
}

//! A point-dependent norm x -> ||.||_x on a box (a Finsler structure in a
//! single identity chart). Immutable; copies share the underlying callables.
template <std::size_t N>
class NormField {
 public:
  using Matrix = Eigen::Matrix<double, static_cast<int>(N), static_cast<int>(N)>;
  using MatrixFn = std::function<Matrix(Point<N> const&)>;
  using WeightFn = std::function<Vec<N>(Point<N> const&)>;
  using ScalarFn = std::function<double(Point<N> const&)>;
  using NormFn = std::function<double(Point<N> const&, Vec<N> const&)>;

  static NormField Euclidean(Box<N> box) {
    return NormField(box, EuclideanKind{});
  }

  static NormField Riemannian(Box<N> box, MatrixFn a) {
    return NormField(box, RiemannianKind{std::move(a)});
  }

  //! ||v||_x = (sum (w_i(x) |v_i|)^p)^(1/p); p = +inf gives max w_i |v_i|.
  static NormField WeightedP(Box<N> box, double p, WeightFn w) {
    if (!(p >= 1.0)) throw InputError("weighted-p exponent must be >= 1");
    return NormField(box, WeightedPKind{p, std::move(w)});
  }

  //! ||v||_x = c(x) * base||v||_x with c > 0.
  static NormField Scaled(NormField base, ScalarFn c) {
    Box<N> box = base.box_;
    return NormField(box, ScaledKind{std::make_shared<NormField const>(
                                         std::move(base)),
                                     std::move(c)});
  }

  //! Arbitrary norm evaluator; the dual norm goes through the generic search.
  static NormField Custom(Box<N> box, NormFn f) {
    return NormField(box, CustomKind{std::move(f)});
  }

  Box<N> const& box() const { return box_; }

  NormKind kind() const {
    return static_cast<NormKind>(kind_.index());
  }

  //! ||v||_x.
  double Norm(Point<N> const& x, Vec<N> const& v) const {
    CheckPoint(x);
    if (!AllFinite(v)) throw InputError("non-finite vector " + ToString(v));
    return NormUnchecked(x, v);
  }

  //! ||delta||_x^* = sup { delta(v) : ||v||_x <= 1 }.
  double DualNorm(Point<N> const& x, Vec<N> const& delta) const {
    CheckPoint(x);
    if (!AllFinite(delta)) {
      throw InputError("non-finite covector " + ToString(delta));
    }
    return DualNormUnchecked(x, delta);
  }

  //! Dual norm by direct maximisation of delta(u)/||u||_x over directions,
  //! regardless of kind. Shared with Custom fields; exposed for cross-checks.
  double DualNormBySearch(Point<N> const& x, Vec<N> const& delta) const {
    CheckPoint(x);
    return SearchDual(x, delta);
  }

  double NormUnchecked(Point<N> const& x, Vec<N> const& v) const {
    return std::visit([&](auto const& k) { return k.Norm(x, v); }, kind_);
  }

  double DualNormUnchecked(Point<N> const& x, Vec<N> const& delta) const {
    if (auto const* c = std::get_if<CustomKind>(&kind_)) {
      (void)c;
      return SearchDual(x, delta);
    }
    return std::visit([&](auto const& k) { return k.Dual(x, delta); }, kind_);
  }

 private:
  struct EuclideanKind {
    double Norm(Point<N> const&, Vec<N> const& v) const {
      return EuclideanNorm(v);
    }
    double Dual(Point<N> const&, Vec<N> const& d) const {
      return EuclideanNorm(d);
    }
  };

  struct RiemannianKind {
    MatrixFn a;
    double Norm(Point<N> const& x, Vec<N> const& v) const {
      Matrix const m = a(x);
      Eigen::Map<Eigen::Matrix<double, static_cast<int>(N), 1> const> vv(
          v.data());
      double const q = vv.dot(m * vv);
      if (q < 0.0) {
        throw MetricError("metric matrix not positive definite at " +
                          ToString(x));
      }
      return std::sqrt(q);
    }
    double Dual(Point<N> const& x, Vec<N> const& d) const {
      Matrix const m = a(x);
      Eigen::LLT<Matrix> llt(m);
      if (llt.info() != Eigen::Success) {
        throw MetricError("singular metric matrix at " + ToString(x));
      }
      Eigen::Map<Eigen::Matrix<double, static_cast<int>(N), 1> const> dd(
          d.data());
      // d^T A^{-1} d = |L^{-1} d|^2
      Eigen::Matrix<double, static_cast<int>(N), 1> const y = llt.matrixL().solve(dd);
      return y.norm();
    }
  };

  struct WeightedPKind {
    double p;
    WeightFn w;
    double Norm(Point<N> const& x, Vec<N> const& v) const {
      Vec<N> const wx = w(x);
      Vec<N> s{};
      for (std::size_t i = 0; i < N; ++i) {
        if (!(wx[i] > 0.0)) throw MetricError("non-positive weight");
        s[i] = wx[i] * std::abs(v[i]);
      }
      return PNorm(s, p);
    }
    double Dual(Point<N> const& x, Vec<N> const& d) const {
      Vec<N> const wx = w(x);
      Vec<N> s{};
      for (std::size_t i = 0; i < N; ++i) {
        if (!(wx[i] > 0.0)) throw MetricError("non-positive weight");
        s[i] = std::abs(d[i]) / wx[i];
      }
      return PNorm(s, Conjugate(p));
    }
  };

  struct ScaledKind {
    std::shared_ptr<NormField const> base;
    ScalarFn c;
    double Factor(Point<N> const& x) const {
      double const cx = c(x);
      if (!(cx > 0.0)) throw MetricError("non-positive scale factor");
      return cx;
    }
    double Norm(Point<N> const& x, Vec<N> const& v) const {
      return Factor(x) * base->NormUnchecked(x, v);
    }
    double Dual(Point<N> const& x, Vec<N> const& d) const {
      return base->DualNormUnchecked(x, d) / Factor(x);
    }
  };

  struct CustomKind {
    NormFn f;
    double Norm(Point<N> const& x, Vec<N> const& v) const { return f(x, v); }
    double Dual(Point<N> const&, Vec<N> const&) const { return kInf; }
  };

  // Order must follow NormKind.
  using KindVariant = std::variant<EuclideanKind, RiemannianKind, WeightedPKind,
                                   ScaledKind, CustomKind>;

  NormField(Box<N> box, KindVariant kind) : box_(box), kind_(std::move(kind)) {}

  static double Conjugate(double p) {
    if (p == 1.0) return kInf;
    if (std::isinf(p)) return 1.0;
    return p / (p - 1.0);
  }

  static double PNorm(Vec<N> const& s, double p) {
    if (std::isinf(p)) return *std::max_element(s.begin(), s.end());
    if (p == 1.0) {
      double t = 0.0;
      for (double x : s) t += x;
      return t;
    }
    if (p == 2.0) return EuclideanNorm(s);
    double const m = *std::max_element(s.begin(), s.end());
    if (m == 0.0) return 0.0;
    double t = 0.0;
    for (double x : s) t += std::pow(x / m, p);
    return m * std::pow(t, 1.0 / p);
  }

  void CheckPoint(Point<N> const& x) const {
    if (!box_.Contains(x)) {
      throw DomainError("point " + ToString(x) + " outside norm field bounds");
    }
  }

  double Ratio(Point<N> const& x, Vec<N> const& delta, Vec<N> const& u) const {
    return Dot(delta, u) / NormUnchecked(x, u);
  }

  double SearchDual(Point<N> const& x, Vec<N> const& delta) const {
    if (EuclideanNorm(delta) == 0.0) return 0.0;
    if constexpr (N == 1) {
      return std::abs(delta[0]) / NormUnchecked(x, Vec<N>{1.0});
    } else if constexpr (N == 2) {
      return SearchDual2(x, delta);
    } else {
      return SearchDualN(x, delta);
    }
  }

  // Coarse angular scan followed by golden-section refinement around the
  // best sample.
  double SearchDual2(Point<N> const& x, Vec<N> const& delta) const {
    constexpr int kCoarse = 720;
    constexpr double kTol = 1e-9;
    auto f = [&](double th) {
      return Ratio(x, delta, Vec<N>{std::cos(th), std::sin(th)});
    };
    double const step = 2.0 * std::numbers::pi / kCoarse;
    int best = 0;
    double best_val = -kInf;
    for (int k = 0; k < kCoarse; ++k) {
      double const v = f(k * step);
      if (v > best_val) {
        best_val = v;
        best = k;
      }
    }
    double a = (best - 1) * step;
    double b = (best + 1) * step;
    double const g = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - g * (b - a);
    double d = a + g * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > kTol) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = f(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = f(d);
      }
    }
    return std::max({best_val, fc, fd, f(0.5 * (a + b))});
  }

  // Projected gradient ascent on the euclidean unit sphere from the 2n axis
  // directions; finite-difference gradients.
  double SearchDualN(Point<N> const& x, Vec<N> const& delta) const {
    double best = -kInf;
    auto normalize = [](Vec<N> u) {
      double const n = EuclideanNorm(u);
      for (auto& c : u) c /= n;
      return u;
    };
    for (std::size_t axis = 0; axis < N; ++axis) {
      for (double sign : {1.0, -1.0}) {
        Vec<N> u{};
        u[axis] = sign;
        double val = Ratio(x, delta, u);
        double step = 0.5;
        for (int it = 0; it < 2000 && step > 1e-12; ++it) {
          Vec<N> grad{};
          constexpr double kFd = 1e-7;
          for (std::size_t i = 0; i < N; ++i) {
            Vec<N> up = u;
            Vec<N> um = u;
            up[i] += kFd;
            um[i] -= kFd;
            grad[i] = (Ratio(x, delta, up) - Ratio(x, delta, um)) / (2 * kFd);
          }
          // Tangential component.
          double const radial = Dot(grad, u);
          for (std::size_t i = 0; i < N; ++i) grad[i] -= radial * u[i];
          double const gn = EuclideanNorm(grad);
          if (gn < 1e-14) break;
          Vec<N> cand = normalize(u + (step / gn) * grad);
          double const cv = Ratio(x, delta, cand);
          if (cv > val) {
            u = cand;
            val = cv;
            step *= 1.5;
          } else {
            step *= 0.5;
          }
        }
        best = std::max(best, val);
      }
    }
    return best;
  }

  Box<N> box_;
  KindVariant kind_;
};

using NormField2 = NormField<2>;

//! Constant matrix helper for Riemannian fields.
template <std::size_t N>
typename NormField<N>::MatrixFn ConstantMatrix(
    typename NormField<N>::Matrix m) {
  return [m](Point<N> const&) { return m; };
}

enum class QuadratureRule { kMidpoint, kSimpson };

//! Polyline path; each segment is integrated with `order` sub-intervals.
template <std::size_t N>
struct PiecewisePath {
  std::vector<Point<N>> vertices;
  int quadrature_order = 1;
  QuadratureRule rule = QuadratureRule::kMidpoint;
};

//! Length of the straight segment p -> q under nf, composite quadrature.
template <std::size_t N>
double SegmentLength(NormField<N> const& nf, Point<N> const& p,
                     Point<N> const& q, int order = 1,
                     QuadratureRule rule = QuadratureRule::kMidpoint) {
  Vec<N> const dir = q - p;
  double total = 0.0;
  double const inv = 1.0 / order;
  auto at = [&](double s) { return nf.Norm(p + s * dir, dir); };
  for (int k = 0; k < order; ++k) {
    double const s0 = k * inv;
    double const s1 = (k + 1) * inv;
    if (rule == QuadratureRule::kMidpoint) {
      total += at(0.5 * (s0 + s1));
    } else {
      total += (at(s0) + 4.0 * at(0.5 * (s0 + s1)) + at(s1)) / 6.0;
    }
  }
  return total * inv;
}

//! l(c) = integral of ||c'(t)||_{c(t)} dt along the polyline.
template <std::size_t N>
double PathLength(NormField<N> const& nf, PiecewisePath<N> const& path) {
  if (path.quadrature_order < 1) {
    throw InputError("quadrature order must be >= 1");
  }
  if (path.vertices.size() < 2) return 0.0;
  double total = 0.0;
  for (std::size_t k = 0; k + 1 < path.vertices.size(); ++k) {
    auto const& p = path.vertices[k];
    auto const& q = path.vertices[k + 1];
    if (p == q) throw InputError("consecutive path vertices coincide");
    if (!nf.box().Contains(p) || !nf.box().Contains(q)) {
      throw DomainError("path vertex outside bounds");
    }
    total += SegmentLength(nf, p, q, path.quadrature_order, path.rule);
  }
  return total;
}

//! Largest two-sided ratio ||v||_x / ||v||_x0 over the given samples: the
//! empirical (1 + eps) in the local norm-equivalence condition.
template <std::size_t N>
double PalaisRatio(NormField<N> const& nf, Point<N> const& x0,
                   std::span<Point<N> const> points,
                   std::span<Vec<N> const> directions) {
  std::vector<double> base;
  base.reserve(directions.size());
  for (auto const& v : directions) base.push_back(nf.Norm(x0, v));
  double ratio = 1.0;
  for (auto const& x : points) {
    for (std::size_t k = 0; k < directions.size(); ++k) {
      double const n = nf.Norm(x, directions[k]);
      ratio = std::max({ratio, n / base[k], base[k] / n});
    }
  }
  return ratio;
}

//! Sample set used by PalaisRatio(nf, x0, r, n): the centre, the 2N axis
//! extremes of the ball, and seeded uniform points inside the ball.
template <std::size_t N>
std::vector<Point<N>> BallSamples(Point<N> const& x0, double r, int n,
                                  std::uint64_t seed = 0x5eed) {
  std::vector<Point<N>> pts{x0};
  for (std::size_t i = 0; i < N; ++i) {
    for (double s : {1.0, -1.0}) {
      Point<N> p = x0;
      p[i] += s * r;
      pts.push_back(p);
    }
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> unif;
  while (static_cast<int>(pts.size()) < n) {
    Vec<N> g{};
    for (auto& c : g) c = gauss(rng);
    double const len = EuclideanNorm(g);
    if (len == 0.0) continue;
    double const rad = r * std::pow(unif(rng), 1.0 / N);
    pts.push_back(x0 + (rad / len) * g);
  }
  return pts;
}

//! Unit directions: the 2N axis vectors, plus evenly spaced angles in 2-D or
//! seeded Gaussian directions otherwise.
template <std::size_t N>
std::vector<Vec<N>> SphereDirections(int n, std::uint64_t seed = 0xd1e) {
  std::vector<Vec<N>> dirs;
  for (std::size_t i = 0; i < N; ++i) {
    for (double s : {1.0, -1.0}) {
      Vec<N> v{};
      v[i] = s;
      dirs.push_back(v);
    }
  }
  if constexpr (N == 2) {
    for (int k = 0; static_cast<int>(dirs.size()) < n; ++k) {
      double const th = std::numbers::pi * (k + 0.5) / std::max(1, n);
      dirs.push_back({std::cos(th), std::sin(th)});
    }
  } else {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    while (static_cast<int>(dirs.size()) < n) {
      Vec<N> g{};
      for (auto& c : g) c = gauss(rng);
      double const len = EuclideanNorm(g);
      if (len > 0) dirs.push_back((1.0 / len) * g);
    }
  }
  return dirs;
}

template <std::size_t N>
double PalaisRatio(NormField<N> const& nf, Point<N> const& x0, double r,
                   int n_samples) {
  if (!(r > 0.0)) throw InputError("probe radius must be positive");
  auto const pts = BallSamples<N>(x0, r, n_samples);
  for (auto const& p : pts) {
    if (!nf.box().Contains(p)) {
      throw DomainError("palais probe ball leaves the domain");
    }
  }
  auto const dirs = SphereDirections<N>(n_samples);
  return PalaisRatio<N>(nf, x0, pts, dirs);
}

}  // namespace finslerhj

#endif  // FINSLERHJ_NORM_FIELD_HPP_
