#ifndef FINSLERHJ_HAMILTONIAN_HPP_
#define FINSLERHJ_HAMILTONIAN_HPP_

#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "finslerhj/distance.hpp"
#include "finslerhj/types.hpp"

namespace finslerhj {

//! Modulus and constant of the joint continuity bound
//! |H(x1,t1) - H(x2,t2)| <= omega(d(x1,x2), t1 - t2) + C max(|t1|,|t2|) d(x1,x2).
struct ConditionACertificate {
  std::function<double(double s, double r)> omega;
  double c = 0.0;
};

enum class CoercivityClass { kUniform, kLocallyUniform, kNone };

inline std::string ToString(CoercivityClass c) {
  switch (c) {
    case CoercivityClass::kUniform: return "uniform";
    case CoercivityClass::kLocallyUniform: return "locally-uniform";
    case CoercivityClass::kNone: return "none";
  }
  return "none";
}

//! H(x, t) for u(x) + H(x, ||du(x)||_x) = 0.
struct StationaryHamiltonian {
  std::string name;
  std::function<double(Point2 const&, double)> eval;
  bool monotone_in_t = true;
  std::optional<ConditionACertificate> certificate;
  //! Claimed K0 <= H(x, 0) <= K1.
  double k0 = 0.0;
  double k1 = 0.0;
  CoercivityClass coercivity = CoercivityClass::kNone;

  double operator()(Point2 const& x, double t) const { return eval(x, t); }

  //! H + c (both K bounds shift).
  StationaryHamiltonian Shifted(double c) const {
    StationaryHamiltonian out = *this;
    auto base = eval;
    out.eval = [base, c](Point2 const& x, double t) { return base(x, t) + c; };
    out.k0 += c;
    out.k1 += c;
    out.name = name + "+shift";
    return out;
  }
};

//! Lipschitz expectation: a global constant, or the radial rule "R-Lipschitz
//! in B(x0, R/4)" checked for each listed R.
struct LipschitzRule {
  bool radial = false;
  double constant = 0.0;
  std::vector<double> radii;
};

enum class BuiltinId { kEx1, kEx2, kEx3, kEx4, kEx5 };

inline std::string ToString(BuiltinId id) {
  switch (id) {
    case BuiltinId::kEx1: return "ex1";
    case BuiltinId::kEx2: return "ex2";
    case BuiltinId::kEx3: return "ex3";
    case BuiltinId::kEx4: return "ex4";
    case BuiltinId::kEx5: return "ex5";
  }
  return "?";
}

struct BuiltinProblem {
  BuiltinId id = BuiltinId::kEx2;
  double a = 0.0;
  double b = 0.0;
  Point2 x0{0.0, 0.0};
  double lower = 0.0;
  double upper = 0.0;
  LipschitzRule lipschitz;
  StationaryHamiltonian hamiltonian;
};

//! Unit certificate omega(s, r) = s + |r|, C = 0.
inline ConditionACertificate UnitCertificate() {
  return {[](double s, double r) { return s + std::abs(r); }, 0.0};
}

//! u + min(||du||, a) - cos d(x0, x) = 0, a > 2.
inline BuiltinProblem MakeEx1(double a, DistanceFrom const& d) {
  if (!(a > 2.0)) throw InputError("ex1 needs a > 2");
  BuiltinProblem p;
  p.id = BuiltinId::kEx1;
  p.a = a;
  p.lower = -1.0;
  p.upper = 1.0;
  p.lipschitz.constant = a;
  auto& h = p.hamiltonian;
  h.name = "ex1";
  h.eval = [a, d](Point2 const& x, double t) {
    return std::min(t, a) - std::cos(d(x));
  };
  h.k0 = -1.0;
  h.k1 = 1.0;
  h.certificate = UnitCertificate();
  h.coercivity = CoercivityClass::kUniform;
  return p;
}

//! u + ||du|| - cos d(x0, x) = 0.
inline BuiltinProblem MakeEx2(DistanceFrom const& d) {
  BuiltinProblem p;
  p.id = BuiltinId::kEx2;
  p.lower = -1.0;
  p.upper = 1.0;
  p.lipschitz.constant = 2.0;
  auto& h = p.hamiltonian;
  h.name = "ex2";
  h.eval = [d](Point2 const& x, double t) { return t - std::cos(d(x)); };
  h.k0 = -1.0;
  h.k1 = 1.0;
  h.certificate = UnitCertificate();
  h.coercivity = CoercivityClass::kUniform;
  return p;
}

//! u + min(||du||, 1) - (a + d)/(b + d) = 0, 0 < a < b.
inline BuiltinProblem MakeEx3(double a, double b, DistanceFrom const& d) {
  if (!(a > 0.0 && a < b)) throw InputError("ex3 needs 0 < a < b");
  BuiltinProblem p;
  p.id = BuiltinId::kEx3;
  p.a = a;
  p.b = b;
  p.lower = a / b;
  p.upper = 1.0;
  p.lipschitz.constant = 1.0 - a / b;
  auto& h = p.hamiltonian;
  h.name = "ex3";
  h.eval = [a, b, d](Point2 const& x, double t) {
    double const r = d(x);
    return std::min(t, 1.0) - (a + r) / (b + r);
  };
  h.k0 = -1.0;
  h.k1 = -a / b;
  h.certificate = UnitCertificate();
  h.coercivity = CoercivityClass::kUniform;
  return p;
}

//! u + (1 + 2||du||)/(1 + ||du|| + d) = 0; R-Lipschitz in B(x0, R/4).
inline BuiltinProblem MakeEx4(DistanceFrom const& d,
                              std::vector<double> radii = {1.0, 2.0, 4.0}) {
  BuiltinProblem p;
  p.id = BuiltinId::kEx4;
  p.lower = -1.0;
  p.upper = 0.0;
  p.lipschitz.radial = true;
  p.lipschitz.radii = std::move(radii);
  auto& h = p.hamiltonian;
  h.name = "ex4";
  h.eval = [d](Point2 const& x, double t) {
    double const at = std::abs(t);
    return (1.0 + 2.0 * at) / (1.0 + at + d(x));
  };
  h.k0 = 0.0;
  h.k1 = 1.0;
  h.certificate = UnitCertificate();
  h.coercivity = CoercivityClass::kUniform;
  return p;
}

//! u + ||du|| - f(x) = 0 with f bounded in [f_min, f_max]:
//! K0 = -f_max, K1 = -f_min, f_min <= u <= f_max, (f_max - f_min)-Lipschitz.
inline BuiltinProblem MakeEx5(std::function<double(Point2 const&)> f,
                              double f_min, double f_max) {
  if (!(f_min <= f_max)) throw InputError("ex5 needs f_min <= f_max");
  BuiltinProblem p;
  p.id = BuiltinId::kEx5;
  p.lower = f_min;
  p.upper = f_max;
  p.lipschitz.constant = f_max - f_min;
  auto& h = p.hamiltonian;
  h.name = "ex5";
  h.eval = [f = std::move(f)](Point2 const& x, double t) { return t - f(x); };
  h.k0 = -f_max;
  h.k1 = -f_min;
  h.certificate = UnitCertificate();
  h.coercivity = CoercivityClass::kUniform;
  return p;
}

//! f range sampled over the grid nodes.
inline std::pair<double, double> SampleRange(
    GridDomain const& g, std::function<double(Point2 const&)> const& f) {
  double lo = kInf;
  double hi = -kInf;
  for (std::size_t k = 0; k < g.size(); ++k) {
    double const v = f(g.Coord(k));
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

//! H(t, x, m) for u_t + H(t, x, ||u_x||_x) = 0.
struct EvolutionHamiltonian {
  std::string name;
  std::function<double(double, Point2 const&, double)> eval;
  bool monotone_in_m = true;
  //! |H(t,x,m1) - H(t,x,m2)| <= lipschitz_m |m1 - m2| on the working range;
  //! <= 0 means estimate by sampling.
  double lipschitz_m = 0.0;

  double operator()(double t, Point2 const& x, double m) const {
    return eval(t, x, m);
  }
};

//! |H(t1,x1,r1) - H(t2,x2,r2)| <= omega(|t1-t2|, d(x1,x2), r1-r2)
//!   + C max(|r1|,|r2|) (|t1-t2| + d(x1,x2)).
struct EvolutionCertificate {
  std::function<double(double s, double dist, double r)> omega;
  double c = 0.0;
};

}  // namespace finslerhj

#endif  // FINSLERHJ_HAMILTONIAN_HPP_
