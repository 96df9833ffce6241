#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "finslerhj/evolution.hpp"
#include "fixtures.hpp"

namespace finslerhj {
namespace {

using testing::Square;

EvolutionHamiltonian Linear() {
  EvolutionHamiltonian h;
  h.name = "m";
  h.eval = [](double, Point2 const&, double m) { return m; };
  h.lipschitz_m = 1.0;
  return h;
}

EvolutionHamiltonian ConstantH(double c) {
  EvolutionHamiltonian h;
  h.name = "const";
  h.eval = [c](double, Point2 const&, double) { return c; };
  return h;
}

EvolutionHamiltonian LinearMinusCos(DistanceFrom const& d) {
  EvolutionHamiltonian h;
  h.name = "m-cos";
  h.eval = [d](double, Point2 const& x, double m) { return m - std::cos(d(x)); };
  h.lipschitz_m = 1.0;
  return h;
}

EvolutionHamiltonian PlusConstant(EvolutionHamiltonian h, double c) {
  auto base = h.eval;
  h.eval = [base, c](double t, Point2 const& x, double m) { return base(t, x, m) + c; };
  return h;
}

double MaxFrameDiff(GridDomain const& g, ScalarField const& a, ScalarField const& b,
                    double frame = 0.1) {
  double m = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (g.InFrame(k, frame)) m = std::max(m, std::abs(a[k] - b[k]));
  }
  return m;
}

class Evolution : public ::testing::Test {
 protected:
  GridDomain g = GridDomain::Rectangle(Square(-1, 1), 41, 41);
  NormField2 nf = NormField2::Euclidean(g.bounds());
  //! min(|x - p|, 0.8) with p off-centre.
  ScalarField cone = g.Sample([](Point2 const& x) {
    return std::min(std::hypot(x[0] - 0.2, x[1] + 0.1), 0.8);
  });
};

TEST_F(Evolution, ConstantHamiltonianIsExactQuadrature) {
  double const c = 0.75;
  EvolutionOptions o;
  o.dt = 0.01;
  o.stride = 5;
  auto const sol = SolveEvolution(ConstantH(c), nf, g, cone, 0.5, o);
  ASSERT_EQ(sol.times.size(), sol.snapshots.size());
  for (std::size_t s = 0; s < sol.snapshots.size(); ++s) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      EXPECT_NEAR(sol.snapshots[s][k], cone[k] - c * sol.times[s], 1e-12);
    }
  }
  // No m-dependence means no CFL limit: a single step of length T.
  auto const one = SolveEvolution(ConstantH(c), nf, g, cone, 0.5);
  EXPECT_EQ(one.steps, 1u);
  EXPECT_NEAR(one.final_field[7], cone[7] - 0.375, 1e-15);
}

TEST_F(Evolution, LinearHamiltonianMatchesHopfLax) {
  double const T = 0.5;
  auto const sol = SolveEvolution(Linear(), nf, g, cone, T);
  auto const oracle = HopfLaxOracle(nf, g, cone, T);
  EXPECT_LE(MaxFrameDiff(g, sol.final_field, oracle), 3.0 * (g.h() + sol.dt));
}

TEST_F(Evolution, SnapshotCountAndStride) {
  EvolutionOptions o;
  o.stride = 3;
  auto const sol = SolveEvolution(Linear(), nf, g, cone, 0.3, o);
  EXPECT_EQ(sol.snapshots.size(), sol.steps / 3 + 1);
  EXPECT_EQ(sol.times.front(), 0.0);
  EXPECT_LE(sol.dt, 0.4 * g.h() / (sol.lipschitz_m * sol.nu) * (1 + 1e-12));
  o.full_history = true;
  auto const full = SolveEvolution(Linear(), nf, g, cone, 0.3, o);
  EXPECT_EQ(full.snapshots.size(), full.steps + 1);
  EXPECT_EQ(full.final_field, full.snapshots.back());
}

TEST_F(Evolution, InputErrors) {
  EvolutionOptions o;
  o.dt = 1.0;
  EXPECT_THROW(SolveEvolution(Linear(), nf, g, cone, 0.3, o), InputError);
  o = {};
  o.cfl = 0.9;
  EXPECT_THROW(SolveEvolution(Linear(), nf, g, cone, 0.3, o), InputError);
  ScalarField bad = cone;
  bad[17] = std::nan("");
  EXPECT_THROW(SolveEvolution(Linear(), nf, g, bad, 0.3), InputError);
  auto decreasing = Linear();
  decreasing.eval = [](double, Point2 const&, double m) { return -m; };
  EXPECT_THROW(SolveEvolution(decreasing, nf, g, cone, 0.3), InputError);
  EXPECT_THROW(SolveEvolution(Linear(), nf, g, ScalarField(3, 3, 0.0), 0.3), InputError);
}

TEST_F(Evolution, ThreadedStepsAreBitwiseIdentical) {
  auto const one = SolveEvolution(Linear(), nf, g, cone, 0.3);
  EvolutionOptions o;
  o.threads = 4;
  auto const four = SolveEvolution(Linear(), nf, g, cone, 0.3, o);
  EXPECT_EQ(one.final_field, four.final_field);
  EXPECT_EQ(one.snapshots, four.snapshots);
}

TEST_F(Evolution, OracleAtZeroAndLargeTime) {
  EXPECT_EQ(HopfLaxOracle(nf, g, cone, 0.0), cone);
  auto const big = HopfLaxOracle(nf, g, cone, 3.0);
  double const lo = *std::min_element(cone.values().begin(), cone.values().end());
  for (double v : big.values()) EXPECT_EQ(v, lo);
}

TEST_F(Evolution, OracleSemigroup) {
  auto const whole = HopfLaxOracle(nf, g, cone, 0.5);
  auto const halves = HopfLaxOracle(nf, g, HopfLaxOracle(nf, g, cone, 0.2), 0.3);
  // Composed discrete balls sit inside the single ball, so halves >= whole.
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_GE(halves[k], whole[k]);
    worst = std::max(worst, halves[k] - whole[k]);
  }
  EXPECT_LE(worst, 2.0 * g.h() + 1e-12);
}

TEST_F(Evolution, OracleBudget) {
  auto const big = GridDomain::Rectangle(Square(-1, 1), 101, 101);
  ScalarField const h(101, 101, 0.0);
  EXPECT_THROW(HopfLaxOracle(NormField2::Euclidean(big.bounds()), big, h, 0.1), BudgetError);
}

TEST_F(Evolution, OracleInsideLinearEnvelope) {
  // h is 1-Lipschitz and H(m) = m on [0, 1]: K0 = 0, K1 = 1.
  auto const [k0, k1] = EnvelopeConstants(Linear(), g, 0.5, 1.0);
  EXPECT_EQ(k0, 0.0);
  EXPECT_EQ(k1, 1.0);
  for (double t : {0.1, 0.3, 0.5}) {
    auto const o = HopfLaxOracle(nf, g, cone, t);
    for (std::size_t k = 0; k < g.size(); ++k) {
      EXPECT_LE(o[k], cone[k]);
      EXPECT_GE(o[k], cone[k] - t - 1e-12);
    }
  }
}

TEST(Envelope, CosinePotentialBand) {
  auto const g = GridDomain::Rectangle(Square(-4, 4), 61, 61);
  auto const nf = NormField2::Euclidean(g.bounds());
  DistanceFrom const d(nf, g, {0, 0});
  auto const h = LinearMinusCos(d);
  ScalarField const zero(g.nx(), g.ny(), 0.0);
  auto const [k0, k1] = EnvelopeConstants(h, g, 1.0, 0.0);
  EXPECT_EQ(k0, -1.0);
  EXPECT_NEAR(k1, 1.0, 1e-3);
  auto const sol = SolveEvolution(h, nf, g, zero, 1.0);
  auto const rep = EnvelopeBoundsCheck(sol, k0, k1, zero, g);
  EXPECT_TRUE(rep.pass) << ToJson(rep).dump();
  // A band shifted by 3 (K0 = K1 = -3) is caught with witnesses.
  auto const shifted = EnvelopeBoundsCheck(sol, -3.0, -3.0, zero, g);
  EXPECT_FALSE(shifted.pass);
  EXPECT_GT(shifted.measured.at("lower_violation_c"), 5.0);
  EXPECT_FALSE(shifted.witnesses.empty());
}

TEST_F(Evolution, ConstantHamiltonianBandCollapses) {
  auto const sol = SolveEvolution(ConstantH(0.3), nf, g, cone, 0.4, EvolutionOptions{.dt = 0.05});
  auto const rep = EnvelopeBoundsCheck(sol, 0.3, 0.3, cone, g);
  EXPECT_TRUE(rep.pass);
  EXPECT_LE(rep.measured.at("lower_violation_c"), 1e-9);
  EXPECT_LE(rep.measured.at("upper_violation_c"), 1e-9);
}

TEST_F(Evolution, ComparisonExamples) {
  ScalarField raised = cone;
  for (auto& v : raised.values()) v += 1.0;
  auto const u = SolveEvolution(Linear(), nf, g, cone, 0.4);
  auto const v = SolveEvolution(Linear(), nf, g, raised, 0.4);
  auto const r = ComparisonCheck(u, v, g);
  EXPECT_NEAR(r.inf_gap, 1.0, 1e-12);
  EXPECT_TRUE(r.pass);
  auto const same = ComparisonCheck(u, u, g);
  EXPECT_GE(same.inf_gap, -1e-12);

  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> bump(0.0, 0.2);
  ScalarField above = cone;
  for (auto& x : above.values()) x += bump(rng);
  auto const w = SolveEvolution(Linear(), nf, g, above, 0.4);
  auto const rr = ComparisonCheck(u, w, g);
  EXPECT_TRUE(rr.pass);
  EXPECT_GE(rr.inf_gap, 0.0);

  auto const shorter = SolveEvolution(Linear(), nf, g, cone, 0.2);
  EXPECT_THROW(ComparisonCheck(u, shorter, g), InputError);
}

TEST_F(Evolution, MonotonicityFixtures) {
  auto const h1 = Linear();
  double const T = 0.5;
  // H2 = H1 + 0.05, same data: the bound is 0.05 whatever T is.
  auto const h2 = PlusConstant(h1, 0.05);
  auto const v = SolveEvolution(h1, nf, g, cone, T);
  auto const u = SolveEvolution(h2, nf, g, cone, T, EvolutionOptions{.dt = v.dt});
  auto const a = MonotonicityGap(u, v, h1, h2, cone, cone, g);
  EXPECT_TRUE(a.pass);
  EXPECT_NEAR(a.bound, 0.05, 1e-12);
  EXPECT_LE(a.gap, 0.05 + a.slack);

  // Same H, data lowered by 0.3: value translation gives exactly -0.3.
  ScalarField lowered = cone;
  for (auto& x : lowered.values()) x -= 0.3;
  auto const w = SolveEvolution(h1, nf, g, lowered, T);
  auto const b = MonotonicityGap(w, v, h1, h1, cone, lowered, g);
  EXPECT_TRUE(b.pass);
  EXPECT_NEAR(b.bound, -0.3, 1e-12);
  EXPECT_NEAR(b.gap, -0.3, 1e-12);

  auto const c = MonotonicityGap(v, v, h1, h1, cone, cone, g);
  EXPECT_TRUE(c.pass);
  EXPECT_EQ(c.gap, 0.0);
}

TEST_F(Evolution, MonotonicityHypothesisViolations) {
  auto const v = SolveEvolution(Linear(), nf, g, cone, 0.2);
  ScalarField higher = cone;
  higher[100] += 0.1;
  try {
    MonotonicityGap(v, v, Linear(), Linear(), cone, higher, g);
    FAIL() << "expected InputError";
  } catch (InputError const& e) {
    EXPECT_NE(std::string(e.what()).find("node 100"), std::string::npos) << e.what();
  }
  EXPECT_THROW(MonotonicityGap(v, v, PlusConstant(Linear(), 0.1), Linear(), cone, cone, g),
               InputError);
}

class EvolutionConditionA : public ::testing::Test {
 protected:
  GridDomain g = GridDomain::Rectangle(Square(-2, 2), 41, 41);
  NormField2 nf = NormField2::Euclidean(g.bounds());
  DistanceFrom d{nf, g, {0, 0}};
  EvolutionSampler s{.budget = 20000};
};

TEST_F(EvolutionConditionA, CosinePotentialPasses) {
  EvolutionCertificate const cert{[](double, double dist, double r) { return dist + std::abs(r); },
                                  0.0};
  auto const rep = CheckConditionAEvolution(LinearMinusCos(d), cert, nf, g, s);
  EXPECT_TRUE(rep.pass) << ToJson(rep).dump();
}

TEST_F(EvolutionConditionA, BoundedUniformlyContinuousCoefficient) {
  // r(t, x) = 1 + 0.5 sin(t + x1): |r| <= 1.5 and r is 0.5-Lipschitz in t
  // and in x (graph distance dominates the euclidean one).
  EvolutionHamiltonian h;
  h.eval = [](double t, Point2 const& x, double m) { return (1.0 + 0.5 * std::sin(t + x[0])) * m; };
  EvolutionCertificate const cert{[](double, double, double r) { return 1.5 * std::abs(r); }, 0.5};
  auto const rep = CheckConditionAEvolution(h, cert, nf, g, s);
  EXPECT_TRUE(rep.pass) << ToJson(rep).dump();
}

TEST_F(EvolutionConditionA, ExponentialInMIsCaught) {
  EvolutionHamiltonian h;
  h.eval = [](double, Point2 const&, double m) { return std::exp(m); };
  EvolutionCertificate const cert{
      [](double s, double dist, double r) { return s + dist + std::abs(r); }, 1.0};
  auto const rep = CheckConditionAEvolution(h, cert, nf, g, s);
  EXPECT_FALSE(rep.pass);
  ASSERT_FALSE(rep.witnesses.empty());
  auto const& w = rep.witnesses.front().values;  // t1, t2, r1, r2, lhs, rhs
  EXPECT_GT(w[4], w[5]);
  EXPECT_THROW(CheckConditionAEvolution(h, EvolutionCertificate{}, nf, g, s), InputError);
}

TEST_F(Evolution, ValueTranslation) {
  double const c = 0.625;
  ScalarField shifted = cone;
  for (auto& v : shifted.values()) v += c;
  EvolutionOptions o;
  o.stride = 2;
  auto const a = SolveEvolution(Linear(), nf, g, cone, 0.3, o);
  auto const b = SolveEvolution(Linear(), nf, g, shifted, 0.3, o);
  for (std::size_t s = 0; s < a.snapshots.size(); ++s) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      EXPECT_NEAR(b.snapshots[s][k] - a.snapshots[s][k], c, 1e-12);
    }
  }
}

TEST_F(Evolution, OrderPreservationIsExact) {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> bump(0.0, 0.3);
  ScalarField above = cone;
  for (auto& v : above.values()) v += bump(rng);
  EvolutionOptions o;
  o.full_history = true;
  auto const a = SolveEvolution(Linear(), nf, g, cone, 0.4, o);
  auto const b = SolveEvolution(Linear(), nf, g, above, 0.4, EvolutionOptions{.dt = a.dt, .full_history = true});
  for (std::size_t s = 0; s < a.snapshots.size(); ++s) {
    for (std::size_t k = 0; k < g.size(); ++k) ASSERT_LE(a.snapshots[s][k], b.snapshots[s][k]);
  }
}

TEST_F(Evolution, NonExpansive) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> noise(-0.1, 0.1);
  ScalarField other = cone;
  double sup0 = 0.0;
  for (std::size_t k = 0; k < other.size(); ++k) {
    other[k] += noise(rng);
    sup0 = std::max(sup0, std::abs(other[k] - cone[k]));
  }
  EvolutionOptions o;
  o.full_history = true;
  auto const a = SolveEvolution(Linear(), nf, g, cone, 0.4, o);
  o.dt = a.dt;
  auto const b = SolveEvolution(Linear(), nf, g, other, 0.4, o);
  for (std::size_t s = 0; s < a.snapshots.size(); ++s) {
    double sup = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) {
      sup = std::max(sup, std::abs(a.snapshots[s][k] - b.snapshots[s][k]));
    }
    EXPECT_LE(sup, sup0 + 1e-12) << "step " << s;
  }
}

TEST_F(Evolution, ConsistencyOnLinearData) {
  double const alpha = 0.3;
  auto const plane = g.Sample([&](Point2 const& x) { return alpha * x[0]; });
  double const T = 0.2;
  auto const sol = SolveEvolution(Linear(), nf, g, plane, T);
  double worst = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    Point2 const x = g.Coord(k);
    if (std::abs(x[0]) > 0.5 || std::abs(x[1]) > 0.5) continue;
    double const rate = (sol.final_field[k] - plane[k]) / T;
    worst = std::max(worst, std::abs(rate + alpha));
  }
  EXPECT_LE(worst, 5.0 * (g.h() + sol.dt));
}

}  // namespace
}  // namespace finslerhj
