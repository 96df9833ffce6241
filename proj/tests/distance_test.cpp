#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "finslerhj/distance.hpp"
#include "fixtures.hpp"

namespace finslerhj {
namespace {

using testing::BoxDistance;
using testing::Square;
using testing::UnitSquare;

NormField2 Tilted(Box<2> b) {
  NormField2::Matrix a;
  a << 2.0, 0.5, 0.5, 1.0;
  return NormField2::Riemannian(b, ConstantMatrix<2>(a));
}

NormField2 Conformal(Box<2> b) {
  return NormField2::Scaled(NormField2::Euclidean(b), [](Point2 const& x) {
    return 1.0 + 0.5 * std::sin(3.0 * x[0]) * std::cos(2.0 * x[1]);
  });
}

// Relative error of the 16-stencil graph distance from one seed, averaged
// over nodes and at the worst node.
std::pair<double, double> StraightLineError(NormField2 const& nf, GridDomain const& g,
                                            int stencil) {
  DistanceOptions o;
  o.stencil_order = stencil;
  std::size_t const p = g.NearestNode({-0.3, 0.1});
  auto const df = DistanceFromNode(nf, g, p, o);
  EXPECT_EQ(df.values[p], 0.0);
  EXPECT_TRUE(df.unreachable.empty());
  double worst = 0.0;
  double sum = 0.0;
  for (std::size_t k = 0; k < g.size(); ++k) {
    if (k == p) continue;
    double const exact = nf.Norm({0, 0}, g.Coord(k) - g.Coord(p));
    double const rel = (df.values[k] - exact) / exact;
    EXPECT_GE(rel, -1e-12);
    worst = std::max(worst, rel);
    sum += rel;
  }
  return {sum / static_cast<double>(g.size() - 1), worst};
}

TEST(DistanceField, ConstantNormMatchesStraightLine) {
  auto const g = GridDomain::Rectangle(Square(-1, 1), 101, 101);
  for (auto const& nf : {NormField2::Euclidean(g.bounds()), Tilted(g.bounds())}) {
    auto const [mean, worst] = StraightLineError(nf, g, 16);
    EXPECT_LE(mean, 0.02);
    EXPECT_LE(worst, 0.08);
  }
}

TEST(DistanceField, EuclideanWorstCaseIsStencilGeometry) {
  // Between neighbouring stencil directions 0 and atan(1/2) the best graph
  // path is 1 / cos(atan(1/2) / 2) times the straight line.
  auto const g = GridDomain::Rectangle(Square(-1, 1), 101, 101);
  auto const nf = NormField2::Euclidean(g.bounds());
  double const bound16 = 1.0 / std::cos(std::atan(0.5) / 2.0) - 1.0;
  EXPECT_LE(StraightLineError(nf, g, 16).second, bound16 + 1e-12);
  EXPECT_LE(StraightLineError(nf, g, 32).second, 0.02);
}

TEST(DistanceField, DistanceToBoxBoundary) {
  auto const g = UnitSquare(101);
  auto const nf = NormField2::Euclidean(g.bounds());
  std::vector<Seed> seeds;
  for (std::size_t k : g.boundary_nodes()) seeds.push_back({k, 0.0});
  auto const df = ComputeDistanceField(nf, g, seeds);
  for (std::size_t k = 0; k < g.size(); ++k) {
    EXPECT_NEAR(df.values[k], BoxDistance(g.Coord(k)), 2.0 * g.h());
  }
}

TEST(DistanceField, ConformalRefinement) {
  auto const coarse = GridDomain::Rectangle(Square(-1, 1), 51, 51);
  auto const fine = GridDomain::Rectangle(Square(-1, 1), 101, 101);
  auto const nf = Conformal(coarse.bounds());
  Point2 const src{-0.6, -0.2};
  auto const dc = DistanceFromNode(nf, coarse, coarse.NearestNode(src));
  auto const dfine = DistanceFromNode(nf, fine, fine.NearestNode(src));
  double worst = 0.0;
  for (std::size_t k = 0; k < coarse.size(); ++k) {
    std::size_t const m = fine.Index(2 * coarse.I(k), 2 * coarse.J(k));
    worst = std::max(worst, std::abs(dc.values[k] - dfine.values[m]));
  }
  EXPECT_LE(worst, 3.0 * coarse.h());
}

TEST(DistanceField, SeedValuesPinnedAndUnreachableFlagged) {
  // Two disjoint disks: a seed in one leaves the other unreachable.
  auto const g = GridDomain::Masked(Square(-2, 2), 41, 41, [](Point2 const& x) {
    return std::hypot(x[0] + 1, x[1]) < 0.7 || std::hypot(x[0] - 1, x[1]) < 0.7;
  });
  auto const nf = NormField2::Euclidean(g.bounds());
  std::size_t const a = g.NearestNode({-1, 0});
  std::size_t const b = g.NearestNode({-1, 0.3});
  auto const df = ComputeDistanceField(nf, g, {{a, 5.0}, {b, 0.25}});
  EXPECT_EQ(df.values[a], 5.0);
  EXPECT_EQ(df.values[b], 0.25);
  EXPECT_FALSE(df.unreachable.empty());
  EXPECT_TRUE(std::isinf(df.values[g.NearestNode({1, 0})]));
  EXPECT_THROW(ComputeDistanceField(nf, g, {}), InputError);
  EXPECT_THROW(ComputeDistanceField(nf, g, {{a, 0.0}, {a, 1.0}}), InputError);
}

TEST(DistanceField, MonotoneInSeeds) {
  auto const g = GridDomain::Rectangle(Square(-1, 1), 41, 41);
  auto const nf = Conformal(g.bounds());
  std::vector<Seed> seeds{{g.NearestNode({-0.5, -0.5}), 0.0},
                          {g.NearestNode({0.5, 0.2}), 0.3},
                          {g.NearestNode({0.0, 0.8}), 0.1}};
  auto const base = ComputeDistanceField(nf, g, seeds);
  for (std::size_t s = 0; s < seeds.size(); ++s) {
    auto raised = seeds;
    raised[s].value += 0.4;
    auto const up = ComputeDistanceField(nf, g, raised);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_GE(up.values[k], base.values[k]);
  }
}

TEST(DistanceField, DeterministicRuns) {
  auto const g = GridDomain::Rectangle(Square(-1, 1), 61, 61);
  auto const nf = Conformal(g.bounds());
  auto const a = DistanceFromNode(nf, g, 17);
  auto const b = DistanceFromNode(nf, g, 17);
  EXPECT_EQ(a.values, b.values);
}

TEST(MetricBall, ZeroRadiusIsZeroSeeds) {
  auto const g = GridDomain::Rectangle(Square(-1, 1), 31, 31);
  auto const nf = NormField2::Euclidean(g.bounds());
  auto const df = ComputeDistanceField(nf, g, {{3, 0.0}, {100, 0.0}, {200, 0.5}});
  auto const ball = MetricBall(df, 0.0);
  EXPECT_EQ(ball, (std::vector<std::size_t>{3, 100}));
}

TEST(MetricBall, LargeRadiusIsEverything) {
  auto const g = GridDomain::Rectangle(Square(-1, 1), 31, 31);
  auto const nf = Tilted(g.bounds());
  auto const df = DistanceFromNode(nf, g, 0);
  double top = 0.0;
  for (double v : df.values.values()) top = std::max(top, v);
  EXPECT_EQ(MetricBall(df, top).size(), g.size());
  EXPECT_THROW(MetricBall(df, -1.0), InputError);
}

TEST(MetricBall, EuclideanDiskWithinOneShell) {
  auto const g = GridDomain::Rectangle(Square(-1, 1), 101, 101);
  auto const nf = NormField2::Euclidean(g.bounds());
  auto const df = DistanceFromNode(nf, g, g.NearestNode({0, 0}));
  auto const ball = MetricBall(df, 0.5);
  std::set<std::size_t> const in(ball.begin(), ball.end());
  for (std::size_t k = 0; k < g.size(); ++k) {
    bool const analytic = std::hypot(g.Coord(k)[0], g.Coord(k)[1]) <= 0.5;
    if (analytic != static_cast<bool>(in.count(k))) {
      EXPECT_LE(std::abs(std::hypot(g.Coord(k)[0], g.Coord(k)[1]) - 0.5), g.h());
    }
  }
}

class MetricProperties : public ::testing::Test {
 protected:
  GridDomain g = GridDomain::Rectangle(Square(-1, 1), 41, 41);
  NormField2 nf = Conformal(g.bounds());
  std::vector<std::size_t> nodes = [this] {
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<std::size_t> pick(0, g.size() - 1);
    std::vector<std::size_t> out;
    for (int n = 0; n < 12; ++n) out.push_back(pick(rng));
    return out;
  }();
};

TEST_F(MetricProperties, Symmetry) {
  for (std::size_t p : nodes) {
    auto const dp = DistanceFromNode(nf, g, p);
    for (std::size_t q : nodes) {
      auto const dq = DistanceFromNode(nf, g, q);
      EXPECT_NEAR(dp.values[q], dq.values[p], 1e-9);
    }
  }
}

TEST_F(MetricProperties, TriangleInequality) {
  std::vector<ScalarField> d;
  for (std::size_t p : nodes) d.push_back(DistanceFromNode(nf, g, p).values);
  for (std::size_t a = 0; a < nodes.size(); ++a) {
    for (std::size_t b = 0; b < nodes.size(); ++b) {
      for (std::size_t k = 0; k < g.size(); ++k) {
        EXPECT_LE(d[a][k], d[a][nodes[b]] + d[b][k] + 1e-9);
      }
    }
  }
}

TEST_F(MetricProperties, StencilMonotonicity) {
  for (std::size_t p : nodes) {
    DistanceOptions o;
    o.stencil_order = 8;
    auto const d8 = DistanceFromNode(nf, g, p, o);
    o.stencil_order = 16;
    auto const d16 = DistanceFromNode(nf, g, p, o);
    o.stencil_order = 32;
    auto const d32 = DistanceFromNode(nf, g, p, o);
    for (std::size_t k = 0; k < g.size(); ++k) {
      EXPECT_LE(d16.values[k], d8.values[k]);
      EXPECT_LE(d32.values[k], d16.values[k]);
    }
  }
}

TEST_F(MetricProperties, GridPathsDominateDistance) {
  std::mt19937_64 rng(9);
  std::uniform_int_distribution<int> step(0, 15);
  auto const offsets = StencilOffsets(16);
  for (std::size_t p : nodes) {
    auto const dp = DistanceFromNode(nf, g, p);
    // Random walk over stencil edges, measured edge by edge with the same
    // midpoint rule the graph uses.
    PiecewisePath<2> path{{g.Coord(p)}, 1};
    long i = static_cast<long>(g.I(p));
    long j = static_cast<long>(g.J(p));
    for (int s = 0; s < 30; ++s) {
      auto const o = offsets[static_cast<std::size_t>(step(rng))];
      long const ni = i + o.di;
      long const nj = j + o.dj;
      if (ni < 0 || nj < 0 || ni >= 41 || nj >= 41) continue;
      i = ni;
      j = nj;
      path.vertices.push_back(g.Coord(g.Index(static_cast<std::size_t>(i),
                                              static_cast<std::size_t>(j))));
    }
    if (path.vertices.size() < 2) continue;
    std::size_t const q = g.NearestNode(path.vertices.back());
    EXPECT_GE(PathLength(nf, path), dp.values[q] - 1e-9);
  }
}

TEST_F(MetricProperties, NormEquivalenceSandwich) {
  // 0.5 <= ||v||_x / |v| <= 1.5 for the conformal factor.
  double const lo = 0.5;
  double const hi = 1.5;
  // Worst ratio of a 16-stencil path to the straight segment.
  double const anisotropy = 1.0 / std::cos(std::atan(0.5) / 2.0);
  for (std::size_t p : nodes) {
    auto const dp = DistanceFromNode(nf, g, p);
    for (std::size_t k = 0; k < g.size(); ++k) {
      double const e = EuclideanNorm(g.Coord(k) - g.Coord(p));
      EXPECT_GE(dp.values[k], lo * e - 1e-9);
      EXPECT_LE(dp.values[k], hi * anisotropy * e + 1e-9);
    }
  }
}

TEST(LocalDistance, InterpolationAndAtNode) {
  auto const g = GridDomain::Rectangle(Square(-1, 1), 21, 21);
  auto const nf = NormField2::Euclidean(g.bounds());
  DistanceFrom const d(nf, g, {0, 0});
  EXPECT_EQ(d(g.Coord(g.NearestNode({0.5, 0.5}))), d.AtNode(g.NearestNode({0.5, 0.5})));
  EXPECT_NEAR(d({0.55, 0}), 0.55, 1e-12);
  EXPECT_THROW(d({2, 0}), DomainError);
}

}  // namespace
}  // namespace finslerhj
