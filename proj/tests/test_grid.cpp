#include "fracsphere/grid.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

using namespace fracsphere;

namespace {

const double kTwoPi = 2.0 * std::numbers::pi;

TEST(MakeGrid, SpacingFromBoxLength) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  EXPECT_DOUBLE_EQ(g.spacing(), kTwoPi / 64);
  EXPECT_EQ(g.size(), 64u);
}

TEST(MakeGrid, SiteCountIsPowerOfDimension) { EXPECT_EQ(make_grid(2, 16, 1.0).size(), 256u); }

TEST(MakeGrid, RejectsUnsupportedDimension) {
  EXPECT_THROW(make_grid(3, 16, 1.0), std::invalid_argument);
  EXPECT_THROW(make_grid(0, 16, 1.0), std::invalid_argument);
}

TEST(MakeGrid, RejectsNonPowerOfTwo) {
  EXPECT_THROW(make_grid(1, 24, 1.0), std::invalid_argument);
  EXPECT_THROW(make_grid(1, 2, 1.0), std::invalid_argument);
  EXPECT_THROW(make_grid(1, 16, -1.0), std::invalid_argument);
}

TEST(TorusMetric, MinimumImageAndSymmetry) {
  const GridSpec g = make_grid(2, 16, 1.0);
  const double h = g.spacing();
  EXPECT_DOUBLE_EQ(g.distance(g.site({0, 0}), g.site({15, 0})), h);
  EXPECT_DOUBLE_EQ(g.distance(g.site({0, 0}), g.site({8, 0})), 8 * h);
  EXPECT_DOUBLE_EQ(g.distance(g.site({1, 1}), g.site({14, 13})), std::hypot(3 * h, 4 * h));
  std::mt19937_64 rng(7);
  for (int k = 0; k < 500; ++k) {
    const std::size_t a = rng() % g.size(), b = rng() % g.size();
    EXPECT_EQ(g.distance(a, b), g.distance(b, a));
  }
}

TEST(BallHierarchy, RadiiDoublePerLevel) {
  const GridSpec g = make_grid(1, 128, kTwoPi);
  const BallHierarchy hier(g, 64, 0.1, 0, 4);
  for (int l = 0; l <= 4; ++l) EXPECT_DOUBLE_EQ(hier.radius(l), 0.1 * std::pow(2.0, l));
  for (int l = 0; l < 4; ++l) EXPECT_LT(hier.radius(l), hier.radius(l + 1));
  EXPECT_THROW(BallHierarchy(g, 64, 0.0, 0, 1), std::invalid_argument);
  EXPECT_THROW(BallHierarchy(g, 64, 0.1, 2, 1), std::invalid_argument);
}

TEST(CutoffSmooth, OneAtCenterZeroOutsideSupport) {
  const GridSpec g = make_grid(1, 256, kTwoPi);
  const BallHierarchy hier(g, 128, 0.2, 0, 2);
  const double h = g.spacing();
  for (int l = 0; l <= 2; ++l) {
    const ScalarField eta = cutoff_smooth(hier, l);
    EXPECT_EQ(eta[128], 1.0);
    for (std::size_t x = 0; x < g.size(); ++x) {
      const double d = g.distance(128, x);
      if (d <= hier.radius(l)) {
        EXPECT_EQ(eta[x], 1.0);
      }
      if (d >= 2.0 * hier.radius(l) + h) {
        EXPECT_EQ(eta[x], 0.0);
      }
    }
  }
}

TEST(CutoffSmooth, GradientBoundIndependentOfLevel) {
  const GridSpec g = make_grid(1, 256, kTwoPi);
  const BallHierarchy hier(g, 128, 0.1, 0, 2);
  for (int l = 0; l <= 2; ++l) {
    const double grad = max_discrete_gradient(cutoff_smooth(hier, l));
    EXPECT_LE(grad * hier.radius(l), kCutoffGradientConstant);
    EXPECT_GT(grad * hier.radius(l), 0.5);
  }
}

TEST(CutoffSmooth, GradientBoundTwoDimensions) {
  const GridSpec g = make_grid(2, 32, 1.0);
  const BallHierarchy hier(g, g.site({16, 16}), 0.1, 0, 1);
  for (int l = 0; l <= 1; ++l) {
    // forward differences over a diagonal step can exceed the radial slope by sqrt(2)
    EXPECT_LE(max_discrete_gradient(cutoff_smooth(hier, l)) * hier.radius(l), std::sqrt(2.0) * kCutoffGradientConstant);
  }
}

TEST(CutoffSmooth, Errors) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  const BallHierarchy hier(g, 32, 1.0, 0, 2);
  EXPECT_THROW(cutoff_smooth(hier, 3), std::out_of_range);
  EXPECT_THROW(cutoff_smooth(hier, 1), std::invalid_argument);  // 2 * 2 >= pi
  EXPECT_NO_THROW(cutoff_smooth(hier, 0));
}

TEST(Cutoffs, NestingRingsAndTelescoping) {
  const GridSpec g = make_grid(1, 256, kTwoPi);
  const BallHierarchy hier(g, 100, 0.1, 0, 3);
  for (int l = 0; l < 3; ++l) {
    const ScalarField a = hier.sharp_cutoff(l), b = hier.sharp_cutoff(l + 1);
    for (std::size_t x = 0; x < g.size(); ++x) EXPECT_LE(a[x], b[x]);
  }
  ScalarField sum(g);
  for (int l = 1; l <= 3; ++l) {
    const ScalarField ring = cutoff_ring(hier, l);
    for (std::size_t x = 0; x < g.size(); ++x) {
      EXPECT_GE(ring[x], 0.0);
      sum[x] += ring[x];
    }
  }
  const ScalarField top = cutoff_smooth(hier, 3), bottom = cutoff_smooth(hier, 0);
  for (std::size_t x = 0; x < g.size(); ++x) EXPECT_NEAR(sum[x], top[x] - bottom[x], 1e-15);
}

TEST(BallMean, ConstantField) {
  const GridSpec g = make_grid(2, 16, 1.0);
  const BallHierarchy hier(g, g.site({8, 8}), 0.2, 0, 1);
  EXPECT_DOUBLE_EQ(ball_mean(ScalarField(g, 3.25), hier, 1), 3.25);
  const VectorField v(g, 3, 0.5);
  for (double m : ball_mean(v, hier, 0)) EXPECT_DOUBLE_EQ(m, 0.5);
}

TEST(BallMean, OddFunctionAboutCenter) {
  const GridSpec g = make_grid(1, 128, kTwoPi);
  const BallHierarchy hier(g, 0, 0.5, 0, 1);
  // signed minimum-image coordinate relative to the origin
  const ScalarField f = ScalarField::sample(g, [&](Point q) { return q[0] < std::numbers::pi ? q[0] : q[0] - kTwoPi; });
  EXPECT_NEAR(ball_mean(f, hier, 0), 0.0, 1e-12);
  EXPECT_NEAR(ball_mean(f, hier, 1), 0.0, 1e-12);
}

TEST(BallMean, CosineMatchesDirectSum) {
  const GridSpec g = make_grid(1, 128, kTwoPi);
  const BallHierarchy hier(g, 0, std::numbers::pi / 4, 0, 0);
  const ScalarField f = ScalarField::sample(g, [](Point q) { return std::cos(q[0]); });
  const double h = g.spacing();
  double sum = 0.0;
  int count = 0;
  for (int k = -64; k < 64; ++k) {
    if (std::abs(k) * h <= std::numbers::pi / 4 * (1 + 1e-12)) {
      sum += std::cos(k * h);
      ++count;
    }
  }
  EXPECT_NEAR(ball_mean(f, hier, 0), sum / count, 1e-14);
}

TEST(BallMean, EmptyBallRejected) {
  const GridSpec g = make_grid(1, 16, 1.0);
  const BallHierarchy hier(g, 0, 0.01, 0, 0);
  EXPECT_THROW(ball_mean(ScalarField(g, 1.0), hier, 0), std::invalid_argument);
}

TEST(BallMean, InvariantUnderRelabeling) {
  // Reversing the axis maps the ball about the center onto itself.
  const GridSpec g = make_grid(1, 64, kTwoPi);
  const BallHierarchy hier(g, 0, 0.7, 0, 0);
  std::mt19937_64 rng(3);
  ScalarField f(g), r(g);
  for (auto& v : f.values) v = static_cast<double>(rng() % 1000) / 7.0;
  for (std::size_t x = 0; x < g.size(); ++x) r[(g.size() - x) % g.size()] = f[x];
  EXPECT_NEAR(ball_mean(f, hier, 0), ball_mean(r, hier, 0), 1e-12);
}

TEST(Region, BallIncludesBoundaryTies) {
  const GridSpec g = make_grid(1, 16, 16.0);
  const Region r = Region::ball(g, 8, 2.0);
  EXPECT_EQ(r.size(), 5u);
}

}  // namespace
