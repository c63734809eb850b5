#include "fracsphere/energy.hpp"
#include "fracsphere/lab.hpp"
#include "fracsphere/solver.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace fracsphere;

namespace {

const double kTwoPi = 2.0 * std::numbers::pi;
const GridSpec kSmall{1, 24, kTwoPi, true};

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

VectorField winding(const GridSpec& g, double a = 0.3) {
  return VectorField::sample(g, 2, [&](Point q) {
    const double th = q[0] + a * std::sin(q[0]);
    return std::vector<double>{std::cos(th), std::sin(th)};
  });
}

// Rotation of R^3 about a fixed axis.
std::vector<double> rotation3() {
  const double c = std::cos(0.7), s = std::sin(0.7);
  const double c2 = std::cos(-1.1), s2 = std::sin(-1.1);
  // Rz(0.7) * Rx(-1.1)
  return {c, -s * c2, s * s2, s, c * c2, -c * s2, 0.0, s2, c2};
}

VectorField rotate(const VectorField& u, const std::vector<double>& Q) {
  VectorField out(u.grid, u.components);
  const int n = u.components;
  for (std::size_t x = 0; x < u.sites(); ++x)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) out.at(x, i) += Q[i * n + j] * u.at(x, j);
  return out;
}

VectorField random_field(const GridSpec& g, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  VectorField f(g, n);
  for (double& v : f.values) v = uniform(rng, -1.0, 1.0);
  return f;
}

TEST(Energy, ConstantMapIsZero) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  EXPECT_EQ(energy(VectorField(g, 2, 0.6), EnergyParams{0.5, 2.0}), 0.0);
  EXPECT_EQ(energy(VectorField(g, 3, -1.0), EnergyParams{0.3, 3.5}), 0.0);
}

TEST(Energy, TwoSiteToy) {
  const GridSpec g{1, 2, 3.0, true};
  const double h = 1.5;
  VectorField u(g, 1, std::vector<double>{0.25, -0.5});
  for (auto [s, p] : {std::pair{0.5, 2.0}, std::pair{0.3, 3.0}}) {
    const double expect = 2.0 * h * h * std::pow(0.75, p) / std::pow(h, 1.0 + s * p);
    EXPECT_NEAR(energy(u, EnergyParams{s, p}), expect, 1e-15 * expect);
  }
}

TEST(Energy, RotationInvariance) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  const VectorField u = random_unit_field(g, 3, 4);
  const EnergyParams prm{0.5, 2.0};
  EXPECT_LE(rel(energy(rotate(u, rotation3()), prm), energy(u, prm)), 1e-12);
}

TEST(Energy, MatchesNaiveLoop) {
  const VectorField u = random_unit_field(kSmall, 3, 8);
  for (auto [s, p] : {std::pair{0.5, 2.0}, std::pair{0.4, 2.5}}) {
    const EnergyParams prm{s, p};
    EXPECT_LE(rel(energy(u, prm), oracle::energy(u, s, p, oracle::all_sites(kSmall))), 1e-12);
    const Region ball = Region::ball(kSmall, 12, 1.2);
    EXPECT_LE(rel(energy(u, prm, ball), oracle::energy(u, s, p, ball.sites)), 1e-12);
  }
}

TEST(Energy, TwoDimensionalMatchesNaiveLoop) {
  const GridSpec g = make_grid(2, 8, 1.0);
  const VectorField u = random_unit_field(g, 3, 2);
  const EnergyParams prm = EnergyParams::critical(2, 0.8);
  EXPECT_LE(rel(energy(u, prm), oracle::energy(u, 0.8, 2.5, oracle::all_sites(g))), 1e-12);
}

TEST(Energy, ZeroIffConstant) {
  const GridSpec g = make_grid(1, 32, kTwoPi);
  VectorField u(g, 2, 0.0);
  for (std::size_t x = 0; x < g.size(); ++x) u.at(x, 0) = 1.0;
  EXPECT_LE(energy(u, EnergyParams{0.5, 2.0}), 1e-14);
  u.at(5, 0) = 1.0 + 1e-3;
  EXPECT_GT(energy(u, EnergyParams{0.5, 2.0}), 1e-14);
}

TEST(Energy, TranslationInvariance) {
  const GridSpec g = make_grid(2, 16, 1.0);
  const VectorField u = random_unit_field(g, 2, 17);
  VectorField shifted(g, 2);
  for (std::size_t x = 0; x < g.size(); ++x) {
    const MultiIndex idx = g.multi_index(x);
    const std::size_t y = g.site({idx[0] + 3, idx[1] + 5});
    for (int i = 0; i < 2; ++i) shifted.at(y, i) = u.at(x, i);
  }
  const EnergyParams prm{0.5, 2.0};
  EXPECT_LE(rel(energy(shifted, prm), energy(u, prm)), 1e-12);
}

TEST(Energy, ScalesWithDifferences) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  const VectorField f = random_field(g, 2, 3);
  VectorField scaled = f;
  for (double& v : scaled.values) v *= -2.5;
  const EnergyParams prm{0.5, 3.0};
  EXPECT_LE(rel(energy(scaled, prm), std::pow(2.5, 3.0) * energy(f, prm)), 1e-12);
}

TEST(Energy, StreamedKernelIsBitIdentical) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  const VectorField u = random_unit_field(g, 2, 5);
  const EnergyParams prm{0.5, 2.0};
  const PairKernel table(g, prm), streamed(g, prm, 0);
  ASSERT_FALSE(table.streamed());
  ASSERT_TRUE(streamed.streamed());
  EXPECT_EQ(energy(u, prm, Region::full(g), table), energy(u, prm, Region::full(g), streamed));
  for (std::size_t x = 0; x < 64; x += 7)
    for (std::size_t y = 0; y < 64; y += 5) {
      if (x != y) {
        EXPECT_EQ(table(x, y), streamed(x, y));
        EXPECT_EQ(table(x, y), table(y, x));
        EXPECT_GT(table(x, y), 0.0);
      }
    }
}

TEST(Energy, ParameterValidation) {
  const GridSpec g = make_grid(1, 16, kTwoPi);
  const VectorField u(g, 2, 0.0);
  EXPECT_THROW(energy(u, EnergyParams{1.0, 2.0}), std::invalid_argument);
  EXPECT_THROW(energy(u, EnergyParams{0.5, 1.0}), std::invalid_argument);
  EXPECT_THROW(energy(u, EnergyParams{0.5, 3.0, 0.0, true}), std::invalid_argument);
  EXPECT_EQ(EnergyParams::critical(1, 0.5).p, 2.0);
}

TEST(Seminorm, MonotoneInRegion) {
  const GridSpec g = make_grid(1, 128, kTwoPi);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const ScalarField f = random_band_limited(g, seed);
    double prev = 0.0;
    for (double r : {0.2, 0.4, 0.8, 1.6, 3.2}) {
      const double v = seminorm(f, 0.5, 2.0, Region::ball(g, 40, r));
      EXPECT_LE(prev, v);
      prev = v;
    }
    EXPECT_LE(prev, seminorm(f, 0.5, 2.0));
  }
}

TEST(Seminorm, ConstantIsZero) { EXPECT_EQ(seminorm(ScalarField(make_grid(1, 32, 1.0), 4.0), 0.5, 2.0), 0.0); }

TEST(Seminorm, CosineMatchesDoubleSum) {
  for (int M : {64, 128}) {
    const GridSpec g = make_grid(1, M, kTwoPi);
    const ScalarField f = ScalarField::sample(g, [](Point q) { return std::cos(q[0]); });
    const double expect = std::sqrt(oracle::energy(as_vector(f), 0.5, 2.0, oracle::all_sites(g)));
    EXPECT_LE(rel(seminorm(f, 0.5, 2.0), expect), 1e-12) << "M=" << M;
  }
}

TEST(FirstVariation, RadialDirectionVanishes) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  const VectorField u = random_unit_field(g, 3, 6);
  VectorField psi = u;
  for (std::size_t x = 0; x < g.size(); ++x)
    for (int i = 0; i < 3; ++i) psi.at(x, i) *= 1.0 + 0.5 * std::sin(0.3 * x);
  EXPECT_LE(std::abs(first_variation(u, psi, EnergyParams{0.5, 2.0})), 1e-10);
  EXPECT_EQ(first_variation(u, VectorField(g, 3), EnergyParams{0.5, 2.0}), 0.0);
}

TEST(FirstVariation, MatchesCentralDifference) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  for (auto [s, p] : {std::pair{0.5, 2.0}, std::pair{0.4, 3.0}}) {
    const EnergyParams prm{s, p};
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const VectorField u = random_unit_field(g, 2, seed);
      const VectorField psi = random_field(g, 2, seed + 100);
      auto E = [&](double t) {
        VectorField v = u;
        for (std::size_t i = 0; i < v.values.size(); ++i) v.values[i] += t * psi.values[i];
        return energy(project_sphere(v), prm);
      };
      const double t = 1e-5;
      const double fd = (E(t) - E(-t)) / (2 * t);
      EXPECT_LE(rel(first_variation(u, psi, prm), fd), 1e-6) << "seed=" << seed << " p=" << p;
    }
  }
}

TEST(FirstVariation, AdditiveInDirection) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  const VectorField u = random_unit_field(g, 3, 9);
  const VectorField a = random_field(g, 3, 10), b = random_field(g, 3, 11);
  VectorField ab = a;
  for (std::size_t i = 0; i < ab.values.size(); ++i) ab.values[i] += b.values[i];
  const EnergyParams prm{0.5, 2.0};
  const double lhs = first_variation(u, ab, prm);
  EXPECT_NEAR(lhs, first_variation(u, a, prm) + first_variation(u, b, prm), 1e-10 * std::max(1.0, std::abs(lhs)));
}

TEST(FirstVariation, RejectsNonUnitField) {
  const GridSpec g = make_grid(1, 16, kTwoPi);
  EXPECT_THROW(first_variation(VectorField(g, 2, 0.3), VectorField(g, 2), EnergyParams{0.5, 2.0}),
               std::invalid_argument);
}

TEST(EnergyGradient, ConstantFieldGivesZero) {
  const GridSpec g = make_grid(1, 32, kTwoPi);
  for (double v : energy_gradient(VectorField(g, 2, 0.7), EnergyParams{0.5, 2.0}).values) EXPECT_EQ(v, 0.0);
}

TEST(EnergyGradient, DirectionalDerivativeOfUnconstrainedEnergy) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  for (auto prm : {EnergyParams{0.5, 2.0}, EnergyParams{0.5, 3.0}, EnergyParams{0.5, 1.5, 1e-2}}) {
    const VectorField u = random_field(g, 2, 31), psi = random_field(g, 2, 32);
    const VectorField grad = energy_gradient(u, prm);
    double dot = 0.0;
    for (std::size_t i = 0; i < u.values.size(); ++i) dot += grad.values[i] * psi.values[i];
    auto E = [&](double t) {
      VectorField v = u;
      for (std::size_t i = 0; i < v.values.size(); ++i) v.values[i] += t * psi.values[i];
      // the regularized energy sum_{x != y} w (|du|^2 + eps)^{p/2}
      if (prm.eps_reg == 0.0) return energy(v, prm);
      double e = 0.0;
      const PairKernel w(g, prm);
      for (std::size_t x = 0; x < g.size(); ++x)
        for (std::size_t y = 0; y < g.size(); ++y)
          if (x != y) e += w(x, y) * std::pow(oracle::diff_norm(v, x, y) * oracle::diff_norm(v, x, y) + prm.eps_reg, prm.p / 2);
      return e;
    };
    const double t = 1e-5;
    EXPECT_LE(rel(dot, (E(t) - E(-t)) / (2 * t)), 1e-6) << "p=" << prm.p;
  }
}

TEST(EnergyGradient, Equivariance) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  const VectorField u = random_unit_field(g, 3, 12);
  const auto Q = rotation3();
  const EnergyParams prm{0.5, 2.0};
  const VectorField a = energy_gradient(rotate(u, Q), prm), b = rotate(energy_gradient(u, prm), Q);
  double scale = 0.0;
  for (double v : b.values) scale = std::max(scale, std::abs(v));
  for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-12 * scale);
}

TEST(EnergyGradient, RequiresRegularizationBelowTwo) {
  const GridSpec g = make_grid(1, 16, kTwoPi);
  EXPECT_THROW(energy_gradient(VectorField(g, 2), EnergyParams{0.5, 1.5}), std::invalid_argument);
}

TEST(ElResidual, TrivialCases) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  const VectorField u = random_unit_field(g, 3, 13);
  const ScalarField phi = smooth_bump(g, {3.0, 0.0}, 1.0);
  const EnergyParams prm{0.5, 2.0};
  EXPECT_EQ(el_residual(u, phi, SignMatrix::zero(3), prm), 0.0);
  VectorField c(g, 3, 0.0);
  for (std::size_t x = 0; x < g.size(); ++x) c.at(x, 2) = 1.0;
  EXPECT_EQ(el_residual(c, phi, SignMatrix::elementary(3, 0, 2), prm), 0.0);
}

TEST(ElResidual, NegatedOmegaNegatesExactly) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  const VectorField u = random_unit_field(g, 3, 14);
  const ScalarField phi = smooth_bump(g, {2.0, 0.0}, 1.5);
  const EnergyParams prm{0.5, 2.0};
  const SignMatrix w(3, {0, 1, -1, -1, 0, 1, 1, -1, 0});
  EXPECT_EQ(el_residual(u, phi, -w, prm), -el_residual(u, phi, w, prm));
}

TEST(ElResidual, MatchesNaiveLoop) {
  const VectorField u = random_unit_field(kSmall, 3, 15);
  const ScalarField phi = smooth_bump(kSmall, {3.0, 0.0}, 2.0);
  const std::vector<int> om{0, 1, 0, -1, 0, -1, 0, 1, 0};
  for (auto [s, p] : {std::pair{0.5, 2.0}, std::pair{0.4, 3.0}}) {
    const EnergyParams prm{s, p};
    const Region ball = Region::ball(kSmall, 12, 2.5);
    const double got = el_residual(u, phi, SignMatrix(3, om), prm, ball);
    EXPECT_LE(rel(got, oracle::el_residual(u, phi, om, s, p, ball.sites)), 1e-12);
  }
}

TEST(ElResidual, RejectsBadOmega) {
  EXPECT_THROW(SignMatrix(2, {0, 1, 1, 0}), std::invalid_argument);
  EXPECT_THROW(SignMatrix(2, {0, 2, -2, 0}), std::invalid_argument);
  EXPECT_THROW(SignMatrix(2, {1, 0, 0, 0}), std::invalid_argument);
  EXPECT_THROW(SignMatrix(2, {0, 1, -1}), std::invalid_argument);
}

TEST(TOperator, ConstantFieldGivesZero) {
  const GridSpec g = make_grid(1, 32, kTwoPi);
  const VectorField T = t_operator(VectorField(g, 2, 0.5), Region::full(g), 0.45, EnergyParams{0.5, 2.0});
  for (double v : T.values) EXPECT_EQ(v, 0.0);
}

TEST(TOperator, LiteralKernelMatchesNaiveTripleLoop) {
  const VectorField u = random_unit_field(kSmall, 2, 16);
  const RieszKernelOptions literal{KernelImages::minimum_image, DiagonalRule::excluded};
  for (auto [s, p, t] : {std::tuple{0.5, 2.0, 0.45}, std::tuple{0.6, 2.5, 0.3}}) {
    const Region ball = Region::ball(kSmall, 12, 2.0);
    const VectorField T = t_operator(u, ball, t, EnergyParams{s, p}, literal);
    const auto ref = oracle::t_operator(u, s, p, t, ball.sites);
    double scale = 0.0;
    for (double v : ref) scale = std::max(scale, std::abs(v));
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_LE(std::abs(T.values[i] - ref[i]), 1e-12 * scale);
  }
}

TEST(TOperator, RejectsInadmissibleOrder) {
  const GridSpec g = make_grid(1, 32, kTwoPi);
  const VectorField u = random_unit_field(g, 2, 1);
  EXPECT_THROW(t_operator(u, Region::full(g), -0.1, EnergyParams{0.5, 2.0}), std::invalid_argument);
  EXPECT_THROW(t_operator(u, Region::full(g), 1.0, EnergyParams{0.5, 2.0}), std::invalid_argument);
  // s = 0.2, p = 1.05 requires t > 1 - 0.8 * 1.05 = 0.16
  EXPECT_THROW(t_operator(u, Region::full(g), 0.1, EnergyParams{0.2, 1.05, 1e-3}), std::invalid_argument);
  EXPECT_NO_THROW(t_operator(u, Region::full(g), 0.2, EnergyParams{0.2, 1.05, 1e-3}));
}

TEST(TOperator, DualityAtModerateResolution) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  const VectorField u = winding(g);
  // off-center so neither component's pairing cancels by symmetry
  const ScalarField phi = smooth_bump(g, {1.0, 0.0}, 2.0);
  const EnergyParams prm{0.5, 2.0};
  for (int i = 0; i < 2; ++i) {
    const DualityResult d = duality_check(u, phi, Region::full(g), 0.45, prm, i);
    EXPECT_LE(d.relative_error, 1e-3) << "component " << i;
  }
}

TEST(TOperator, OrthogonalityForms) {
  const GridSpec g = make_grid(1, 32, kTwoPi);
  const VectorField u = random_unit_field(g, 3, 18);
  const Region ball = Region::ball(g, 16, 1.5);
  const OrthogonalForms f = orthogonal_forms(u, ball, 0.45, EnergyParams{0.5, 2.0});
  double scale = 0.0;
  for (double v : f.direct) scale = std::max(scale, std::abs(v));
  for (std::size_t c = 0; c < f.direct.size(); ++c) EXPECT_NEAR(f.direct[c], f.second_difference[c], 1e-11 * scale);
}

TEST(HoleFill, ConstantField) {
  const GridSpec g = make_grid(1, 64, kTwoPi);
  const BallHierarchy hier(g, 32, 0.2, 0, 3);
  const HoleFillResult r = holefill_check(VectorField(g, 2, 0.1), hier, 0, 1, EnergyParams{0.5, 2.0});
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.rhs, 0.0);
  EXPECT_TRUE(r.pass);
  EXPECT_THROW(holefill_check(VectorField(g, 2), hier, 1, 1, EnergyParams{0.5, 2.0}), std::invalid_argument);
}

TEST(HoleFill, RandomAndSmoothFields) {
  const GridSpec g = make_grid(1, 128, kTwoPi);
  const BallHierarchy hier(g, 64, 0.1, 0, 4);
  const EnergyParams prm{0.5, 2.0};
  for (int L = 1; L <= 4; ++L) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      EXPECT_TRUE(holefill_check(random_unit_field(g, 3, seed), hier, L - 1, L, prm).pass);
    }
    const HoleFillResult r = holefill_check(winding(g, 0.0), hier, L - 1, L, prm);
    EXPECT_TRUE(r.pass);
    EXPECT_GT(r.rhs - r.lhs, 0.0);  // the inner-ball pairs leave strictly positive slack
  }
}

}  // namespace
