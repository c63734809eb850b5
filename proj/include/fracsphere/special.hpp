#pragma once

// Normalization constants of the fractional operators and the lattice zeta
// values used by the corrected punctured-lattice quadrature.

#include <boost/math/special_functions/gamma.hpp>

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace fracsphere {

/// c_{n,t} such that c * int (f(x) - f(y)) / |x-y|^{n+t} dy has plane-wave
/// eigenvalue |xi|^t.
inline double frac_laplacian_constant(int n, double t) {
  return t * std::pow(2.0, t - 1.0) * std::tgamma(0.5 * (n + t)) /
         (std::pow(std::numbers::pi, 0.5 * n) * std::tgamma(1.0 - 0.5 * t));
}

/// c~_{n,t} such that c~ * int |x-y|^{t-n} F(y) dy has plane-wave eigenvalue
/// |xi|^{-t}.
inline double riesz_constant(int n, double t) {
  return std::tgamma(0.5 * (n - t)) / (std::pow(2.0, t) * std::pow(std::numbers::pi, 0.5 * n) * std::tgamma(0.5 * t));
}

/// Analytically continued lattice sum Z_n(sigma) = sum_{j in Z^n, j != 0}
/// |j|^{-2 sigma}, evaluated with the theta-function splitting at w = 1.
/// Valid for 0 < sigma < n/2 and sigma > n/2 (the pole sits at n/2).
inline double lattice_zeta(int n, double sigma) {
  if (n != 1 && n != 2) throw std::invalid_argument("lattice_zeta: n must be 1 or 2");
  const double half = 0.5 * n;
  if (!(sigma > 0.0) || std::abs(sigma - half) < 1e-12) throw std::invalid_argument("lattice_zeta: sigma out of range");
  const double pi = std::numbers::pi;
  auto tail = [](double a, double x) {
    // x^{-a} Gamma(a, x) for a > 0; for a <= 0 use the recurrence on Gamma(a, x).
    if (a > 0.0) return std::pow(x, -a) * boost::math::tgamma(a, x);
    // Gamma(a, x) = (Gamma(a+1, x) - x^a e^{-x}) / a
    const double g = (boost::math::tgamma(a + 1.0, x) - std::pow(x, a) * std::exp(-x)) / a;
    return std::pow(x, -a) * g;
  };
  double sum = -1.0 / sigma - 1.0 / (half - sigma);
  const int reach = 6;  // e^{-pi * 36} is far below double precision
  for (int a = -reach; a <= reach; ++a) {
    for (int b = (n == 2 ? -reach : 0); b <= (n == 2 ? reach : 0); ++b) {
      if (a == 0 && b == 0) continue;
      const double x = pi * (a * a + b * b);
      sum += tail(sigma, x) + tail(half - sigma, x);
    }
  }
  return sum * std::pow(pi, sigma) / std::tgamma(sigma);
}

}  // namespace fracsphere
