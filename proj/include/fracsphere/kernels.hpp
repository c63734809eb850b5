#pragma once

// Translation-invariant power kernels |r|^a on the torus, tabulated by offset.

#include "fracsphere/grid.hpp"
#include "fracsphere/special.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace fracsphere {

namespace detail {

// Integral of |m|^b over R^n outside the cube [-S, S]^n, for b < -n.
inline double outside_cube_integral(int n, double b, double S) {
  if (n == 1) return 2.0 * std::pow(S, b + 1.0) / (-b - 1.0);
  // 8 * int_0^{pi/4} (S / cos th)^{b+2} / (-(b+2)) d th, Simpson on 64 panels
  const int panels = 64;
  const double hi = 0.25 * std::numbers::pi;
  const double step = hi / panels;
  double acc = 0.0;
  for (int k = 0; k <= panels; ++k) {
    const double th = k * step;
    const double w = (k == 0 || k == panels) ? 1.0 : (k % 2 ? 4.0 : 2.0);
    acc += w * std::pow(1.0 / std::cos(th), b + 2.0);
  }
  acc *= step / 3.0;
  return 8.0 * std::pow(S, b + 2.0) / (-(b + 2.0)) * acc;
}

}  // namespace detail

/// Lattice-periodized |r|^a tabulated on grid offsets (entry 0 is left at 0).
///
/// For a < -n the image sum converges and is taken literally. For -n < a < 0
/// each image is shifted by |mL|^a; the divergent shift is a constant and
/// drops out of every kernel difference. Images with |m|_inf > K are replaced
/// by the isotropic quadratic Taylor term integrated over the far field.
inline std::vector<double> periodized_power_table(const GridSpec& g, double a, int images) {
  const int n = g.dim;
  if (!(a < 0.0) || std::abs(a + n) < 1e-12) throw std::invalid_argument("periodized_power_table: unsupported exponent");
  const bool integrable = a < -n;
  const double L = g.box_length;
  const double S = images + 0.5;
  const double quad_coef = a * (a + n - 2.0) / (2.0 * n) * std::pow(L, a - 2.0) *
                           detail::outside_cube_integral(n, a - 2.0, S);
  const double const_tail = integrable ? std::pow(L, a) * detail::outside_cube_integral(n, a, S) : 0.0;

  std::vector<double> table(g.size(), 0.0);
  for (std::size_t o = 1; o < g.size(); ++o) {
    const MultiIndex idx = g.multi_index(o);
    double r[2] = {0.0, 0.0};
    for (int k = 0; k < n; ++k) r[k] = g.wrap_offset(idx[k]) * g.spacing();
    const double r2 = r[0] * r[0] + r[1] * r[1];
    double sum = 0.0;
    const int reach1 = n == 2 ? images : 0;
    for (int m1 = -reach1; m1 <= reach1; ++m1) {
      for (int m0 = -images; m0 <= images; ++m0) {
        const double x = r[0] + m0 * L;
        const double y = r[1] + m1 * L;
        double term = std::pow(x * x + y * y, 0.5 * a);
        if (!integrable && (m0 != 0 || m1 != 0)) {
          term -= std::pow(L * L * (m0 * m0 + m1 * m1), 0.5 * a);
        }
        sum += term;
      }
    }
    table[o] = sum + const_tail + quad_coef * r2;
  }
  return table;
}

inline int default_images(int dim) { return dim == 1 ? 64 : 12; }

}  // namespace fracsphere
