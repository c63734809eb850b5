#pragma once

// Fractional Laplacian, Riesz potential, Littlewood-Paley bank and the
// three-term commutator H_alpha on the periodic grid.

#include "fracsphere/grid.hpp"
#include "fracsphere/kernels.hpp"
#include "fracsphere/parallel.hpp"
#include "fracsphere/spectral.hpp"
#include "fracsphere/special.hpp"

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracsphere {

enum class FracVariant { spectral, singular_integral };

struct FracOpParams {
  double order = 0.5;
  FracVariant variant = FracVariant::spectral;
};

namespace detail {

inline void check_laplacian_order(const FracOpParams& params) {
  const double t = params.order;
  const bool ok = params.variant == FracVariant::spectral ? (t >= 0.0 && t < 1.0) : (t > 0.0 && t < 1.0);
  if (!ok) throw std::invalid_argument("frac_laplacian: order " + std::to_string(t) + " outside the admissible range");
}

// c * sum_{y != x} h^n (f(x) - f(y)) K(x - y) with K the periodized |r|^{-n-t}.
// The diagonal cell is omitted.
inline ScalarField singular_laplacian(const ScalarField& f, double t) {
  const GridSpec& g = f.grid;
  const std::vector<double> kernel = periodized_power_table(g, -(g.dim + t), default_images(g.dim));
  const double c = frac_laplacian_constant(g.dim, t) * g.cell_volume();
  ScalarField out(g);
  parallel_for(g.size(), [&](std::size_t x) {
    double acc = 0.0;
    for (std::size_t y = 0; y < g.size(); ++y) {
      if (y == x) continue;
      acc += (f[x] - f[y]) * kernel[g.offset_site(x, y)];
    }
    out[x] = c * acc;
  });
  return out;
}

}  // namespace detail

/// Lambda^t f = (-Delta)^{t/2} f. The spectral variant multiplies by |xi|^t
/// (zero mode annihilated, so order 0 removes the mean); the singular variant
/// evaluates the hypersingular integral by punctured-lattice quadrature.
inline ScalarField frac_laplacian(const ScalarField& f, const FracOpParams& params) {
  detail::check_laplacian_order(params);
  if (params.variant == FracVariant::spectral) {
    if (!f.grid.periodic) throw std::invalid_argument("frac_laplacian: spectral variant needs a periodic grid");
    return Multiplier::power(f.grid, params.order).apply(f);
  }
  return detail::singular_laplacian(f, params.order);
}

inline VectorField frac_laplacian(const VectorField& f, const FracOpParams& params) {
  VectorField out(f.grid, f.components);
  for (int i = 0; i < f.components; ++i) out.set_component(i, frac_laplacian(f.component(i), params));
  return out;
}

inline constexpr double kRieszMeanTolerance = 1e-10;

/// Lambda^{-t} F for mean-zero F, t in (0, n).
inline ScalarField riesz_potential(const ScalarField& f, double t) {
  if (!(t > 0.0 && t < f.grid.dim)) throw std::invalid_argument("riesz_potential: order outside (0, n)");
  const double mean = grid_mean(f);
  if (std::abs(mean) > kRieszMeanTolerance) {
    throw std::invalid_argument("riesz_potential: input mean " + std::to_string(mean) + " is not zero");
  }
  return Multiplier::power(f.grid, -t).apply(f);
}

inline VectorField riesz_potential(const VectorField& f, double t) {
  VectorField out(f.grid, f.components);
  for (int i = 0; i < f.components; ++i) out.set_component(i, riesz_potential(f.component(i), t));
  return out;
}

namespace detail {
// Smooth transition: 1 for r <= 1, 0 for r >= 2.
inline double lp_bump(double r) {
  if (r <= 1.0) return 1.0;
  if (r >= 2.0) return 0.0;
  const double x = r - 1.0;
  const double a = std::exp(-1.0 / (1.0 - x));
  const double b = std::exp(-1.0 / x);
  return a / (a + b);
}
}  // namespace detail

/// Littlewood-Paley multipliers p_j(xi) = phi(|xi| 2^-j) - phi(|xi| 2^{1-j}).
/// The lowest band absorbs every nonzero frequency below 2^{j_min} and the top
/// band everything above 2^{j_max - 1}, so the bank is an exact partition of
/// unity on the nonzero grid frequencies.
class LPBank {
 public:
  LPBank(const GridSpec& g, int level_min, int level_max) : grid_(g), level_min_(level_min), level_max_(level_max) {
    if (level_min > level_max) throw std::invalid_argument("LPBank: empty level range");
    for (int j = level_min; j <= level_max; ++j) {
      bands_.push_back(Multiplier::radial(g, [&](double xi) {
        if (xi == 0.0) return 0.0;
        const double upper = (j == level_max) ? 1.0 : detail::lp_bump(std::ldexp(xi, -j));
        const double lower = (j == level_min) ? 0.0 : detail::lp_bump(std::ldexp(xi, 1 - j));
        return upper - lower;
      }));
    }
  }

  /// Bank from j_min up to the first level whose band reaches the Nyquist
  /// frequency.
  static LPBank covering(const GridSpec& g, int level_min = 0) {
    double top = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) top = std::max(top, frequency_magnitude(g, k));
    int level_max = level_min;
    while (std::ldexp(1.0, level_max) < top) ++level_max;
    return LPBank(g, level_min, level_max);
  }

  int level_min() const { return level_min_; }
  int level_max() const { return level_max_; }
  const GridSpec& grid() const { return grid_; }

  const Multiplier& band(int j) const {
    if (j < level_min_ || j > level_max_) throw std::out_of_range("LPBank: level " + std::to_string(j) + " out of range");
    return bands_[static_cast<std::size_t>(j - level_min_)];
  }

 private:
  GridSpec grid_;
  int level_min_;
  int level_max_;
  std::vector<Multiplier> bands_;
};

inline ScalarField lp_project(const ScalarField& f, const LPBank& bank, int j) { return bank.band(j).apply(f); }

/// H_alpha(a, b) = Lambda^alpha(ab) - b Lambda^alpha a - a Lambda^alpha b.
inline ScalarField commutator_H(const ScalarField& a, const ScalarField& b, double alpha) {
  if (!(a.grid == b.grid)) throw std::invalid_argument("commutator_H: grid mismatch");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("commutator_H: alpha outside (0, 1)");
  const Multiplier lap = Multiplier::power(a.grid, alpha);
  ScalarField ab(a.grid);
  for (std::size_t x = 0; x < ab.size(); ++x) ab[x] = a[x] * b[x];
  const ScalarField lab = lap.apply(ab);
  const ScalarField la = lap.apply(a);
  const ScalarField lb = lap.apply(b);
  ScalarField out(a.grid);
  for (std::size_t x = 0; x < out.size(); ++x) out[x] = lab[x] - (b[x] * la[x] + a[x] * lb[x]);
  return out;
}

}  // namespace fracsphere
