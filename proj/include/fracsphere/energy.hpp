#pragma once

// Discrete Besov-Slobodeckij energy, its first variation and gradient, the
// Euler-Lagrange residual and the potential operator T_{B,t}.

#include "fracsphere/frac_ops.hpp"
#include "fracsphere/grid.hpp"
#include "fracsphere/kernels.hpp"
#include "fracsphere/parallel.hpp"
#include "fracsphere/special.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracsphere {

struct EnergyParams {
  double s = 0.5;
  double p = 2.0;
  double eps_reg = 0.0;
  bool critical_mode = false;

  /// p = n / s.
  static EnergyParams critical(int n, double s, double eps_reg = 0.0) {
    return EnergyParams{s, n / s, eps_reg, true};
  }

  double kernel_exponent(int n) const { return n + s * p; }

  void validate(int n) const {
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("energy: s must lie in (0, 1)");
    if (!(p > 1.0)) throw std::invalid_argument("energy: p must exceed 1");
    if (!(eps_reg >= 0.0)) throw std::invalid_argument("energy: eps_reg must be nonnegative");
    if (critical_mode && p != n / s) throw std::invalid_argument("energy: critical_mode requires p = n/s");
  }
};

/// Pair weights w_xy = h^{2n} / dist(x, y)^{n + sp}. Tabulated by torus offset
/// below the streaming threshold, recomputed per pair above it; both paths
/// evaluate the same expression and agree bit for bit.
class PairKernel {
 public:
  static constexpr std::size_t kStreamThreshold = std::size_t{1} << 26;

  PairKernel(const GridSpec& g, const EnergyParams& params, std::size_t stream_threshold = kStreamThreshold)
      : grid_(g), exponent_(params.kernel_exponent(g.dim)), scale_(g.cell_volume() * g.cell_volume()) {
    const double pairs = static_cast<double>(g.size()) * static_cast<double>(g.size());
    if (pairs <= static_cast<double>(stream_threshold)) {
      table_.resize(g.size(), 0.0);
      for (std::size_t o = 1; o < g.size(); ++o) table_[o] = compute(o);
    }
  }

  double operator()(std::size_t x, std::size_t y) const {
    const std::size_t o = grid_.offset_site(x, y);
    return table_.empty() ? compute(o) : table_[o];
  }

  bool streamed() const { return table_.empty(); }
  const GridSpec& grid() const { return grid_; }

 private:
  double compute(std::size_t offset) const { return scale_ / std::pow(grid_.offset_distance(offset), exponent_); }

  GridSpec grid_;
  double exponent_;
  double scale_;
  std::vector<double> table_;
};

namespace detail {

inline double diff_sq(const VectorField& u, std::size_t x, std::size_t y) {
  double sq = 0.0;
  for (int i = 0; i < u.components; ++i) {
    const double d = u.at(x, i) - u.at(y, i);
    sq += d * d;
  }
  return sq;
}

// (|d|^2 + eps)^{p/2} - eps^{p/2}
inline double pair_power(double dsq, const EnergyParams& prm) {
  if (prm.eps_reg == 0.0) return dsq == 0.0 ? 0.0 : std::pow(dsq, 0.5 * prm.p);
  return std::pow(dsq + prm.eps_reg, 0.5 * prm.p) - std::pow(prm.eps_reg, 0.5 * prm.p);
}

// (|d|^2 + eps)^{(p-2)/2}, with 0^{p-2} * 0 taken as 0 when eps = 0.
inline double pair_slope(double dsq, const EnergyParams& prm) {
  if (prm.eps_reg == 0.0) return dsq == 0.0 ? 0.0 : std::pow(dsq, 0.5 * (prm.p - 2.0));
  return std::pow(dsq + prm.eps_reg, 0.5 * (prm.p - 2.0));
}

// pair_power(b) - pair_power(a) without cancellation against the magnitude.
inline double pair_power_change(const double* ua, const double* va, const double* ub, const double* vb, int n,
                                double dsq_old, const EnergyParams& prm) {
  // |Db|^2 - |Da|^2 = sum (Db - Da)(Db + Da). Db - Da is formed from the
  // per-site moves, which are exact for nearby iterates, so the change keeps
  // full relative accuracy however small it is.
  double delta = 0.0;
  for (int i = 0; i < n; ++i) {
    const double da = ua[i] - va[i];
    const double db = ub[i] - vb[i];
    const double moved = (ub[i] - ua[i]) - (vb[i] - va[i]);
    delta += moved * (db + da);
  }
  const double base = dsq_old + prm.eps_reg;
  if (base == 0.0) {
    const double dsq_new = delta;
    return pair_power(dsq_new, prm);
  }
  const double half_p = 0.5 * prm.p;
  return std::pow(base, half_p) * std::expm1(half_p * std::log1p(delta / base));
}

inline void check_grid(const GridSpec& a, const GridSpec& b, const char* what) {
  if (!(a == b)) throw std::invalid_argument(std::string(what) + ": grid mismatch");
}

inline void require_unit(const VectorField& u, const Region& region, const char* what, double tol = 1e-10) {
  for (auto x : region.sites) {
    double sq = 0.0;
    for (double v : u.sample(x)) sq += v * v;
    if (std::abs(std::sqrt(sq) - 1.0) > tol) throw std::invalid_argument(std::string(what) + ": u is not unit-valued");
  }
}

}  // namespace detail

/// E = sum_{x != y in region} w_xy |u(x) - u(y)|^p over ordered pairs.
inline double energy(const VectorField& u, const EnergyParams& params, const Region& region, const PairKernel& kernel) {
  detail::check_grid(u.grid, kernel.grid(), "energy");
  detail::check_grid(u.grid, region.grid, "energy");
  const auto& sites = region.sites;
  return ordered_sum(sites.size(), [&](std::size_t a) {
    const std::size_t x = sites[a];
    double acc = 0.0;
    for (std::size_t y : sites) {
      if (y == x) continue;
      acc += kernel(x, y) * detail::pair_power(detail::diff_sq(u, x, y), params);
    }
    return acc;
  });
}

inline double energy(const VectorField& u, const EnergyParams& params, const Region& region) {
  params.validate(u.grid.dim);
  return energy(u, params, region, PairKernel(u.grid, params));
}

inline double energy(const VectorField& u, const EnergyParams& params) {
  return energy(u, params, Region::full(u.grid));
}

/// Energy restricted to the sharp ball B_level of a hierarchy.
inline double energy(const VectorField& u, const EnergyParams& params, const BallHierarchy& hierarchy, int level) {
  return energy(u, params, hierarchy.ball(level));
}

/// E(v) - E(u) summed pair by pair, accurate relative to the change itself.
inline double energy_difference(const VectorField& u, const VectorField& v, const EnergyParams& params,
                                const PairKernel& kernel) {
  detail::check_grid(u.grid, v.grid, "energy_difference");
  const std::size_t n = u.sites();
  const int nc = u.components;
  return ordered_sum(n, [&](std::size_t x) {
    double acc = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      if (y == x) continue;
      const double dsq = detail::diff_sq(u, x, y);
      acc += kernel(x, y) * detail::pair_power_change(&u.values[x * nc], &u.values[y * nc], &v.values[x * nc],
                                                      &v.values[y * nc], nc, dsq, params);
    }
    return acc;
  });
}

/// [f]_{s,p,region} = energy^{1/p}.
inline double seminorm(const VectorField& f, double s, double p, const Region& region) {
  EnergyParams prm{s, p, 0.0, false};
  return std::pow(energy(f, prm, region), 1.0 / p);
}

inline double seminorm(const ScalarField& f, double s, double p, const Region& region) {
  return seminorm(as_vector(f), s, p, region);
}

inline double seminorm(const ScalarField& f, double s, double p) { return seminorm(f, s, p, Region::full(f.grid)); }

/// Discrete gradient of the (regularized) energy:
/// g(x) = 2p sum_{y != x} w_xy (|u(x)-u(y)|^2 + eps)^{(p-2)/2} (u(x) - u(y)).
inline VectorField energy_gradient(const VectorField& u, const EnergyParams& params, const PairKernel& kernel) {
  if (params.p < 2.0 && params.eps_reg == 0.0) {
    throw std::invalid_argument("energy_gradient: p < 2 requires eps_reg > 0");
  }
  detail::check_grid(u.grid, kernel.grid(), "energy_gradient");
  const std::size_t n = u.sites();
  const int nc = u.components;
  VectorField g(u.grid, nc);
  parallel_for(n, [&](std::size_t x) {
    std::vector<double> acc(nc, 0.0);
    for (std::size_t y = 0; y < n; ++y) {
      if (y == x) continue;
      const double c = kernel(x, y) * detail::pair_slope(detail::diff_sq(u, x, y), params);
      if (c == 0.0) continue;
      for (int i = 0; i < nc; ++i) acc[i] += c * (u.at(x, i) - u.at(y, i));
    }
    for (int i = 0; i < nc; ++i) g.at(x, i) = 2.0 * params.p * acc[i];
  });
  return g;
}

inline VectorField energy_gradient(const VectorField& u, const EnergyParams& params) {
  params.validate(u.grid.dim);
  return energy_gradient(u, params, PairKernel(u.grid, params));
}

/// Pointwise psi - (u . psi) u.
inline VectorField tangential_part(const VectorField& psi, const VectorField& u) {
  if (!(psi.grid == u.grid) || psi.components != u.components) {
    throw std::invalid_argument("tangent_project: shape mismatch");
  }
  VectorField out = psi;
  for (std::size_t x = 0; x < u.sites(); ++x) {
    double dot = 0.0;
    for (int i = 0; i < u.components; ++i) dot += u.at(x, i) * psi.at(x, i);
    for (int i = 0; i < u.components; ++i) out.at(x, i) -= dot * u.at(x, i);
  }
  return out;
}

/// d/dt E((u + t psi)/|u + t psi|) at t = 0 for unit u, via the chain rule
/// through the normalization: the pair form applied to the tangential part of psi.
inline double first_variation(const VectorField& u, const VectorField& psi, const EnergyParams& params,
                              const PairKernel& kernel) {
  detail::check_grid(u.grid, kernel.grid(), "first_variation");
  if (!u.is_unit(1e-10)) throw std::invalid_argument("first_variation: u is not unit-valued");
  const VectorField tang = tangential_part(psi, u);
  const std::size_t n = u.sites();
  const int nc = u.components;
  return ordered_sum(n, [&](std::size_t x) {
    double acc = 0.0;
    for (std::size_t y = 0; y < n; ++y) {
      if (y == x) continue;
      const double c = kernel(x, y) * detail::pair_slope(detail::diff_sq(u, x, y), params);
      if (c == 0.0) continue;
      double dot = 0.0;
      for (int i = 0; i < nc; ++i) dot += (u.at(x, i) - u.at(y, i)) * (tang.at(x, i) - tang.at(y, i));
      acc += c * dot;
    }
    return params.p * acc;
  });
}

inline double first_variation(const VectorField& u, const VectorField& psi, const EnergyParams& params) {
  params.validate(u.grid.dim);
  return first_variation(u, psi, params, PairKernel(u.grid, params));
}

/// Antisymmetric N x N matrix with entries in {-1, 0, 1}.
class SignMatrix {
 public:
  SignMatrix(int n, std::vector<int> entries) : n_(n), entries_(std::move(entries)) {
    if (entries_.size() != static_cast<std::size_t>(n) * n) throw std::invalid_argument("omega: wrong size");
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        const int v = (*this)(i, j);
        if (v < -1 || v > 1) throw std::invalid_argument("omega: entries must lie in {-1, 0, 1}");
        if (v != -(*this)(j, i)) throw std::invalid_argument("omega: matrix is not antisymmetric");
      }
    }
  }

  static SignMatrix zero(int n) { return SignMatrix(n, std::vector<int>(static_cast<std::size_t>(n) * n, 0)); }

  /// omega_ij = sign, omega_ji = -sign.
  static SignMatrix elementary(int n, int i, int j, int sign = 1) {
    std::vector<int> e(static_cast<std::size_t>(n) * n, 0);
    e[static_cast<std::size_t>(i) * n + j] = sign;
    e[static_cast<std::size_t>(j) * n + i] = -sign;
    return SignMatrix(n, std::move(e));
  }

  int size() const { return n_; }
  int operator()(int i, int j) const { return entries_[static_cast<std::size_t>(i) * n_ + j]; }
  SignMatrix operator-() const {
    std::vector<int> e(entries_);
    for (int& v : e) v = -v;
    return SignMatrix(n_, std::move(e));
  }

 private:
  int n_;
  std::vector<int> entries_;
};

/// Left side of the Euler-Lagrange system:
/// sum_{x != y} w |du|^{p-2} omega_ij (u^i(x) - u^i(y)) (u^j(x) phi(x) - u^j(y) phi(y)).
inline double el_residual(const VectorField& u, const ScalarField& phi, const SignMatrix& omega,
                          const EnergyParams& params, const Region& region, const PairKernel& kernel) {
  if (omega.size() != u.components) throw std::invalid_argument("el_residual: omega size must equal N");
  detail::check_grid(u.grid, phi.grid, "el_residual");
  detail::check_grid(u.grid, kernel.grid(), "el_residual");
  detail::require_unit(u, region, "el_residual");
  const int nc = u.components;
  const auto& sites = region.sites;
  return ordered_sum(sites.size(), [&](std::size_t a) {
    const std::size_t x = sites[a];
    double acc = 0.0;
    for (std::size_t y : sites) {
      if (y == x) continue;
      const double c = kernel(x, y) * detail::pair_slope(detail::diff_sq(u, x, y), params);
      if (c == 0.0) continue;
      double form = 0.0;
      for (int i = 0; i < nc; ++i) {
        const double di = u.at(x, i) - u.at(y, i);
        for (int j = 0; j < nc; ++j) {
          const int w = omega(i, j);
          if (w == 0) continue;
          form += w * di * (u.at(x, j) * phi[x] - u.at(y, j) * phi[y]);
        }
      }
      acc += c * form;
    }
    return acc;
  });
}

inline double el_residual(const VectorField& u, const ScalarField& phi, const SignMatrix& omega,
                          const EnergyParams& params, const Region& region) {
  params.validate(u.grid.dim);
  return el_residual(u, phi, omega, params, region, PairKernel(u.grid, params));
}

inline double el_residual(const VectorField& u, const ScalarField& phi, const SignMatrix& omega,
                          const EnergyParams& params) {
  return el_residual(u, phi, omega, params, Region::full(u.grid));
}

// ---------------------------------------------------------------------------
// T_{B,t}

enum class KernelImages { minimum_image, periodized };
enum class DiagonalRule { excluded, zeta_corrected };

struct RieszKernelOptions {
  KernelImages images = KernelImages::periodized;
  DiagonalRule diagonal = DiagonalRule::zeta_corrected;
};

/// |x - z|^{t-n} on the torus, tabulated by offset.
///
/// minimum_image uses the torus distance directly. periodized sums the lattice
/// images (up to an additive constant, which cancels in every difference the
/// operator forms). With zeta_corrected the z = x cell carries the weight
/// -Z_n((n-t)/2) h^{t-n}, which makes h^n sum_z k(x - z) g(z) accurate to
/// O(h^{t+2}) for smooth g; with excluded it is zero.
class RieszKernel {
 public:
  RieszKernel(const GridSpec& g, double t, RieszKernelOptions opts = {}) : grid_(g), t_(t), opts_(opts) {
    if (!(t > 0.0 && t < g.dim)) throw std::invalid_argument("RieszKernel: t outside (0, n)");
    const double a = t - g.dim;
    if (opts.images == KernelImages::periodized) {
      table_ = periodized_power_table(g, a, default_images(g.dim));
    } else {
      table_.assign(g.size(), 0.0);
      for (std::size_t o = 1; o < g.size(); ++o) table_[o] = std::pow(g.offset_distance(o), a);
    }
    table_[0] = opts.diagonal == DiagonalRule::zeta_corrected
                    ? -lattice_zeta(g.dim, 0.5 * (g.dim - t)) * std::pow(g.spacing(), a)
                    : 0.0;
  }

  double operator()(std::size_t x, std::size_t z) const { return table_[grid_.offset_site(x, z)]; }
  double order() const { return t_; }
  const GridSpec& grid() const { return grid_; }
  const RieszKernelOptions& options() const { return opts_; }

 private:
  GridSpec grid_;
  double t_;
  RieszKernelOptions opts_;
  std::vector<double> table_;
};

/// Smallest admissible t: T_{B,t} requires t > 1 - (1 - s) p.
inline double t_lower_bound(const EnergyParams& params) { return 1.0 - (1.0 - params.s) * params.p; }

inline void check_t_admissible(double t, const EnergyParams& params) {
  if (!(t > 0.0 && t < 1.0)) throw std::invalid_argument("t must lie in (0, 1), got " + std::to_string(t));
  if (!(t > t_lower_bound(params))) {
    throw std::invalid_argument("t = " + std::to_string(t) + " violates t > 1 - (1 - s) p = " +
                                std::to_string(t_lower_bound(params)));
  }
}

namespace detail {
// a^i(x) = sum_{y in B, y != x} w |du|^{p-2} (u^i(x) - u^i(y))
inline VectorField pair_flux(const VectorField& u, const EnergyParams& params, const Region& region,
                             const PairKernel& kernel) {
  const int nc = u.components;
  VectorField flux(u.grid, nc);
  const auto& sites = region.sites;
  parallel_for(sites.size(), [&](std::size_t a) {
    const std::size_t x = sites[a];
    for (std::size_t y : sites) {
      if (y == x) continue;
      const double c = kernel(x, y) * pair_slope(diff_sq(u, x, y), params);
      if (c == 0.0) continue;
      for (int i = 0; i < nc; ++i) flux.at(x, i) += c * (u.at(x, i) - u.at(y, i));
    }
  });
  return flux;
}
}  // namespace detail

/// T_{B,t} u^i(z) = sum_{x != y in B} w |du|^{p-2} (u^i(x) - u^i(y)) (k(x - z) - k(y - z)),
/// one value per grid site z. Evaluated as 2 sum_x k(x - z) a^i(x), which is
/// the same sum regrouped by the antisymmetry of the pair flux.
inline VectorField t_operator(const VectorField& u, const Region& region, const EnergyParams& params,
                              const PairKernel& kernel, const RieszKernel& riesz) {
  check_t_admissible(riesz.order(), params);
  detail::check_grid(u.grid, riesz.grid(), "t_operator");
  const VectorField flux = detail::pair_flux(u, params, region, kernel);
  const int nc = u.components;
  VectorField out(u.grid, nc);
  parallel_for(u.sites(), [&](std::size_t z) {
    for (std::size_t x : region.sites) {
      const double k = riesz(x, z);
      for (int i = 0; i < nc; ++i) out.at(z, i) += k * flux.at(x, i);
    }
    for (int i = 0; i < nc; ++i) out.at(z, i) *= 2.0;
  });
  return out;
}

inline VectorField t_operator(const VectorField& u, const Region& region, double t, const EnergyParams& params,
                              RieszKernelOptions opts = {}) {
  params.validate(u.grid.dim);
  check_t_admissible(t, params);
  return t_operator(u, region, params, PairKernel(u.grid, params), RieszKernel(u.grid, t, opts));
}

struct DualityResult {
  double lhs = 0.0;  // <Lambda^t phi, T_{B,t} u^i>
  double rhs = 0.0;  // (1 / c~_t) sum w |du|^{p-2} (u^i(x) - u^i(y)) (phi(x) - phi(y))
  double relative_error = 0.0;
};

/// Both sides of the duality between Lambda^t phi and T_{B,t} u^i, computed
/// independently (spectral Lambda^t on one side, a plain pair sum on the other).
inline DualityResult duality_check(const VectorField& u, const ScalarField& phi, const Region& region, double t,
                                   const EnergyParams& params, int component, RieszKernelOptions opts = {}) {
  params.validate(u.grid.dim);
  check_t_admissible(t, params);
  if (component < 0 || component >= u.components) throw std::out_of_range("duality_check: component");
  const PairKernel kernel(u.grid, params);
  const VectorField T = t_operator(u, region, params, kernel, RieszKernel(u.grid, t, opts));
  const ScalarField lap_phi = frac_laplacian(phi, {t, FracVariant::spectral});
  DualityResult r;
  r.lhs = grid_inner(lap_phi, T.component(component));

  const auto& sites = region.sites;
  const double pair_sum = ordered_sum(sites.size(), [&](std::size_t a) {
    const std::size_t x = sites[a];
    double acc = 0.0;
    for (std::size_t y : sites) {
      if (y == x) continue;
      const double c = kernel(x, y) * detail::pair_slope(detail::diff_sq(u, x, y), params);
      acc += c * (u.at(x, component) - u.at(y, component)) * (phi[x] - phi[y]);
    }
    return acc;
  });
  r.rhs = pair_sum / riesz_constant(u.grid.dim, t);
  const double scale = std::max(std::abs(r.lhs), std::abs(r.rhs));
  r.relative_error = scale == 0.0 ? 0.0 : std::abs(r.lhs - r.rhs) / std::abs(r.rhs == 0.0 ? scale : r.rhs);
  return r;
}

/// u(z) . T_{B,t} u(z) in two algebraically equivalent forms, for z in B:
/// the direct contraction and the second-difference form
/// -1/2 sum w |du|^{p-2} (u(x) - u(y)) . (u(x) + u(y) - 2u(z)) (k(x-z) - k(y-z)),
/// which holds because (u(x) - u(y)) . (u(x) + u(y)) = |u(x)|^2 - |u(y)|^2 = 0.
struct OrthogonalForms {
  std::vector<double> direct;
  std::vector<double> second_difference;
};

inline OrthogonalForms orthogonal_forms(const VectorField& u, const Region& region, double t,
                                        const EnergyParams& params, RieszKernelOptions opts = {}) {
  detail::require_unit(u, region, "orthogonal_forms");
  params.validate(u.grid.dim);
  const PairKernel kernel(u.grid, params);
  const RieszKernel riesz(u.grid, t, opts);
  const VectorField T = t_operator(u, region, params, kernel, riesz);
  const int nc = u.components;
  OrthogonalForms out;
  out.direct.resize(region.size());
  out.second_difference.resize(region.size());
  const auto& sites = region.sites;
  for (std::size_t c = 0; c < sites.size(); ++c) {
    const std::size_t z = sites[c];
    double dot = 0.0;
    for (int i = 0; i < nc; ++i) dot += u.at(z, i) * T.at(z, i);
    out.direct[c] = dot;
  }
  parallel_for(sites.size(), [&](std::size_t c) {
    const std::size_t z = sites[c];
    double acc = 0.0;
    for (std::size_t x : sites) {
      for (std::size_t y : sites) {
        if (y == x) continue;
        const double w = kernel(x, y) * detail::pair_slope(detail::diff_sq(u, x, y), params);
        double form = 0.0;
        for (int i = 0; i < nc; ++i)
          form += (u.at(x, i) - u.at(y, i)) * (u.at(x, i) + u.at(y, i) - 2.0 * u.at(z, i));
        acc += w * form * (riesz(x, z) - riesz(y, z));
      }
    }
    out.second_difference[c] = -0.5 * acc;
  });
  return out;
}

struct HoleFillResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

/// sum_{x in B_L} sum_{y in B_L \ B_K} w |du|^p  <=  [u]_L^p - [u]_K^p.
inline HoleFillResult holefill_check(const VectorField& u, const BallHierarchy& hierarchy, int K, int L,
                                     const EnergyParams& params) {
  if (!(K < L)) throw std::invalid_argument("holefill_check: requires K < L");
  params.validate(u.grid.dim);
  const PairKernel kernel(u.grid, params);
  const Region outer = hierarchy.ball(L);
  const Region inner = hierarchy.ball(K);
  const std::vector<char> in_inner = inner.mask();
  HoleFillResult r;
  const auto& sites = outer.sites;
  r.lhs = ordered_sum(sites.size(), [&](std::size_t a) {
    const std::size_t x = sites[a];
    double acc = 0.0;
    for (std::size_t y : sites) {
      if (y == x || in_inner[y]) continue;
      acc += kernel(x, y) * detail::pair_power(detail::diff_sq(u, x, y), params);
    }
    return acc;
  });
  const double eL = energy(u, params, outer, kernel);
  const double eK = energy(u, params, inner, kernel);
  r.rhs = eL - eK;
  r.pass = r.lhs <= r.rhs + 1e-12 * std::max(1.0, eL);
  return r;
}

}  // namespace fracsphere
