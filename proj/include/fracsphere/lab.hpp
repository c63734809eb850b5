#pragma once

// Diagnostics on computable instances: decay of localized energies, Hoelder
// quotients, the pointwise Lagrange identity, the three-case kernel split and
// the seeded inequality probes run against frozen constants.

#include "fracsphere/energy.hpp"
#include "fracsphere/frac_ops.hpp"
#include "fracsphere/grid.hpp"
#include "fracsphere/spectral.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracsphere {

// ---------------------------------------------------------------------------
// Seeded sampling

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Trigonometric polynomial with integer frequencies 1 <= |m|_inf <= kmax and
/// coefficients uniform in [-1, 1] scaled by 1/|m|.
inline ScalarField random_band_limited(const GridSpec& g, std::uint64_t seed, int kmax = 8) {
  std::mt19937_64 rng(seed);
  ScalarField f(g);
  const double base = 2.0 * std::numbers::pi / g.box_length;
  const int reach1 = g.dim == 2 ? kmax : 0;
  for (int m1 = -reach1; m1 <= reach1; ++m1) {
    for (int m0 = -kmax; m0 <= kmax; ++m0) {
      // one representative per +-m pair
      if (m1 < 0 || (m1 == 0 && m0 <= 0)) continue;
      const double mag = std::hypot(m0, m1);
      const double a = uniform(rng, -1.0, 1.0) / mag;
      const double b = uniform(rng, -1.0, 1.0) / mag;
      for (std::size_t x = 0; x < g.size(); ++x) {
        const Point q = g.position(x);
        const double arg = base * (m0 * q[0] + m1 * q[1]);
        f[x] += a * std::cos(arg) + b * std::sin(arg);
      }
    }
  }
  return f;
}

/// Independent uniformly random directions on S^{N-1} at every site.
inline VectorField random_unit_field(const GridSpec& g, int components, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  VectorField u(g, components);
  std::vector<double> v(components);
  for (std::size_t x = 0; x < g.size(); ++x) {
    double sq = 0.0;
    do {
      sq = 0.0;
      for (double& c : v) {
        c = uniform(rng, -1.0, 1.0);
        sq += c * c;
      }
    } while (sq > 1.0 || sq < 1e-4);
    const double norm = std::sqrt(sq);
    for (int i = 0; i < components; ++i) u.at(x, i) = v[i] / norm;
  }
  return u;
}

// ---------------------------------------------------------------------------
// Decay of localized energies

struct DecayRow {
  int level = 0;
  double radius = 0.0;
  double energy = 0.0;
  std::size_t sites = 0;
  bool fitted = false;
  double fit_residual = std::numeric_limits<double>::quiet_NaN();  // log energy minus fitted line
};

struct DecayTable {
  std::vector<DecayRow> rows;
  std::optional<double> theta;  // empty when no level has positive energy
  double intercept = 0.0;
  double fit_residual = std::numeric_limits<double>::quiet_NaN();  // RMS over fitted levels
  bool monotone = true;
};

inline constexpr std::size_t kDecayMinSites = 8;

/// [u]^p on every ball of the hierarchy and the least-squares slope of
/// log energy against log radius. Levels below 1, balls with fewer than 8
/// sites and levels with zero energy are left out of the fit.
inline DecayTable decay_profile(const VectorField& u, const BallHierarchy& hierarchy, const EnergyParams& params) {
  if (hierarchy.levels() < 4) throw std::invalid_argument("decay_profile: hierarchy must span at least 4 levels");
  params.validate(u.grid.dim);
  const PairKernel kernel(u.grid, params);
  DecayTable table;
  std::vector<double> lx, ly;
  for (int l = hierarchy.level_min; l <= hierarchy.level_max; ++l) {
    const Region ball = hierarchy.ball(l);
    DecayRow row{l, hierarchy.radius(l), energy(u, params, ball, kernel), ball.size()};
    row.fitted = l >= 1 && row.sites >= kDecayMinSites && row.energy > 0.0;
    if (!table.rows.empty() && row.energy < table.rows.back().energy) table.monotone = false;
    if (row.fitted) {
      lx.push_back(std::log(row.radius));
      ly.push_back(std::log(row.energy));
    }
    table.rows.push_back(row);
  }
  if (lx.empty()) return table;
  if (lx.size() == 1) {
    table.theta = 0.0;
    table.intercept = ly[0];
    table.fit_residual = 0.0;
  } else {
    const double k = static_cast<double>(lx.size());
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / k;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / k;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
      sxx += (lx[i] - mx) * (lx[i] - mx);
      sxy += (lx[i] - mx) * (ly[i] - my);
    }
    table.theta = sxy / sxx;
    table.intercept = my - *table.theta * mx;
  }
  double ss = 0.0;
  std::size_t used = 0;
  for (auto& row : table.rows) {
    if (!row.fitted) continue;
    row.fit_residual = std::log(row.energy) - (table.intercept + *table.theta * std::log(row.radius));
    ss += row.fit_residual * row.fit_residual;
    ++used;
  }
  table.fit_residual = std::sqrt(ss / static_cast<double>(used));
  return table;
}

// ---------------------------------------------------------------------------
// Hoelder quotients

struct HolderBand {
  double d_min = 0.0;  // band is [d_min, 2 d_min)
  double sup_quotient = 0.0;
};

struct HolderRow {
  double beta = 0.0;
  std::vector<HolderBand> bands;
  double spread = std::numeric_limits<double>::infinity();  // max / min band quotient
  bool stable = false;
};

struct HolderFit {
  std::optional<double> best_beta;  // empty when no beta is stable
  std::vector<HolderRow> table;
};

inline constexpr double kHolderStabilityFactor = 2.0;

/// For each beta, sup |u(x) - u(y)| / dist^beta over all site pairs, split by
/// dyadic distance bands [2^k h, 2^{k+1} h). A beta is stable when the band
/// sups stay within a factor 2 of each other; the largest stable beta wins.
inline HolderFit holder_fit(const VectorField& u, const std::vector<double>& beta_grid) {
  const GridSpec& g = u.grid;
  if (g.size() < 4) throw std::invalid_argument("holder_fit: degenerate grid");
  if (beta_grid.empty()) throw std::invalid_argument("holder_fit: empty beta grid");
  for (double b : beta_grid) {
    if (!(b > 0.0 && b <= 1.0)) throw std::invalid_argument("holder_fit: beta grid must lie in (0, 1]");
  }
  const double h = g.spacing();
  // largest |du| at each distinct pair distance (a finite offset set)
  std::map<double, double> sup_by_distance;
  for (std::size_t x = 0; x < g.size(); ++x) {
    for (std::size_t y = x + 1; y < g.size(); ++y) {
      double& slot = sup_by_distance[g.distance(x, y)];
      slot = std::max(slot, std::sqrt(detail::diff_sq(u, x, y)));
    }
  }
  auto band_of = [h](double d) { return static_cast<std::size_t>(std::floor(std::log2(d / h) + 1e-9)); };
  const std::size_t nb = band_of(sup_by_distance.rbegin()->first) + 1;

  HolderFit fit;
  for (double beta : beta_grid) {
    HolderRow row;
    row.beta = beta;
    for (std::size_t k = 0; k < nb; ++k) row.bands.push_back({std::ldexp(h, static_cast<int>(k)), 0.0});
    for (const auto& [d, du] : sup_by_distance) {
      auto& band = row.bands[band_of(d)];
      band.sup_quotient = std::max(band.sup_quotient, du / std::pow(d, beta));
    }
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (const auto& b : row.bands) {
      lo = std::min(lo, b.sup_quotient);
      hi = std::max(hi, b.sup_quotient);
    }
    if (hi == 0.0) {
      row.spread = 1.0;
    } else if (lo > 0.0) {
      row.spread = hi / lo;
    }
    row.stable = row.spread <= kHolderStabilityFactor;
    if (row.stable && (!fit.best_beta || beta > *fit.best_beta)) fit.best_beta = beta;
    fit.table.push_back(std::move(row));
  }
  return fit;
}

// ---------------------------------------------------------------------------
// Lagrange identity

struct LagrangeResult {
  double lhs = 0.0;  // |v|^2
  double rhs = 0.0;  // (u.v)^2 + sum_{i<j} (u_i v_j - u_j v_i)^2
  bool equal = false;
  double bound_lhs = 0.0;  // |v|
  double bound_rhs = 0.0;  // C (|u.v| + max over elementary omega |u^j omega_ij v^i|)
  bool bound_holds = false;
};

inline constexpr double kLagrangeTolerance = 1e-12;

/// sqrt(1 + N(N-1)/2).
inline double lagrange_constant(int components) { return std::sqrt(1.0 + components * (components - 1) / 2.0); }

inline LagrangeResult lagrange_check(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size() || u.empty()) throw std::invalid_argument("lagrange_check: size mismatch");
  const int n = static_cast<int>(u.size());
  double uu = 0.0, vv = 0.0, uv = 0.0;
  for (int i = 0; i < n; ++i) {
    uu += u[i] * u[i];
    vv += v[i] * v[i];
    uv += u[i] * v[i];
  }
  if (std::abs(std::sqrt(uu) - 1.0) > kLagrangeTolerance) throw std::invalid_argument("lagrange_check: u is not a unit vector");
  double cross_sq = 0.0, cross_max = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const double c = u[i] * v[j] - u[j] * v[i];
      cross_sq += c * c;
      cross_max = std::max(cross_max, std::abs(c));
    }
  }
  LagrangeResult r;
  r.lhs = vv;
  r.rhs = uv * uv + cross_sq;
  r.equal = std::abs(r.lhs - r.rhs) <= kLagrangeTolerance * std::max(1.0, r.lhs);
  r.bound_lhs = std::sqrt(vv);
  r.bound_rhs = lagrange_constant(n) * (std::abs(uv) + cross_max);
  r.bound_holds = r.bound_lhs <= r.bound_rhs * (1.0 + kLagrangeTolerance);
  return r;
}

struct LagrangeSweep {
  int components = 0;
  std::size_t samples = 0;
  std::size_t identity_failures = 0;
  std::size_t bound_failures = 0;
  double max_abs_error = 0.0;
};

/// Random unit u and v with entries uniform in [-1, 1].
inline LagrangeSweep lagrange_sweep(int components, std::size_t samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LagrangeSweep sweep{components, samples};
  std::vector<double> u(components), v(components);
  for (std::size_t k = 0; k < samples; ++k) {
    double sq = 0.0;
    do {
      sq = 0.0;
      for (double& c : u) {
        c = uniform(rng, -1.0, 1.0);
        sq += c * c;
      }
    } while (sq < 1e-4);
    const double norm = std::sqrt(sq);
    for (double& c : u) c /= norm;
    for (double& c : v) c = uniform(rng, -1.0, 1.0);
    const LagrangeResult r = lagrange_check(u, v);
    sweep.max_abs_error = std::max(sweep.max_abs_error, std::abs(r.lhs - r.rhs));
    if (!r.equal) ++sweep.identity_failures;
    if (!r.bound_holds) ++sweep.bound_failures;
  }
  return sweep;
}

// ---------------------------------------------------------------------------
// Three-case kernel split

struct KernelCaseResult {
  int case_id = 0;
  double lhs = 0.0;
  double rhs = 0.0;
  bool pass = false;
};

/// Case 1: |x-y| <= |x-z|/2 or |x-y| <= |y-z|/2. Otherwise Case 2 when
/// |x-z| <= |y-z| and Case 3 when |x-z| > |y-z|.
inline int kernel_case(double dxy, double dxz, double dyz) {
  if (dxy <= 0.5 * dxz || dxy <= 0.5 * dyz) return 1;
  return dxz <= dyz ? 2 : 3;
}

/// Evaluates ||x-z|^{b-n} - |y-z|^{b-n}| and the case majorant
/// |x-y|^eps d^{b-eps-n}, with d = min(|x-z|, |y-z|) raised to the negative
/// power in Case 1 (i.e. the larger of the two candidates), |x-z| in Case 2
/// and |y-z| in Case 3. Passes iff lhs <= C rhs.
inline KernelCaseResult kernel_case_check(std::span<const double> x, std::span<const double> y,
                                          std::span<const double> z, double beta, double eps, double C) {
  const std::size_t n = x.size();
  if (n == 0 || y.size() != n || z.size() != n) throw std::invalid_argument("kernel_case_check: dimension mismatch");
  if (!(beta > 0.0 && beta < static_cast<double>(n))) throw std::invalid_argument("kernel_case_check: beta outside (0, n)");
  if (!(eps > 0.0 && eps <= 1.0)) throw std::invalid_argument("kernel_case_check: eps outside (0, 1]");
  auto dist = [n](std::span<const double> a, std::span<const double> b) {
    double sq = 0.0;
    for (std::size_t k = 0; k < n; ++k) sq += (a[k] - b[k]) * (a[k] - b[k]);
    return std::sqrt(sq);
  };
  const double dxy = dist(x, y), dxz = dist(x, z), dyz = dist(y, z);
  if (dxz == 0.0 || dyz == 0.0) throw std::invalid_argument("kernel_case_check: z coincides with x or y");
  const double a = beta - static_cast<double>(n);
  KernelCaseResult r;
  r.case_id = kernel_case(dxy, dxz, dyz);
  r.lhs = std::abs(std::pow(dxz, a) - std::pow(dyz, a));
  const double e = a - eps;
  switch (r.case_id) {
    case 1: r.rhs = std::pow(dxy, eps) * std::min(std::pow(dxz, e), std::pow(dyz, e)); break;
    case 2: r.rhs = std::pow(dxy, eps) * std::pow(dxz, e); break;
    default: r.rhs = std::pow(dxy, eps) * std::pow(dyz, e); break;
  }
  r.pass = r.lhs <= C * r.rhs;
  return r;
}

// ---------------------------------------------------------------------------
// Seeded probes

struct ProbeRow {
  std::string id;
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
};

struct ProbeReport {
  std::string name;
  std::vector<ProbeRow> rows;
  std::size_t sample_count = 0;
  double worst_ratio = 0.0;
  double frozen_C = std::numeric_limits<double>::quiet_NaN();
  bool pass = false;
  std::uint64_t seed = 0;
};

namespace detail {

// Appends a row unless both sides vanish (0/0 rows carry no information).
inline void add_probe_row(ProbeReport& rep, std::string id, double lhs, double rhs) {
  ++rep.sample_count;
  if (lhs == 0.0 && rhs == 0.0) return;
  const double ratio = rhs == 0.0 ? std::numeric_limits<double>::infinity() : lhs / rhs;
  rep.worst_ratio = std::max(rep.worst_ratio, ratio);
  rep.rows.push_back({std::move(id), lhs, rhs, ratio});
}

inline void judge(ProbeReport& rep, double C) {
  rep.frozen_C = C;
  rep.pass = !std::isnan(C) && rep.worst_ratio <= C;
}

inline void check_seeds(const std::vector<std::uint64_t>& seeds, const char* what) {
  if (seeds.empty()) throw std::invalid_argument(std::string(what) + ": empty seed list");
}

}  // namespace detail

/// Minimal exact rational for the exponent arithmetic check.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d = 1) : num(n), den(d) {
    if (den == 0) throw std::domain_error("Rational: zero denominator");
    if (den < 0) {
      num = -num;
      den = -den;
    }
    const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
    if (g > 1) {
      num /= g;
      den /= g;
    }
  }
  friend Rational operator+(Rational a, Rational b) { return {a.num * b.den + b.num * a.den, a.den * b.den}; }
  friend Rational operator-(Rational a, Rational b) { return {a.num * b.den - b.num * a.den, a.den * b.den}; }
  friend Rational operator*(Rational a, Rational b) { return {a.num * b.num, a.den * b.den}; }
  friend Rational operator/(Rational a, Rational b) { return {a.num * b.den, a.den * b.num}; }
  friend bool operator==(Rational a, Rational b) { return a.num == b.num && a.den == b.den; }
  friend bool operator<(Rational a, Rational b) { return a.num * b.den < b.num * a.den; }
  explicit operator double() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// p* = n p / (n - (s - t) p); requires 0 <= t < s < 1 and 1 < p < n / (s - t).
template <class T>
T sobolev_exponent(T n, T s, T t, T p) {
  const T zero(0), one(1);
  if (t < zero || !(t < s) || !(s < one)) throw std::invalid_argument("sobolev: need 0 <= t < s < 1");
  const T denom = n - (s - t) * p;
  if (!(one < p) || !(zero < denom)) throw std::invalid_argument("sobolev: p must lie in (1, n / (s - t))");
  return n * p / denom;
}

struct SobolevSetup {
  GridSpec grid = make_grid(1, 128, 2.0 * std::numbers::pi);
  double s = 0.5;
  double t = 0.25;
  double p = 2.0;
};

/// ||Lambda^t f||_{p*} against [f]_{s,p} on the full torus for seeded
/// band-limited fields.
inline ProbeReport sobolev_probe(const SobolevSetup& setup, const std::vector<std::uint64_t>& seeds, double C) {
  detail::check_seeds(seeds, "sobolev_probe");
  const double n = setup.grid.dim;
  const double pstar = sobolev_exponent(n, setup.s, setup.t, setup.p);
  ProbeReport rep;
  rep.name = "sobolev";
  rep.seed = seeds.front();
  for (auto seed : seeds) {
    const ScalarField f = random_band_limited(setup.grid, seed);
    const double lhs = grid_norm(frac_laplacian(f, {setup.t, FracVariant::spectral}), pstar);
    const double rhs = seminorm(f, setup.s, setup.p);
    detail::add_probe_row(rep, std::to_string(seed), lhs, rhs);
  }
  detail::judge(rep, C);
  return rep;
}

struct SobolevDegeneracy {
  double t_near = 0.0;
  double t_far = 0.0;
  double worst_near = 0.0;
  double worst_far = 0.0;
  bool grows = false;  // worst_near > worst_far
};

/// Worst Sobolev ratio at t = s - 0.01 and t = s - 0.2 over the same seeds.
inline SobolevDegeneracy sobolev_degeneracy(SobolevSetup setup, const std::vector<std::uint64_t>& seeds) {
  SobolevDegeneracy d;
  d.t_near = setup.s - 0.01;
  d.t_far = setup.s - 0.2;
  setup.t = d.t_near;
  d.worst_near = sobolev_probe(setup, seeds, std::numeric_limits<double>::infinity()).worst_ratio;
  setup.t = d.t_far;
  d.worst_far = sobolev_probe(setup, seeds, std::numeric_limits<double>::infinity()).worst_ratio;
  d.grows = d.worst_near > d.worst_far;
  return d;
}

struct CommutatorSetup {
  GridSpec grid = make_grid(1, 128, 2.0 * std::numbers::pi);
  double alpha = 0.5;
  double eps = 0.0;
  double p = 2.0;
  double p1 = 2.0;
  double p2 = 2.0;

  /// Rejects exponents off 1/p = 1/p1 + 1/p2 - (alpha - eps)/n.
  void validate() const {
    if (!(alpha > 0.0 && alpha < 1.0)) throw std::invalid_argument("commutator_probe: alpha outside (0, 1)");
    if (!(eps >= 0.0 && eps < alpha)) throw std::invalid_argument("commutator_probe: eps outside [0, alpha)");
    if (!(p > 1.0 && p1 > 1.0 && p2 > 1.0)) throw std::invalid_argument("commutator_probe: exponents must exceed 1");
    const double gap = 1.0 / p - (1.0 / p1 + 1.0 / p2 - (alpha - eps) / grid.dim);
    if (std::abs(gap) > 1e-12) {
      throw std::invalid_argument("commutator_probe: exponents violate 1/p = 1/p1 + 1/p2 - (alpha - eps)/n");
    }
  }
};

/// ||Lambda^eps H_alpha(a, b)||_p against ||Lambda^alpha a||_p1 ||Lambda^alpha b||_p2
/// for seeded band-limited pairs (a from seed, b from seed + 2^32).
inline ProbeReport commutator_probe(const CommutatorSetup& setup, const std::vector<std::uint64_t>& seeds, double C) {
  setup.validate();
  detail::check_seeds(seeds, "commutator_probe");
  ProbeReport rep;
  rep.name = "commutator";
  rep.seed = seeds.front();
  const Multiplier la = Multiplier::power(setup.grid, setup.alpha);
  const Multiplier le = Multiplier::power(setup.grid, setup.eps);
  for (auto seed : seeds) {
    const ScalarField a = random_band_limited(setup.grid, seed);
    const ScalarField b = random_band_limited(setup.grid, seed + (std::uint64_t{1} << 32));
    const double lhs = grid_norm(le.apply(commutator_H(a, b, setup.alpha)), setup.p);
    const double rhs = grid_norm(la.apply(a), setup.p1) * grid_norm(la.apply(b), setup.p2);
    detail::add_probe_row(rep, std::to_string(seed), lhs, rhs);
  }
  detail::judge(rep, C);
  return rep;
}

struct KernelCaseSetup {
  int dim = 1;
  double beta = 0.5;
  double eps = 0.3;
  std::size_t per_case = 100000;
};

/// Random triples x, y = x + r1 e1, z = x + r2 e2 with log-uniform radii in
/// [1e-4, 10] and random directions, drawn until every case holds per_case
/// samples. Rows record the worst triple of each case.
inline ProbeReport kernel_case_probe(const KernelCaseSetup& setup, std::uint64_t seed, double C) {
  if (setup.dim < 1 || setup.dim > 2) throw std::invalid_argument("kernel_case_probe: dim must be 1 or 2");
  std::mt19937_64 rng(seed);
  ProbeReport rep;
  rep.name = "kernel_case";
  rep.seed = seed;
  std::array<std::size_t, 3> count{};
  std::array<KernelCaseResult, 3> worst{};
  std::array<double, 3> worst_ratio{};
  const std::size_t limit = 1000 * setup.per_case;
  auto direction = [&](std::array<double, 2>& d) {
    if (setup.dim == 1) {
      d = {uniform01(rng) < 0.5 ? -1.0 : 1.0, 0.0};
    } else {
      const double th = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      d = {std::cos(th), std::sin(th)};
    }
  };
  std::size_t draws = 0;
  while ((count[0] < setup.per_case || count[1] < setup.per_case || count[2] < setup.per_case) && draws < limit) {
    ++draws;
    std::array<double, 2> x{uniform(rng, -1.0, 1.0), setup.dim == 2 ? uniform(rng, -1.0, 1.0) : 0.0};
    std::array<double, 2> e1, e2;
    direction(e1);
    direction(e2);
    const double r1 = std::pow(10.0, uniform(rng, -4.0, 1.0));
    const double r2 = std::pow(10.0, uniform(rng, -4.0, 1.0));
    std::array<double, 2> y{x[0] + r1 * e1[0], x[1] + r1 * e1[1]};
    std::array<double, 2> z{x[0] + r2 * e2[0], x[1] + r2 * e2[1]};
    const std::span<const double> sx(x.data(), setup.dim), sy(y.data(), setup.dim), sz(z.data(), setup.dim);
    if (sx[0] == sz[0] && (setup.dim == 1 || sx[1] == sz[1])) continue;
    if (sy[0] == sz[0] && (setup.dim == 1 || sy[1] == sz[1])) continue;
    const KernelCaseResult r = kernel_case_check(sx, sy, sz, setup.beta, setup.eps, C);
    const auto k = static_cast<std::size_t>(r.case_id - 1);
    if (count[k] >= setup.per_case) continue;
    ++count[k];
    ++rep.sample_count;
    const double ratio = r.lhs / r.rhs;
    if (ratio > worst_ratio[k]) {
      worst_ratio[k] = ratio;
      worst[k] = r;
    }
  }
  for (std::size_t k = 0; k < 3; ++k) {
    if (count[k] < setup.per_case) throw std::runtime_error("kernel_case_probe: case " + std::to_string(k + 1) + " undersampled");
    rep.rows.push_back({"case" + std::to_string(k + 1), worst[k].lhs, worst[k].rhs, worst_ratio[k]});
    rep.worst_ratio = std::max(rep.worst_ratio, worst_ratio[k]);
  }
  detail::judge(rep, C);
  return rep;
}

struct LpSupSetup {
  GridSpec grid = make_grid(1, 128, 2.0 * std::numbers::pi);
  double s = 0.5;
  double t = 0.25;
  double p = 2.0;
};

/// Per level j: sup |Lambda^t P_j f| against 2^{j(n/p + t - s)} [f]_{s,p}.
inline ProbeReport lp_sup_bound_probe(const ScalarField& f, const LPBank& bank, double s, double t, double p,
                                      ProbeReport rep) {
  if (!(t >= 0.0 && t < s && s < 1.0 && p > 1.0)) throw std::invalid_argument("lp_sup_bound_probe: need 0 <= t < s < 1, p > 1");
  const double n = f.grid.dim;
  const double semi = seminorm(f, s, p);
  const Multiplier lt = Multiplier::power(f.grid, t);
  for (int j = bank.level_min(); j <= bank.level_max(); ++j) {
    const double lhs = grid_norm((lt * bank.band(j)).apply(f), std::numeric_limits<double>::infinity());
    const double rhs = std::pow(2.0, j * (n / p + t - s)) * semi;
    detail::add_probe_row(rep, rep.name + ":" + std::to_string(j), lhs, rhs);
  }
  return rep;
}

inline ProbeReport lp_sup_bound_probe(const LpSupSetup& setup, const std::vector<std::uint64_t>& seeds, double C) {
  detail::check_seeds(seeds, "lp_sup_bound_probe");
  const LPBank bank = LPBank::covering(setup.grid);
  ProbeReport rep;
  rep.name = "lp_sup";
  rep.seed = seeds.front();
  for (auto seed : seeds) {
    ProbeReport part;
    part.name = std::to_string(seed);
    part = lp_sup_bound_probe(random_band_limited(setup.grid, seed), bank, setup.s, setup.t, setup.p, part);
    rep.sample_count += part.sample_count;
    for (auto& row : part.rows) {
      rep.worst_ratio = std::max(rep.worst_ratio, row.ratio);
      rep.rows.push_back(std::move(row));
    }
  }
  detail::judge(rep, C);
  return rep;
}

inline constexpr int kT1MaxPoints = 32;

/// The triple sum needs no transforms, so M need not be a power of two.
struct T1Setup {
  GridSpec grid{1, 24, 2.0 * std::numbers::pi, true};
  double s = 0.5;
  double t = 0.45;
};

/// T_1(z) = sum_{x != y} h^{2n} |f(x) - f(y)|^{p-1} Gamma(x, y, z) / dist^{n + sp},
/// Gamma = |g(x) + g(y) - 2g(z)| ||x-z|^{t-n} - |y-z|^{t-n}|, p = n/s, torus
/// distances, and the terms with z = x or z = y skipped.
inline ScalarField t1_field(const ScalarField& f, const ScalarField& g, double s, double t) {
  const GridSpec& G = f.grid;
  if (G.dim != 1) throw std::invalid_argument("t1_bound_probe: needs n = 1");
  if (G.points_per_axis > kT1MaxPoints) throw std::invalid_argument("t1_bound_probe: grid too large (M <= 32)");
  if (!(f.grid == g.grid)) throw std::invalid_argument("t1_bound_probe: grid mismatch");
  if (!(t > 0.0 && t < s && s < 1.0)) throw std::invalid_argument("t1_bound_probe: need 0 < t < s < 1");
  const double n = G.dim;
  const double p = n / s;
  const EnergyParams prm{s, p, 0.0, true};
  const PairKernel w(G, prm);
  const RieszKernel k(G, t, {KernelImages::minimum_image, DiagonalRule::excluded});
  ScalarField out(G);
  parallel_for(G.size(), [&](std::size_t z) {
    double acc = 0.0;
    for (std::size_t x = 0; x < G.size(); ++x) {
      if (x == z) continue;
      for (std::size_t y = 0; y < G.size(); ++y) {
        if (y == x || y == z) continue;
        const double gamma = std::abs(g[x] + g[y] - 2.0 * g[z]) * std::abs(k(x, z) - k(y, z));
        acc += w(x, y) * std::pow(std::abs(f[x] - f[y]), p - 1.0) * gamma;
      }
    }
    out[z] = acc;
  });
  return out;
}

/// ||T_1||_{n/(n-t)} against [f]^{p-1} [g] with p = n/s.
inline void t1_bound_row(ProbeReport& rep, std::string id, const ScalarField& f, const ScalarField& g, double s,
                         double t) {
  const double n = f.grid.dim;
  const double p = n / s;
  const double lhs = grid_norm(t1_field(f, g, s, t), n / (n - t));
  const double rhs = std::pow(seminorm(f, s, p), p - 1.0) * seminorm(g, s, p);
  detail::add_probe_row(rep, std::move(id), lhs, rhs);
}

/// The (cos, sin) pair plus seeded band-limited pairs.
inline ProbeReport t1_bound_probe(const T1Setup& setup, const std::vector<std::uint64_t>& seeds, double C) {
  detail::check_seeds(seeds, "t1_bound_probe");
  ProbeReport rep;
  rep.name = "t1_bound";
  rep.seed = seeds.front();
  const GridSpec& g = setup.grid;
  const double base = 2.0 * std::numbers::pi / g.box_length;
  t1_bound_row(rep, "cos_sin", ScalarField::sample(g, [&](Point q) { return std::cos(base * q[0]); }),
               ScalarField::sample(g, [&](Point q) { return std::sin(base * q[0]); }), setup.s, setup.t);
  for (auto seed : seeds) {
    t1_bound_row(rep, std::to_string(seed), random_band_limited(g, seed, 4),
                 random_band_limited(g, seed + (std::uint64_t{1} << 32), 4), setup.s, setup.t);
  }
  detail::judge(rep, C);
  return rep;
}

struct HolefillSetup {
  GridSpec grid = make_grid(1, 128, 2.0 * std::numbers::pi);
  int components = 2;
  double s = 0.5;
  double p = 2.0;
  double base_radius = 0.1;
  int level_min = 0;
  int level_max = 4;
};

/// holefill_check for K = L - 1 over the hierarchy on seeded random unit
/// fields and on (cos x, sin x). The declared bound is lhs <= rhs, so the
/// frozen constant is 1.
inline ProbeReport holefill_sweep(const HolefillSetup& setup, const std::vector<std::uint64_t>& seeds) {
  detail::check_seeds(seeds, "holefill_sweep");
  const EnergyParams prm{setup.s, setup.p, 0.0, false};
  const BallHierarchy hier(setup.grid, setup.grid.size() / 2, setup.base_radius, setup.level_min, setup.level_max);
  ProbeReport rep;
  rep.name = "holefill";
  rep.seed = seeds.front();
  bool all = true;
  auto run = [&](const VectorField& u, const std::string& tag) {
    for (int L = setup.level_min + 1; L <= setup.level_max; ++L) {
      const HoleFillResult r = holefill_check(u, hier, L - 1, L, prm);
      all = all && r.pass;
      detail::add_probe_row(rep, tag + ":" + std::to_string(L), r.lhs, r.rhs);
    }
  };
  const double base = 2.0 * std::numbers::pi / setup.grid.box_length;
  run(VectorField::sample(setup.grid, 2, [&](Point q) {
        return std::vector<double>{std::cos(base * q[0]), std::sin(base * q[0])};
      }),
      "circle");
  for (auto seed : seeds) run(random_unit_field(setup.grid, setup.components, seed), std::to_string(seed));
  rep.frozen_C = 1.0;
  rep.pass = all;
  return rep;
}

// ---------------------------------------------------------------------------
// Frozen constants

/// Probes whose constant is calibrated. holefill is exact and fixed at 1.
inline const std::vector<std::string>& calibrated_probes() {
  static const std::vector<std::string> names{"commutator", "kernel_case", "lp_sup", "sobolev", "t1_bound"};
  return names;
}

inline constexpr double kCalibrationMargin = 1.5;

inline std::vector<std::uint64_t> seed_range(std::uint64_t first, std::size_t count) {
  std::vector<std::uint64_t> out(count);
  std::iota(out.begin(), out.end(), first);
  return out;
}

/// Seeds used for calibration; disjoint from the default probe seeds.
inline constexpr std::uint64_t kCalibrationSeedBase = 1000000;

struct ProbeSeeds {
  std::vector<std::uint64_t> sobolev = seed_range(1, 20);
  std::vector<std::uint64_t> commutator = seed_range(1, 50);
  std::uint64_t kernel_case = 1;
  std::vector<std::uint64_t> lp_sup = seed_range(1, 20);
  std::vector<std::uint64_t> t1_bound = seed_range(1, 8);
  std::vector<std::uint64_t> holefill = seed_range(1, 10);

  /// Default counts with every seed range starting at base.
  static ProbeSeeds from_base(std::uint64_t base) {
    ProbeSeeds s;
    s.sobolev = seed_range(base, 20);
    s.commutator = seed_range(base, 50);
    s.kernel_case = base;
    s.lp_sup = seed_range(base, 20);
    s.t1_bound = seed_range(base, 8);
    s.holefill = seed_range(base, 10);
    return s;
  }

  static ProbeSeeds calibration() {
    const std::uint64_t b = kCalibrationSeedBase;
    ProbeSeeds s;
    s.sobolev = seed_range(b, 200);
    s.commutator = seed_range(b, 200);
    s.kernel_case = b;
    s.lp_sup = seed_range(b, 100);
    s.t1_bound = seed_range(b, 24);
    s.holefill = seed_range(b, 10);
    return s;
  }
};

struct ProbeSetups {
  SobolevSetup sobolev;
  CommutatorSetup commutator;
  KernelCaseSetup kernel_case;
  LpSupSetup lp_sup;
  T1Setup t1_bound;
  HolefillSetup holefill;
};

using ConstantTable = std::map<std::string, double>;

/// Runs one named probe. Unknown names are rejected.
inline ProbeReport run_probe(const std::string& name, const ProbeSetups& setups, const ProbeSeeds& seeds,
                             const ConstantTable& constants) {
  auto C = [&](const std::string& key) {
    const auto it = constants.find(key);
    return it == constants.end() ? std::numeric_limits<double>::quiet_NaN() : it->second;
  };
  if (name == "sobolev") return sobolev_probe(setups.sobolev, seeds.sobolev, C(name));
  if (name == "commutator") return commutator_probe(setups.commutator, seeds.commutator, C(name));
  if (name == "kernel_case") return kernel_case_probe(setups.kernel_case, seeds.kernel_case, C(name));
  if (name == "lp_sup") return lp_sup_bound_probe(setups.lp_sup, seeds.lp_sup, C(name));
  if (name == "t1_bound") return t1_bound_probe(setups.t1_bound, seeds.t1_bound, C(name));
  if (name == "holefill") return holefill_sweep(setups.holefill, seeds.holefill);
  throw std::invalid_argument("unknown probe '" + name + "'");
}

inline const std::vector<std::string>& all_probes() {
  static const std::vector<std::string> names{"sobolev", "commutator", "kernel_case", "lp_sup", "t1_bound", "holefill"};
  return names;
}

/// Calibration sweep: C = margin * worst ratio over the calibration seeds.
inline ConstantTable calibrate_constants(const ProbeSetups& setups, double margin = kCalibrationMargin) {
  const ProbeSeeds seeds = ProbeSeeds::calibration();
  ConstantTable table;
  for (const auto& name : calibrated_probes()) {
    const ProbeReport rep = run_probe(name, setups, seeds, {{name, std::numeric_limits<double>::infinity()}});
    table[name] = margin * rep.worst_ratio;
  }
  return table;
}

}  // namespace fracsphere
