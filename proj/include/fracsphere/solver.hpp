#pragma once

// Sphere-constrained descent for the discrete energy and the Euler-Lagrange
// residual suite used to certify its stationary points.

#include "fracsphere/energy.hpp"
#include "fracsphere/grid.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracsphere {

inline constexpr double kProjectionFloor = 1e-8;

/// Divides every sample by its Euclidean norm.
inline VectorField project_sphere(const VectorField& u) {
  VectorField out = u;
  for (std::size_t x = 0; x < u.sites(); ++x) {
    auto v = out.sample(x);
    double sq = 0.0;
    for (double c : v) sq += c * c;
    const double norm = std::sqrt(sq);
    if (norm < kProjectionFloor) {
      throw std::invalid_argument("project_sphere: sample " + std::to_string(x) + " has near-zero norm");
    }
    for (double& c : v) c /= norm;
  }
  return out;
}

/// g(x) - (u(x) . g(x)) u(x) for unit u.
inline VectorField tangent_project(const VectorField& g, const VectorField& u) { return tangential_part(g, u); }

inline double euclidean_norm(const VectorField& f) {
  double sq = 0.0;
  for (double v : f.values) sq += v * v;
  return std::sqrt(sq);
}

struct SolverConfig {
  int max_iters = 20000;
  double step0 = 0.05;
  double armijo_c = 1e-4;
  double armijo_shrink = 0.5;
  double grad_tol = 1e-7;
  double energy_tol = 1e-15;
  std::uint64_t seed = 0;

  void validate() const {
    if (max_iters < 0) throw std::invalid_argument("solver.max_iters must be nonnegative");
    if (!(step0 > 0.0)) throw std::invalid_argument("solver.step0 must be positive");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) throw std::invalid_argument("solver.armijo_c must lie in (0, 1)");
    if (!(armijo_shrink > 0.0 && armijo_shrink < 1.0)) {
      throw std::invalid_argument("solver.armijo_shrink must lie in (0, 1)");
    }
    if (!(grad_tol > 0.0)) throw std::invalid_argument("solver.grad_tol must be positive");
    if (!(energy_tol > 0.0)) throw std::invalid_argument("solver.energy_tol must be positive");
  }
};

enum class StopReason { gradient_tolerance, energy_tolerance, max_iterations, line_search_failure };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::gradient_tolerance: return "gradient_tolerance";
    case StopReason::energy_tolerance: return "energy_tolerance";
    case StopReason::max_iterations: return "max_iterations";
    case StopReason::line_search_failure: return "line_search_failure";
  }
  return "unknown";
}

struct SolveReport {
  int iterations = 0;
  std::vector<double> energy_trace;  // energy of iterate k, k = 0..iterations
  std::vector<double> step_trace;    // accepted step size for iterate k -> k+1
  std::vector<double> gradient_trace;
  double final_gradient_norm = 0.0;
  double final_el_residual = std::numeric_limits<double>::quiet_NaN();  // filled by callers running the suite
  bool converged = false;
  StopReason stop = StopReason::max_iterations;
  double wall_seconds = 0.0;
};

struct SolveResult {
  VectorField u;
  SolveReport report;
};

inline constexpr int kLineSearchLimit = 60;

/// Projected gradient descent with radial retraction:
/// u_{k+1} = project(u_k - tau_k P_T grad E(u_k)), tau_k chosen by Armijo
/// backtracking on E(project(.)). Trial steps start at the Barzilai-Borwein
/// length <s, s> / <s, y> of the last move s and tangent-gradient change y,
/// falling back to twice the last accepted step (step0 initially) when
/// <s, y> <= 0.
///
/// The energy trace starts from a direct evaluation and then accumulates the
/// accepted pair-by-pair changes, which stay accurate relative to the change
/// itself long after a direct re-evaluation of the sum stops resolving them.
inline SolveResult minimize(const VectorField& u0, const EnergyParams& params, const SolverConfig& cfg) {
  params.validate(u0.grid.dim);
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  const PairKernel kernel(u0.grid, params);

  SolveResult result{project_sphere(u0), {}};
  SolveReport& rep = result.report;
  VectorField& u = result.u;
  double e = energy(u, params, Region::full(u.grid), kernel);
  rep.energy_trace.push_back(e);
  double tau = cfg.step0;
  VectorField u_prev, d_prev;

  for (int k = 0;; ++k) {
    const VectorField d = tangent_project(energy_gradient(u, params, kernel), u);
    if (k > 0) {
      double ss = 0.0, sy = 0.0;
      for (std::size_t i = 0; i < u.values.size(); ++i) {
        const double si = u.values[i] - u_prev.values[i];
        ss += si * si;
        sy += si * (d.values[i] - d_prev.values[i]);
      }
      if (sy > 0.0 && ss > 0.0) tau = ss / sy;
    }
    const double gnorm = euclidean_norm(d);
    rep.gradient_trace.push_back(gnorm);
    rep.final_gradient_norm = gnorm;
    rep.iterations = k;
    if (gnorm <= cfg.grad_tol) {
      rep.converged = true;
      rep.stop = StopReason::gradient_tolerance;
      break;
    }
    if (k >= cfg.max_iters) {
      rep.stop = StopReason::max_iterations;
      break;
    }

    double trial = tau;
    bool accepted = false;
    VectorField candidate;
    double change = 0.0;
    for (int attempt = 0; attempt < kLineSearchLimit; ++attempt) {
      VectorField step = u;
      for (std::size_t i = 0; i < step.values.size(); ++i) step.values[i] -= trial * d.values[i];
      candidate = project_sphere(step);
      change = energy_difference(u, candidate, params, kernel);
      if (change <= -cfg.armijo_c * trial * gnorm * gnorm) {
        accepted = true;
        break;
      }
      trial *= cfg.armijo_shrink;
    }
    if (!accepted) {
      rep.stop = StopReason::line_search_failure;
      break;
    }

    u_prev = std::move(u);
    d_prev = d;
    u = std::move(candidate);
    const double e_next = e + change;
    rep.energy_trace.push_back(e_next);
    rep.step_trace.push_back(trial);
    tau = 2.0 * trial;
    if (std::abs(change) <= cfg.energy_tol * std::max(1.0, std::abs(e))) {
      e = e_next;
      rep.iterations = k + 1;
      rep.final_gradient_norm = euclidean_norm(tangent_project(energy_gradient(u, params, kernel), u));
      rep.gradient_trace.push_back(rep.final_gradient_norm);
      rep.converged = true;
      rep.stop = StopReason::energy_tolerance;
      break;
    }
    e = e_next;
  }
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

// ---------------------------------------------------------------------------
// Euler-Lagrange residual suite

/// Standard C^inf bump exp(1 - 1/(1 - (d/rho)^2)) centered at a point.
inline ScalarField smooth_bump(const GridSpec& g, Point center, double radius) {
  ScalarField phi(g);
  for (std::size_t x = 0; x < g.size(); ++x) {
    const double r = g.distance_to_point(x, center) / radius;
    phi[x] = r < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r * r)) : 0.0;
  }
  return phi;
}

struct TestBump {
  Point center;
  double radius;
  ScalarField phi;
};

/// Deterministic family of translated bumps of radius r/2 whose supports lie in
/// the support ball of radius r: centers spread along axis 0 (and alternately
/// shifted along axis 1 when n = 2).
inline std::vector<TestBump> bump_basis(const BallHierarchy& hierarchy, int support_level, int basis_size) {
  if (basis_size < 1) throw std::invalid_argument("el_residual_suite: basis_size must be positive");
  const GridSpec& g = hierarchy.grid;
  const double r = hierarchy.radius(support_level);
  hierarchy.check_level(support_level);
  const double rho = 0.5 * r;
  if (rho < 2.0 * g.spacing()) throw std::invalid_argument("el_residual_suite: region too small to support a bump");
  const Point c0 = g.position(hierarchy.center);
  std::vector<TestBump> basis;
  for (int k = 0; k < basis_size; ++k) {
    const double frac = basis_size == 1 ? 0.0 : -0.5 + static_cast<double>(k) / (basis_size - 1);
    Point c = c0;
    c[0] += frac * (r - rho) * 2.0;
    if (g.dim == 2) c[1] += (k % 2 == 0 ? 0.25 : -0.25) * (r - rho);
    basis.push_back({c, rho, smooth_bump(g, c, rho)});
  }
  return basis;
}

struct ElResidualEntry {
  int bump = 0;
  int i = 0;
  int j = 0;
  int sign = 1;
  double residual = 0.0;
  double normalized = 0.0;
};

struct ElResidualReport {
  std::vector<ElResidualEntry> entries;
  int elementary_omegas = 0;
  double max_abs = 0.0;
  double max_normalized = 0.0;
  std::string basis_description;
};

/// Evaluates the Euler-Lagrange left side for every (bump, +-elementary omega)
/// pair, normalized by [phi]_{s,p} [u]^{p-1} over the integration region.
inline ElResidualReport el_residual_suite(const VectorField& u, const EnergyParams& params,
                                          const BallHierarchy& hierarchy, int support_level, int basis_size,
                                          const Region& region) {
  params.validate(u.grid.dim);
  const PairKernel kernel(u.grid, params);
  const auto basis = bump_basis(hierarchy, support_level, basis_size);
  const double u_semi = std::pow(energy(u, params, region, kernel), 1.0 / params.p);
  const int nc = u.components;

  ElResidualReport rep;
  rep.elementary_omegas = nc * (nc - 1) / 2;
  rep.basis_description = std::to_string(basis_size) + " bumps of radius " + std::to_string(basis.front().radius) +
                          " inside B_" + std::to_string(support_level);
  for (int b = 0; b < basis_size; ++b) {
    const double phi_semi = seminorm(basis[b].phi, params.s, params.p, region);
    const double scale = phi_semi * std::pow(u_semi, params.p - 1.0);
    for (int i = 0; i < nc; ++i) {
      for (int j = i + 1; j < nc; ++j) {
        for (int sign : {1, -1}) {
          const SignMatrix omega = SignMatrix::elementary(nc, i, j, sign);
          ElResidualEntry e{b, i, j, sign, el_residual(u, basis[b].phi, omega, params, region, kernel), 0.0};
          e.normalized = e.residual == 0.0 ? 0.0 : std::abs(e.residual) / scale;
          rep.max_abs = std::max(rep.max_abs, std::abs(e.residual));
          rep.max_normalized = std::max(rep.max_normalized, e.normalized);
          rep.entries.push_back(e);
        }
      }
    }
  }
  return rep;
}

inline ElResidualReport el_residual_suite(const VectorField& u, const EnergyParams& params,
                                          const BallHierarchy& hierarchy, int support_level, int basis_size) {
  return el_residual_suite(u, params, hierarchy, support_level, basis_size, Region::full(u.grid));
}

}  // namespace fracsphere
