#pragma once

// DFT plumbing (FFTW) and Fourier multipliers on the periodic grid.

#include "fracsphere/grid.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstring>
#include <memory>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace fracsphere {

namespace detail {

// FFTW planning and plan destruction are not thread safe; execution is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwBuffer {
  explicit FftwBuffer(std::size_t n)
      : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))), size(n) {
    if (!data) throw std::bad_alloc();
  }
  ~FftwBuffer() { fftw_free(data); }
  FftwBuffer(const FftwBuffer&) = delete;
  FftwBuffer& operator=(const FftwBuffer&) = delete;
  fftw_complex* data;
  std::size_t size;
};

class FftwPlan {
 public:
  FftwPlan(const GridSpec& g, FftwBuffer& buf, int sign) {
    int dims[2] = {g.points_per_axis, g.points_per_axis};
    std::lock_guard lock(fftw_planner_mutex());
    // FFTW is row-major; our axis 0 varies fastest, which is FFTW's last axis.
    plan_ = fftw_plan_dft(g.dim, dims, buf.data, buf.data, sign, FFTW_ESTIMATE);
    if (!plan_) throw std::runtime_error("fftw: plan creation failed");
  }
  ~FftwPlan() {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
  void execute() const { fftw_execute(plan_); }

 private:
  fftw_plan plan_;
};

}  // namespace detail

/// Integer frequency of a frequency-site along an axis, in [-M/2, M/2).
inline int frequency_index(const GridSpec& g, std::size_t freq_site, int axis) {
  return g.wrap_offset(g.multi_index(freq_site)[axis]);
}

/// |xi| of a frequency site; xi = 2 pi m / L.
inline double frequency_magnitude(const GridSpec& g, std::size_t freq_site) {
  const double unit = 2.0 * std::numbers::pi / g.box_length;
  double sq = 0.0;
  for (int k = 0; k < g.dim; ++k) {
    const double m = frequency_index(g, freq_site, k);
    sq += m * m;
  }
  return unit * std::sqrt(sq);
}

/// Real, even Fourier symbol sampled on the grid frequencies.
class Multiplier {
 public:
  Multiplier() = default;
  Multiplier(const GridSpec& g, std::vector<double> symbol) : grid_(g), symbol_(std::move(symbol)) {
    if (symbol_.size() != g.size()) throw std::invalid_argument("Multiplier: symbol size mismatch");
  }

  template <class F>
  static Multiplier radial(const GridSpec& g, F&& profile) {
    std::vector<double> s(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) s[k] = profile(frequency_magnitude(g, k));
    return Multiplier(g, std::move(s));
  }

  /// |xi|^t with the zero frequency annihilated (t may be negative).
  static Multiplier power(const GridSpec& g, double t) {
    return radial(g, [t](double xi) { return xi == 0.0 ? 0.0 : std::pow(xi, t); });
  }

  const GridSpec& grid() const { return grid_; }
  const std::vector<double>& symbol() const { return symbol_; }
  double operator[](std::size_t k) const { return symbol_[k]; }

  /// Composition of operators is the pointwise product of symbols.
  friend Multiplier operator*(const Multiplier& a, const Multiplier& b) {
    if (!(a.grid_ == b.grid_)) throw std::invalid_argument("Multiplier: grid mismatch");
    std::vector<double> s(a.symbol_.size());
    for (std::size_t k = 0; k < s.size(); ++k) s[k] = a.symbol_[k] * b.symbol_[k];
    return Multiplier(a.grid_, std::move(s));
  }

  ScalarField apply(const ScalarField& f) const {
    if (!(f.grid == grid_)) throw std::invalid_argument("Multiplier: field grid mismatch");
    const std::size_t n = grid_.size();
    detail::FftwBuffer buf(n);
    detail::FftwPlan forward(grid_, buf, FFTW_FORWARD);
    detail::FftwPlan backward(grid_, buf, FFTW_BACKWARD);
    for (std::size_t i = 0; i < n; ++i) {
      buf.data[i][0] = f[i];
      buf.data[i][1] = 0.0;
    }
    forward.execute();
    for (std::size_t k = 0; k < n; ++k) {
      buf.data[k][0] *= symbol_[k];
      buf.data[k][1] *= symbol_[k];
    }
    backward.execute();
    ScalarField out(grid_);
    const double scale = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = buf.data[i][0] * scale;
    return out;
  }

  VectorField apply(const VectorField& f) const {
    VectorField out(f.grid, f.components);
    for (int i = 0; i < f.components; ++i) out.set_component(i, apply(f.component(i)));
    return out;
  }

 private:
  GridSpec grid_;
  std::vector<double> symbol_;
};

/// Grid mean (the zero Fourier mode divided by M^n).
inline double grid_mean(const ScalarField& f) {
  double s = 0.0;
  for (double v : f.values) s += v;
  return s / static_cast<double>(f.size());
}

/// Discrete L^q norm (sum h^n |f|^q)^{1/q}.
inline double grid_norm(const ScalarField& f, double q) {
  const double h = f.grid.cell_volume();
  if (std::isinf(q)) {
    double m = 0.0;
    for (double v : f.values) m = std::max(m, std::abs(v));
    return m;
  }
  double s = 0.0;
  for (double v : f.values) s += std::pow(std::abs(v), q);
  return std::pow(h * s, 1.0 / q);
}

/// Grid inner product sum h^n f g.
inline double grid_inner(const ScalarField& f, const ScalarField& g) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += f[i] * g[i];
  return s * f.grid.cell_volume();
}

}  // namespace fracsphere
