#pragma once

// Periodic sample grids, fields, dyadic ball hierarchies and cutoffs.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace fracsphere {

/// Site coordinates as integer multi-indices. Unused trailing axes stay zero.
using MultiIndex = std::array<int, 2>;
using Point = std::array<double, 2>;

struct GridSpec {
  int dim = 1;
  int points_per_axis = 4;
  double box_length = 1.0;
  bool periodic = true;

  double spacing() const { return box_length / points_per_axis; }

  std::size_t size() const {
    std::size_t count = 1;
    for (int k = 0; k < dim; ++k) count *= static_cast<std::size_t>(points_per_axis);
    return count;
  }

  /// Cell volume h^n.
  double cell_volume() const { return std::pow(spacing(), dim); }

  MultiIndex multi_index(std::size_t site) const {
    MultiIndex idx{0, 0};
    const auto m = static_cast<std::size_t>(points_per_axis);
    for (int k = 0; k < dim; ++k) {
      idx[k] = static_cast<int>(site % m);
      site /= m;
    }
    return idx;
  }

  std::size_t site(MultiIndex idx) const {
    std::size_t s = 0;
    const auto m = static_cast<std::size_t>(points_per_axis);
    for (int k = dim - 1; k >= 0; --k) {
      const int wrapped = ((idx[k] % points_per_axis) + points_per_axis) % points_per_axis;
      s = s * m + static_cast<std::size_t>(wrapped);
    }
    return s;
  }

  Point position(std::size_t site) const {
    const MultiIndex idx = multi_index(site);
    return {idx[0] * spacing(), dim > 1 ? idx[1] * spacing() : 0.0};
  }

  /// Minimum-image integer offset from a to b, each component in [-M/2, M/2).
  MultiIndex offset(std::size_t a, std::size_t b) const {
    const MultiIndex ia = multi_index(a);
    const MultiIndex ib = multi_index(b);
    MultiIndex d{0, 0};
    for (int k = 0; k < dim; ++k) d[k] = wrap_offset(ib[k] - ia[k]);
    return d;
  }

  /// Site index of the wrapped offset b - a; used to address translation
  /// invariant tables.
  std::size_t offset_site(std::size_t a, std::size_t b) const {
    const MultiIndex ia = multi_index(a);
    const MultiIndex ib = multi_index(b);
    return site({ib[0] - ia[0], ib[1] - ia[1]});
  }

  /// Torus distance of a wrapped offset (given as an offset site index).
  double offset_distance(std::size_t offset_site_index) const {
    const MultiIndex idx = multi_index(offset_site_index);
    double sq = 0.0;
    for (int k = 0; k < dim; ++k) {
      const int c = std::min(idx[k], points_per_axis - idx[k]);
      const double x = c * spacing();
      sq += x * x;
    }
    return std::sqrt(sq);
  }

  double distance(std::size_t a, std::size_t b) const { return offset_distance(offset_site(a, b)); }

  /// Torus distance from a site to an arbitrary point of the box.
  double distance_to_point(std::size_t a, Point p) const {
    const Point x = position(a);
    double sq = 0.0;
    for (int k = 0; k < dim; ++k) {
      double d = std::fmod(std::abs(x[k] - p[k]), box_length);
      d = std::min(d, box_length - d);
      sq += d * d;
    }
    return std::sqrt(sq);
  }

  int wrap_offset(int d) const {
    const int m = points_per_axis;
    int w = ((d % m) + m) % m;
    if (w >= m / 2) w -= m;
    return w;
  }

  friend bool operator==(const GridSpec& a, const GridSpec& b) {
    return a.dim == b.dim && a.points_per_axis == b.points_per_axis && a.box_length == b.box_length &&
           a.periodic == b.periodic;
  }
};

/// Validated constructor for GridSpec: n in {1,2}, M >= 4 and a power of two.
inline GridSpec make_grid(int dim, int points_per_axis, double box_length) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("grid: dim must be 1 or 2, got " + std::to_string(dim));
  if (points_per_axis < 4 || (points_per_axis & (points_per_axis - 1)) != 0) {
    throw std::invalid_argument("grid: points_per_axis must be a power of two >= 4, got " +
                                std::to_string(points_per_axis));
  }
  if (!(box_length > 0.0) || !std::isfinite(box_length)) {
    throw std::invalid_argument("grid: box_length must be positive");
  }
  const double total = std::pow(static_cast<double>(points_per_axis), dim);
  if (total > static_cast<double>(std::numeric_limits<std::int32_t>::max())) {
    throw std::invalid_argument("grid: sample count exceeds the index space");
  }
  return GridSpec{dim, points_per_axis, box_length, true};
}

struct ScalarField {
  GridSpec grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const GridSpec& g, double fill = 0.0) : grid(g), values(g.size(), fill) {}
  ScalarField(const GridSpec& g, std::vector<double> v) : grid(g), values(std::move(v)) {
    if (values.size() != grid.size()) throw std::invalid_argument("ScalarField: sample count must equal M^n");
  }

  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
  std::size_t size() const { return values.size(); }

  template <class F>
  static ScalarField sample(const GridSpec& g, F&& f) {
    ScalarField out(g);
    for (std::size_t i = 0; i < g.size(); ++i) out.values[i] = f(g.position(i));
    return out;
  }
};

/// Sample-major vector field: values[site * components + i].
struct VectorField {
  GridSpec grid;
  int components = 1;
  std::vector<double> values;

  VectorField() = default;
  VectorField(const GridSpec& g, int n_components, double fill = 0.0)
      : grid(g), components(n_components), values(g.size() * static_cast<std::size_t>(n_components), fill) {
    if (n_components < 1) throw std::invalid_argument("VectorField: components must be positive");
  }
  VectorField(const GridSpec& g, int n_components, std::vector<double> v)
      : grid(g), components(n_components), values(std::move(v)) {
    if (n_components < 1) throw std::invalid_argument("VectorField: components must be positive");
    if (values.size() != grid.size() * static_cast<std::size_t>(components)) {
      throw std::invalid_argument("VectorField: sample count must equal M^n * N");
    }
  }

  std::size_t sites() const { return grid.size(); }
  double& at(std::size_t site, int i) { return values[site * components + i]; }
  double at(std::size_t site, int i) const { return values[site * components + i]; }
  std::span<const double> sample(std::size_t site) const {
    return {values.data() + site * components, static_cast<std::size_t>(components)};
  }
  std::span<double> sample(std::size_t site) {
    return {values.data() + site * components, static_cast<std::size_t>(components)};
  }

  ScalarField component(int i) const {
    ScalarField out(grid);
    for (std::size_t x = 0; x < sites(); ++x) out[x] = at(x, i);
    return out;
  }
  void set_component(int i, const ScalarField& f) {
    for (std::size_t x = 0; x < sites(); ++x) at(x, i) = f[x];
  }

  /// True when every sample has Euclidean norm within tol of 1.
  bool is_unit(double tol = 1e-12) const {
    for (std::size_t x = 0; x < sites(); ++x) {
      double sq = 0.0;
      for (double v : sample(x)) sq += v * v;
      if (std::abs(std::sqrt(sq) - 1.0) > tol) return false;
    }
    return true;
  }

  template <class F>
  static VectorField sample(const GridSpec& g, int n_components, F&& f) {
    VectorField out(g, n_components);
    for (std::size_t x = 0; x < g.size(); ++x) {
      const auto v = f(g.position(x));
      for (int i = 0; i < n_components; ++i) out.at(x, i) = v[i];
    }
    return out;
  }
};

inline VectorField as_vector(const ScalarField& f) { return VectorField(f.grid, 1, f.values); }

/// An ordered set of grid sites over which nonlocal sums run.
struct Region {
  GridSpec grid;
  std::vector<std::size_t> sites;

  static Region full(const GridSpec& g) {
    Region r{g, std::vector<std::size_t>(g.size())};
    std::iota(r.sites.begin(), r.sites.end(), std::size_t{0});
    return r;
  }

  /// Closed torus ball; boundary ties are included.
  static Region ball(const GridSpec& g, std::size_t center, double radius) {
    Region r{g, {}};
    const double cut = radius * (1.0 + 1e-12);
    for (std::size_t x = 0; x < g.size(); ++x)
      if (g.distance(center, x) <= cut) r.sites.push_back(x);
    return r;
  }

  std::size_t size() const { return sites.size(); }

  std::vector<char> mask() const {
    std::vector<char> m(grid.size(), 0);
    for (auto x : sites) m[x] = 1;
    return m;
  }
};

/// Gradient bound of the cutoff profile: |d/dd eta| <= 1.5 / r for the cubic
/// smoothstep transition over [r, 2r].
inline constexpr double kCutoffGradientConstant = 1.5;

/// Dyadic balls B_l = B_{2^l R}(x0) around a grid site.
struct BallHierarchy {
  GridSpec grid;
  std::size_t center = 0;
  double base_radius = 1.0;
  int level_min = 0;
  int level_max = 0;

  BallHierarchy() = default;
  BallHierarchy(const GridSpec& g, std::size_t x0, double r, int lmin, int lmax)
      : grid(g), center(x0), base_radius(r), level_min(lmin), level_max(lmax) {
    if (!(r > 0.0)) throw std::invalid_argument("BallHierarchy: base_radius must be positive");
    if (lmin > lmax) throw std::invalid_argument("BallHierarchy: empty level range");
    if (x0 >= g.size()) throw std::invalid_argument("BallHierarchy: center outside grid");
  }

  int levels() const { return level_max - level_min + 1; }
  double radius(int level) const { return std::ldexp(base_radius, level); }

  void check_level(int level) const {
    if (level < level_min || level > level_max) {
      throw std::out_of_range("BallHierarchy: level " + std::to_string(level) + " outside [" +
                              std::to_string(level_min) + ", " + std::to_string(level_max) + "]");
    }
  }

  /// Sharp ball B_level as a site set. The ball must fit in the torus.
  Region ball(int level) const {
    check_level(level);
    if (radius(level) > 0.5 * grid.box_length) throw std::invalid_argument("BallHierarchy: ball overflows the torus");
    return Region::ball(grid, center, radius(level));
  }

  ScalarField sharp_cutoff(int level) const {
    ScalarField chi(grid);
    for (auto x : ball(level).sites) chi[x] = 1.0;
    return chi;
  }
};

namespace detail {
inline double smoothstep3(double t) {
  if (t <= 0.0) return 0.0;
  if (t >= 1.0) return 1.0;
  return t * t * (3.0 - 2.0 * t);
}
}  // namespace detail

/// Mollified cutoff: 1 on B_{2^l R}, 0 outside B_{2^{l+1} R}, cubic smoothstep
/// in the radial transition.
inline ScalarField cutoff_smooth(const BallHierarchy& hierarchy, int level) {
  hierarchy.check_level(level);
  const double r = hierarchy.radius(level);
  if (!(2.0 * r < 0.5 * hierarchy.grid.box_length)) {
    throw std::invalid_argument("cutoff_smooth: ball B_{l+1} overflows the torus");
  }
  ScalarField eta(hierarchy.grid);
  for (std::size_t x = 0; x < eta.size(); ++x) {
    const double d = hierarchy.grid.distance(hierarchy.center, x);
    eta[x] = 1.0 - detail::smoothstep3((d - r) / r);
  }
  return eta;
}

/// Ring cutoff eta_l - eta_{l-1}; requires level - 1 in range.
inline ScalarField cutoff_ring(const BallHierarchy& hierarchy, int level) {
  ScalarField outer = cutoff_smooth(hierarchy, level);
  const ScalarField inner = cutoff_smooth(hierarchy, level - 1);
  for (std::size_t x = 0; x < outer.size(); ++x) outer[x] -= inner[x];
  return outer;
}

/// Largest forward-difference gradient norm of a scalar field.
inline double max_discrete_gradient(const ScalarField& f) {
  const GridSpec& g = f.grid;
  double worst = 0.0;
  for (std::size_t x = 0; x < g.size(); ++x) {
    const MultiIndex idx = g.multi_index(x);
    double sq = 0.0;
    for (int k = 0; k < g.dim; ++k) {
      MultiIndex next = idx;
      next[k] += 1;
      const double d = (f[g.site(next)] - f[x]) / g.spacing();
      sq += d * d;
    }
    worst = std::max(worst, std::sqrt(sq));
  }
  return worst;
}

namespace detail {
inline Region mean_ball(const BallHierarchy& hierarchy, int level) {
  if (hierarchy.radius(level) < hierarchy.grid.spacing()) {
    throw std::invalid_argument("ball_mean: ball radius below grid spacing (empty ball)");
  }
  return hierarchy.ball(level);
}
}  // namespace detail

/// (f)_l: arithmetic mean over the sites of the sharp ball B_l.
inline double ball_mean(const ScalarField& f, const BallHierarchy& hierarchy, int level) {
  const Region ball = detail::mean_ball(hierarchy, level);
  double sum = 0.0;
  for (auto x : ball.sites) sum += f[x];
  return sum / static_cast<double>(ball.size());
}

inline std::vector<double> ball_mean(const VectorField& f, const BallHierarchy& hierarchy, int level) {
  const Region ball = detail::mean_ball(hierarchy, level);
  std::vector<double> mean(f.components, 0.0);
  for (auto x : ball.sites)
    for (int i = 0; i < f.components; ++i) mean[i] += f.at(x, i);
  for (double& m : mean) m /= static_cast<double>(ball.size());
  return mean;
}

}  // namespace fracsphere
