#pragma once

// Run configuration, field checkpoints, frozen constants and report files.

#include "fracsphere/digest.hpp"
#include "fracsphere/energy.hpp"
#include "fracsphere/grid.hpp"
#include "fracsphere/lab.hpp"
#include "fracsphere/solver.hpp"

#include <json.hpp>

#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracsphere {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kArtifactVersion = "1.0.0";

/// Any rejected configuration: malformed JSON, unknown keys, violated bounds.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Corrupt or inconsistent field / constants files.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Number formatting

/// Round-trip text for a double: 17 significant digits.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

// ---------------------------------------------------------------------------
// RunConfig

enum class InitialKind { winding, constant, random };

struct InitialSpec {
  InitialKind kind = InitialKind::winding;
  int degree = 1;
  double perturbation = 0.3;
};

struct HierarchySpec {
  std::vector<int> center;  // grid multi-index; empty selects the middle site
  double base_radius = 0.25;
  int level_min = 0;
  int level_max = 3;
};

struct ResidualSpec {
  int basis_size = 4;
  int support_level = 0;
  double tolerance = 1e-6;
  double duality_tolerance = 1e-3;
};

struct ProbeSpec {
  std::vector<std::string> select = all_probes();
  ProbeSetups setups;
};

struct RunConfig {
  GridSpec grid = make_grid(1, 128, 2.0 * std::numbers::pi);
  int components = 2;
  EnergyParams energy;
  double t = 0.45;
  SolverConfig solver;
  HierarchySpec hierarchy;
  InitialSpec initial;
  ResidualSpec residual;
  ProbeSpec probes;
  std::uint64_t seed = 1;
  std::string output_dir = "out";

  BallHierarchy ball_hierarchy() const {
    std::size_t c;
    if (hierarchy.center.empty()) {
      c = grid.site({grid.points_per_axis / 2, grid.dim > 1 ? grid.points_per_axis / 2 : 0});
    } else {
      c = grid.site({hierarchy.center[0], grid.dim > 1 ? hierarchy.center[1] : 0});
    }
    return BallHierarchy(grid, c, hierarchy.base_radius, hierarchy.level_min, hierarchy.level_max);
  }
};

namespace detail {

inline std::string join_path(const std::string& prefix, const std::string& key) {
  return prefix.empty() ? key : prefix + "." + key;
}

// Walks an object, handing each known key to its reader and rejecting the rest.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError("config: '" + (path_.empty() ? "<root>" : path_) + "' must be an object");
  }

  template <class F>
  void optional(const std::string& key, F&& read) {
    seen_.push_back(key);
    if (auto it = j_.find(key); it != j_.end()) read(*it, join_path(path_, key));
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end()) {
        throw ConfigError("config: unknown key '" + join_path(path_, it.key()) + "'");
      }
    }
  }

 private:
  const Json& j_;
  std::string path_;
  std::vector<std::string> seen_;
};

inline double read_number(const Json& v, const std::string& path) {
  if (!v.is_number()) throw ConfigError("config: '" + path + "' must be a number");
  return v.get<double>();
}

inline int read_int(const Json& v, const std::string& path) {
  if (!v.is_number_integer()) throw ConfigError("config: '" + path + "' must be an integer");
  return v.get<int>();
}

inline bool read_bool(const Json& v, const std::string& path) {
  if (!v.is_boolean()) throw ConfigError("config: '" + path + "' must be a boolean");
  return v.get<bool>();
}

inline std::string read_string(const Json& v, const std::string& path) {
  if (!v.is_string()) throw ConfigError("config: '" + path + "' must be a string");
  return v.get<std::string>();
}

inline void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("config: " + message);
}

inline std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

/// Parses JSON text, reporting syntax errors by line and column.
inline Json parse_json_text(const std::string& text, const std::string& origin) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    // byte is one past the offending character
    const std::size_t at = e.byte == 0 ? 0 : e.byte - 1;
    throw ConfigError(origin + ": parse error at " + detail::line_column(text, at) + ": " + e.what());
  }
}

/// Sets a dotted key ("energy.s") to a value. The value is read as JSON when it
/// parses and as a string otherwise.
inline void apply_override(Json& root, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  Json value = Json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  Json* node = &root;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (part.empty()) throw ConfigError("override key '" + key + "' is malformed");
    if (!node->is_object()) throw ConfigError("override key '" + key + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[part] = value;
      break;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

/// Validates a raw config document and fills every default.
inline RunConfig config_from_json(const Json& root) {
  RunConfig cfg;
  detail::ObjectReader top(root, "");
  bool p_given = false, t_given = false;

  int dim = 1, points = 128;
  double box = 2.0 * std::numbers::pi;
  top.optional("grid", [&](const Json& j, const std::string& path) {
    detail::ObjectReader r(j, path);
    r.optional("dim", [&](const Json& v, const std::string& p) { dim = detail::read_int(v, p); });
    r.optional("points_per_axis", [&](const Json& v, const std::string& p) { points = detail::read_int(v, p); });
    r.optional("box_length", [&](const Json& v, const std::string& p) { box = detail::read_number(v, p); });
    r.finish();
  });
  try {
    cfg.grid = make_grid(dim, points, box);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: grid: ") + e.what());
  }
  top.optional("components", [&](const Json& v, const std::string& p) { cfg.components = detail::read_int(v, p); });
  detail::require(cfg.components >= 1, "'components' must be positive");

  top.optional("energy", [&](const Json& j, const std::string& path) {
    detail::ObjectReader r(j, path);
    r.optional("s", [&](const Json& v, const std::string& p) { cfg.energy.s = detail::read_number(v, p); });
    r.optional("p", [&](const Json& v, const std::string& p) {
      cfg.energy.p = detail::read_number(v, p);
      p_given = true;
    });
    r.optional("t", [&](const Json& v, const std::string& p) {
      cfg.t = detail::read_number(v, p);
      t_given = true;
    });
    r.optional("eps_reg", [&](const Json& v, const std::string& p) { cfg.energy.eps_reg = detail::read_number(v, p); });
    r.optional("critical_mode",
               [&](const Json& v, const std::string& p) { cfg.energy.critical_mode = detail::read_bool(v, p); });
    r.finish();
  });
  const double n = cfg.grid.dim;
  const EnergyParams& e = cfg.energy;
  detail::require(e.s > 0.0 && e.s < 1.0, "'energy.s' must lie in (0, 1)");
  if (e.critical_mode) {
    if (p_given && cfg.energy.p != n / e.s) {
      throw ConfigError("config: 'energy.p' = " + format_double(cfg.energy.p) +
                        " contradicts critical_mode, which requires p = n/s = " + format_double(n / e.s));
    }
    cfg.energy.p = n / e.s;
  }
  detail::require(e.p > 1.0, "'energy.p' must exceed 1");
  detail::require(e.eps_reg >= 0.0, "'energy.eps_reg' must be nonnegative");
  detail::require(e.p >= 2.0 || e.eps_reg > 0.0, "'energy.eps_reg' = 0 requires p >= 2");
  if (!t_given) cfg.t = e.s - 0.05;
  detail::require(cfg.t > 0.0, "'energy.t' must be positive");
  detail::require(cfg.t < 1.0, "'energy.t' must be below 1");
  detail::require(cfg.t > t_lower_bound(e), "'energy.t' = " + format_double(cfg.t) +
                                                 " violates the admissibility bound t > 1 - (1 - s) p = " +
                                                 format_double(t_lower_bound(e)));

  top.optional("solver", [&](const Json& j, const std::string& path) {
    detail::ObjectReader r(j, path);
    SolverConfig& s = cfg.solver;
    r.optional("max_iters", [&](const Json& v, const std::string& p) { s.max_iters = detail::read_int(v, p); });
    r.optional("step0", [&](const Json& v, const std::string& p) { s.step0 = detail::read_number(v, p); });
    r.optional("armijo_c", [&](const Json& v, const std::string& p) { s.armijo_c = detail::read_number(v, p); });
    r.optional("armijo_shrink", [&](const Json& v, const std::string& p) { s.armijo_shrink = detail::read_number(v, p); });
    r.optional("grad_tol", [&](const Json& v, const std::string& p) { s.grad_tol = detail::read_number(v, p); });
    r.optional("energy_tol", [&](const Json& v, const std::string& p) { s.energy_tol = detail::read_number(v, p); });
    r.finish();
  });
  try {
    cfg.solver.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }

  top.optional("hierarchy", [&](const Json& j, const std::string& path) {
    detail::ObjectReader r(j, path);
    HierarchySpec& h = cfg.hierarchy;
    r.optional("center", [&](const Json& v, const std::string& p) {
      if (!v.is_array()) throw ConfigError("config: '" + p + "' must be an array of grid indices");
      h.center.clear();
      for (const auto& c : v) h.center.push_back(detail::read_int(c, p));
    });
    r.optional("base_radius", [&](const Json& v, const std::string& p) { h.base_radius = detail::read_number(v, p); });
    r.optional("level_min", [&](const Json& v, const std::string& p) { h.level_min = detail::read_int(v, p); });
    r.optional("level_max", [&](const Json& v, const std::string& p) { h.level_max = detail::read_int(v, p); });
    r.finish();
  });
  {
    const HierarchySpec& h = cfg.hierarchy;
    if (!h.center.empty()) {
      detail::require(static_cast<int>(h.center.size()) == cfg.grid.dim, "'hierarchy.center' needs one index per axis");
      for (int c : h.center) {
        detail::require(c >= 0 && c < cfg.grid.points_per_axis, "'hierarchy.center' lies outside the grid");
      }
    }
    detail::require(h.base_radius > 0.0, "'hierarchy.base_radius' must be positive");
    detail::require(h.level_min <= h.level_max, "'hierarchy.level_min' exceeds 'hierarchy.level_max'");
    detail::require(std::ldexp(h.base_radius, h.level_max) <= 0.5 * cfg.grid.box_length,
                    "'hierarchy' top ball of radius " + format_double(std::ldexp(h.base_radius, h.level_max)) +
                        " overflows the torus (limit L/2)");
  }

  top.optional("initial", [&](const Json& j, const std::string& path) {
    detail::ObjectReader r(j, path);
    r.optional("kind", [&](const Json& v, const std::string& p) {
      const std::string k = detail::read_string(v, p);
      if (k == "winding") {
        cfg.initial.kind = InitialKind::winding;
      } else if (k == "constant") {
        cfg.initial.kind = InitialKind::constant;
      } else if (k == "random") {
        cfg.initial.kind = InitialKind::random;
      } else {
        throw ConfigError("config: '" + p + "' must be winding, constant or random");
      }
    });
    r.optional("degree", [&](const Json& v, const std::string& p) { cfg.initial.degree = detail::read_int(v, p); });
    r.optional("perturbation",
               [&](const Json& v, const std::string& p) { cfg.initial.perturbation = detail::read_number(v, p); });
    r.finish();
  });
  detail::require(cfg.initial.kind != InitialKind::winding || cfg.components >= 2,
                  "'initial.kind' winding needs at least 2 components");

  top.optional("residual", [&](const Json& j, const std::string& path) {
    detail::ObjectReader r(j, path);
    ResidualSpec& s = cfg.residual;
    r.optional("basis_size", [&](const Json& v, const std::string& p) { s.basis_size = detail::read_int(v, p); });
    r.optional("support_level", [&](const Json& v, const std::string& p) { s.support_level = detail::read_int(v, p); });
    r.optional("tolerance", [&](const Json& v, const std::string& p) { s.tolerance = detail::read_number(v, p); });
    r.optional("duality_tolerance",
               [&](const Json& v, const std::string& p) { s.duality_tolerance = detail::read_number(v, p); });
    r.finish();
  });
  {
    const ResidualSpec& s = cfg.residual;
    detail::require(s.basis_size >= 1, "'residual.basis_size' must be positive");
    detail::require(s.support_level >= cfg.hierarchy.level_min && s.support_level <= cfg.hierarchy.level_max,
                    "'residual.support_level' outside the hierarchy levels");
    detail::require(0.5 * std::ldexp(cfg.hierarchy.base_radius, s.support_level) >= 2.0 * cfg.grid.spacing(),
                    "'residual.support_level' ball is too small to support a bump (radius/2 < 2h)");
    detail::require(s.tolerance > 0.0 && s.duality_tolerance > 0.0, "'residual' tolerances must be positive");
  }

  top.optional("probes", [&](const Json& j, const std::string& path) {
    detail::ObjectReader r(j, path);
    ProbeSetups& ps = cfg.probes.setups;
    r.optional("select", [&](const Json& v, const std::string& p) {
      if (!v.is_array()) throw ConfigError("config: '" + p + "' must be an array of probe names");
      cfg.probes.select.clear();
      for (const auto& name : v) {
        const std::string s = detail::read_string(name, p);
        if (s == "all") {
          cfg.probes.select = all_probes();
          break;
        }
        if (std::find(all_probes().begin(), all_probes().end(), s) == all_probes().end()) {
          throw ConfigError("config: '" + p + "' names unknown probe '" + s + "'");
        }
        cfg.probes.select.push_back(s);
      }
    });
    r.optional("sobolev", [&](const Json& j2, const std::string& p2) {
      detail::ObjectReader q(j2, p2);
      q.optional("s", [&](const Json& v, const std::string& p) { ps.sobolev.s = detail::read_number(v, p); });
      q.optional("t", [&](const Json& v, const std::string& p) { ps.sobolev.t = detail::read_number(v, p); });
      q.optional("p", [&](const Json& v, const std::string& p) { ps.sobolev.p = detail::read_number(v, p); });
      q.finish();
    });
    r.optional("commutator", [&](const Json& j2, const std::string& p2) {
      detail::ObjectReader q(j2, p2);
      q.optional("alpha", [&](const Json& v, const std::string& p) { ps.commutator.alpha = detail::read_number(v, p); });
      q.optional("eps", [&](const Json& v, const std::string& p) { ps.commutator.eps = detail::read_number(v, p); });
      q.optional("p", [&](const Json& v, const std::string& p) { ps.commutator.p = detail::read_number(v, p); });
      q.optional("p1", [&](const Json& v, const std::string& p) { ps.commutator.p1 = detail::read_number(v, p); });
      q.optional("p2", [&](const Json& v, const std::string& p) { ps.commutator.p2 = detail::read_number(v, p); });
      q.finish();
    });
    r.optional("kernel_case", [&](const Json& j2, const std::string& p2) {
      detail::ObjectReader q(j2, p2);
      q.optional("beta", [&](const Json& v, const std::string& p) { ps.kernel_case.beta = detail::read_number(v, p); });
      q.optional("eps", [&](const Json& v, const std::string& p) { ps.kernel_case.eps = detail::read_number(v, p); });
      q.optional("per_case", [&](const Json& v, const std::string& p) {
        const int c = detail::read_int(v, p);
        detail::require(c >= 1, "'" + p + "' must be positive");
        ps.kernel_case.per_case = static_cast<std::size_t>(c);
      });
      q.finish();
    });
    r.optional("lp_sup", [&](const Json& j2, const std::string& p2) {
      detail::ObjectReader q(j2, p2);
      q.optional("s", [&](const Json& v, const std::string& p) { ps.lp_sup.s = detail::read_number(v, p); });
      q.optional("t", [&](const Json& v, const std::string& p) { ps.lp_sup.t = detail::read_number(v, p); });
      q.optional("p", [&](const Json& v, const std::string& p) { ps.lp_sup.p = detail::read_number(v, p); });
      q.finish();
    });
    r.optional("t1_bound", [&](const Json& j2, const std::string& p2) {
      detail::ObjectReader q(j2, p2);
      q.optional("points", [&](const Json& v, const std::string& p) {
        const int m = detail::read_int(v, p);
        detail::require(m >= 4 && m <= kT1MaxPoints, "'" + p + "' must lie in [4, 32]");
        ps.t1_bound.grid.points_per_axis = m;
      });
      q.optional("s", [&](const Json& v, const std::string& p) { ps.t1_bound.s = detail::read_number(v, p); });
      q.optional("t", [&](const Json& v, const std::string& p) { ps.t1_bound.t = detail::read_number(v, p); });
      q.finish();
    });
    r.finish();
  });
  {
    const ProbeSetups& ps = cfg.probes.setups;
    try {
      const double n1 = 1.0;
      (void)sobolev_exponent(n1, ps.sobolev.s, ps.sobolev.t, ps.sobolev.p);
      ps.commutator.validate();
      if (!(ps.kernel_case.beta > 0.0 && ps.kernel_case.beta < ps.kernel_case.dim) ||
          !(ps.kernel_case.eps > 0.0 && ps.kernel_case.eps <= 1.0)) {
        throw std::invalid_argument("kernel_case: need beta in (0, n) and eps in (0, 1]");
      }
      if (!(ps.lp_sup.t >= 0.0 && ps.lp_sup.t < ps.lp_sup.s && ps.lp_sup.s < 1.0 && ps.lp_sup.p > 1.0)) {
        throw std::invalid_argument("lp_sup: need 0 <= t < s < 1 and p > 1");
      }
      if (!(ps.t1_bound.t > 0.0 && ps.t1_bound.t < ps.t1_bound.s && ps.t1_bound.s < 1.0)) {
        throw std::invalid_argument("t1_bound: need 0 < t < s < 1");
      }
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(std::string("config: probes.") + ex.what());
    }
  }

  top.optional("seed", [&](const Json& v, const std::string& p) {
    if (!v.is_number_unsigned()) throw ConfigError("config: '" + p + "' must be a nonnegative integer");
    cfg.seed = v.get<std::uint64_t>();
  });
  cfg.solver.seed = cfg.seed;
  top.optional("output_dir", [&](const Json& v, const std::string& p) { cfg.output_dir = detail::read_string(v, p); });
  top.finish();
  return cfg;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Reads, overrides and validates a config file. An empty path means defaults.
inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  Json root = path.empty() ? Json::object() : parse_json_text(read_text_file(path), path);
  for (const auto& o : overrides) apply_override(root, o);
  return config_from_json(root);
}

inline const char* to_string(InitialKind k) {
  switch (k) {
    case InitialKind::winding: return "winding";
    case InitialKind::constant: return "constant";
    case InitialKind::random: return "random";
  }
  return "unknown";
}

/// Fully resolved config as JSON (every default present). Keys are sorted, so
/// the dump is independent of the input key order.
inline Json canonical_json(const RunConfig& c) {
  const BallHierarchy h = c.ball_hierarchy();
  const MultiIndex center = c.grid.multi_index(h.center);
  Json center_json = Json::array();
  for (int k = 0; k < c.grid.dim; ++k) center_json.push_back(center[k]);
  const ProbeSetups& ps = c.probes.setups;
  return Json{
      {"grid", {{"dim", c.grid.dim}, {"points_per_axis", c.grid.points_per_axis}, {"box_length", c.grid.box_length}}},
      {"components", c.components},
      {"energy",
       {{"s", c.energy.s}, {"p", c.energy.p}, {"t", c.t}, {"eps_reg", c.energy.eps_reg},
        {"critical_mode", c.energy.critical_mode}}},
      {"solver",
       {{"max_iters", c.solver.max_iters}, {"step0", c.solver.step0}, {"armijo_c", c.solver.armijo_c},
        {"armijo_shrink", c.solver.armijo_shrink}, {"grad_tol", c.solver.grad_tol},
        {"energy_tol", c.solver.energy_tol}}},
      {"hierarchy",
       {{"center", center_json}, {"base_radius", c.hierarchy.base_radius}, {"level_min", c.hierarchy.level_min},
        {"level_max", c.hierarchy.level_max}}},
      {"initial",
       {{"kind", to_string(c.initial.kind)}, {"degree", c.initial.degree}, {"perturbation", c.initial.perturbation}}},
      {"residual",
       {{"basis_size", c.residual.basis_size}, {"support_level", c.residual.support_level},
        {"tolerance", c.residual.tolerance}, {"duality_tolerance", c.residual.duality_tolerance}}},
      {"probes",
       {{"select", c.probes.select},
        {"sobolev", {{"s", ps.sobolev.s}, {"t", ps.sobolev.t}, {"p", ps.sobolev.p}}},
        {"commutator",
         {{"alpha", ps.commutator.alpha}, {"eps", ps.commutator.eps}, {"p", ps.commutator.p},
          {"p1", ps.commutator.p1}, {"p2", ps.commutator.p2}}},
        {"kernel_case", {{"beta", ps.kernel_case.beta}, {"eps", ps.kernel_case.eps}, {"per_case", ps.kernel_case.per_case}}},
        {"lp_sup", {{"s", ps.lp_sup.s}, {"t", ps.lp_sup.t}, {"p", ps.lp_sup.p}}},
        {"t1_bound", {{"points", ps.t1_bound.grid.points_per_axis}, {"s", ps.t1_bound.s}, {"t", ps.t1_bound.t}}}}},
      {"seed", c.seed},
  };
}

/// SHA-256 of the canonical config (the output directory is not part of it).
inline std::string config_hash(const RunConfig& c) { return sha256_hex(canonical_json(c).dump()); }

/// Quantities derived from the config, echoed into the manifest.
inline Json derived_quantities(const RunConfig& c) {
  Json radii = Json::array();
  for (int l = c.hierarchy.level_min; l <= c.hierarchy.level_max; ++l) radii.push_back(std::ldexp(c.hierarchy.base_radius, l));
  const double n = c.grid.dim;
  const double s = c.energy.s;
  Json pstar = nullptr;
  if (c.t < s && c.energy.p < n / (s - c.t)) pstar = sobolev_exponent(n, s, c.t, c.energy.p);
  return Json{{"h", c.grid.spacing()},
              {"sites", c.grid.size()},
              {"p_s", n / s},
              {"p", c.energy.p},
              {"t_lower_bound", t_lower_bound(c.energy)},
              {"p_star", pstar},
              {"level_radii", radii}};
}

// ---------------------------------------------------------------------------
// Initial data

/// Initial field described by the config: a (possibly perturbed) winding
/// (cos(d th + a sin th), sin(d th + a sin th)) along axis 0, the constant e_1,
/// or independent random directions.
inline VectorField initial_field(const RunConfig& c) {
  const GridSpec& g = c.grid;
  const int N = c.components;
  switch (c.initial.kind) {
    case InitialKind::constant:
      return VectorField::sample(g, N, [&](Point) {
        std::vector<double> v(N, 0.0);
        v[0] = 1.0;
        return v;
      });
    case InitialKind::random: return random_unit_field(g, N, c.seed);
    case InitialKind::winding:
    default: {
      const double base = 2.0 * std::numbers::pi / g.box_length;
      return VectorField::sample(g, N, [&](Point q) {
        const double th = base * q[0];
        const double phase = c.initial.degree * th + c.initial.perturbation * std::sin(th);
        std::vector<double> v(N, 0.0);
        v[0] = std::cos(phase);
        v[1] = std::sin(phase);
        return v;
      });
    }
  }
}

// ---------------------------------------------------------------------------
// Field files: one JSON header line, then count little-endian float64 values.

namespace detail {
inline std::uint64_t to_little_endian(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return r;
  }
}

inline std::string encode_block(const std::vector<double>& values) {
  std::string block(values.size() * 8, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const std::uint64_t le = to_little_endian(std::bit_cast<std::uint64_t>(values[i]));
    std::memcpy(block.data() + 8 * i, &le, 8);
  }
  return block;
}
}  // namespace detail

struct FieldFile {
  VectorField field;
  bool unit = false;
  Json extras = Json::object();
};

inline void write_field(const std::string& path, const VectorField& f, const Json& extras = Json::object()) {
  const std::string block = detail::encode_block(f.values);
  const Json header{{"schema_version", kSchemaVersion},
                    {"kind", "fracsphere.field"},
                    {"grid",
                     {{"dim", f.grid.dim}, {"points_per_axis", f.grid.points_per_axis}, {"box_length", f.grid.box_length}}},
                    {"components", f.components},
                    {"unit", f.is_unit()},
                    {"count", f.values.size()},
                    {"digest", sha256_hex(block)},
                    {"extras", extras}};
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_field: cannot open '" + path + "' for writing");
  out << header.dump() << '\n';
  out.write(block.data(), static_cast<std::streamsize>(block.size()));
  if (!out) throw std::runtime_error("write_field: write to '" + path + "' failed");
}

inline FieldFile read_field(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("read_field: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw FormatError("read_field: missing header");
  const Json header = Json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object()) throw FormatError("read_field: header is not a JSON object");
  FieldFile ff;
  std::size_t count = 0;
  std::string digest;
  try {
    if (header.at("schema_version").get<int>() != kSchemaVersion) throw FormatError("read_field: unsupported schema_version");
    const Json& g = header.at("grid");
    ff.field.grid = GridSpec{g.at("dim").get<int>(), g.at("points_per_axis").get<int>(), g.at("box_length").get<double>(), true};
    ff.field.components = header.at("components").get<int>();
    ff.unit = header.at("unit").get<bool>();
    count = header.at("count").get<std::size_t>();
    digest = header.at("digest").get<std::string>();
    if (header.contains("extras")) ff.extras = header.at("extras");
  } catch (const Json::exception& e) {
    throw FormatError(std::string("read_field: malformed header: ") + e.what());
  }
  const GridSpec& g = ff.field.grid;
  if (g.dim < 1 || g.dim > 2 || g.points_per_axis < 1 || ff.field.components < 1 || !(g.box_length > 0.0)) {
    throw FormatError("read_field: header describes an invalid grid");
  }
  if (count != g.size() * static_cast<std::size_t>(ff.field.components)) {
    throw FormatError("read_field: header count " + std::to_string(count) + " does not match grid and components (" +
                      std::to_string(g.size() * ff.field.components) + ")");
  }
  std::string block(count * 8, '\0');
  in.read(block.data(), static_cast<std::streamsize>(block.size()));
  if (static_cast<std::size_t>(in.gcount()) != block.size()) {
    throw FormatError("read_field: truncated block (" + std::to_string(in.gcount()) + " of " +
                      std::to_string(block.size()) + " bytes)");
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("read_field: trailing bytes after block");
  if (sha256_hex(block) != digest) throw FormatError("read_field: digest mismatch");
  ff.field.values.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint64_t le;
    std::memcpy(&le, block.data() + 8 * i, 8);
    ff.field.values[i] = std::bit_cast<double>(detail::to_little_endian(le));
  }
  return ff;
}

// ---------------------------------------------------------------------------
// Frozen constants

struct FrozenConstants {
  ConstantTable constants;
  std::string version;
  double margin = kCalibrationMargin;
  std::uint64_t calibration_seed_base = kCalibrationSeedBase;
};

namespace detail {
inline std::string constants_checksum(const Json& constants, const std::string& version) {
  return sha256_hex(Json{{"constants", constants}, {"version", version}}.dump());
}
}  // namespace detail

inline Json frozen_constants_json(const FrozenConstants& fc) {
  Json constants = Json::object();
  for (const auto& [k, v] : fc.constants) constants[k] = v;
  return Json{{"schema_version", kSchemaVersion},
              {"version", fc.version},
              {"margin", fc.margin},
              {"calibration_seed_base", fc.calibration_seed_base},
              {"constants", constants},
              {"checksum", detail::constants_checksum(constants, fc.version)}};
}

inline void write_frozen_constants(const std::string& path, const FrozenConstants& fc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << frozen_constants_json(fc).dump(2) << '\n';
}

/// Loads the constants file and checks its checksum and completeness.
inline FrozenConstants load_frozen_constants(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("frozen constants: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  const Json j = Json::parse(ss.str(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw FormatError("frozen constants: not a JSON object");
  FrozenConstants fc;
  try {
    fc.version = j.at("version").get<std::string>();
    fc.margin = j.at("margin").get<double>();
    fc.calibration_seed_base = j.at("calibration_seed_base").get<std::uint64_t>();
    const Json& constants = j.at("constants");
    if (detail::constants_checksum(constants, fc.version) != j.at("checksum").get<std::string>()) {
      throw FormatError("frozen constants: checksum mismatch (file was modified)");
    }
    for (auto it = constants.begin(); it != constants.end(); ++it) fc.constants[it.key()] = it.value().get<double>();
  } catch (const Json::exception& e) {
    throw FormatError(std::string("frozen constants: malformed file: ") + e.what());
  }
  for (const auto& name : calibrated_probes()) {
    const auto it = fc.constants.find(name);
    if (it == fc.constants.end()) throw FormatError("frozen constants: missing constant for '" + name + "'");
    if (!(it->second > 0.0) || !std::isfinite(it->second)) {
      throw FormatError("frozen constants: constant for '" + name + "' is not a positive finite number");
    }
  }
  return fc;
}

// ---------------------------------------------------------------------------
// Reports

/// Writes files named <hash prefix>_<suffix> into one directory and remembers
/// what it wrote for the manifest.
class ReportWriter {
 public:
  ReportWriter(std::string dir, const std::string& config_hash)
      : dir_(std::move(dir)), prefix_(config_hash.substr(0, 16)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec || !std::filesystem::is_directory(dir_)) throw std::runtime_error("cannot create output directory '" + dir_ + "'");
  }

  std::string path_for(const std::string& suffix) const { return (std::filesystem::path(dir_) / name_for(suffix)).string(); }
  std::string name_for(const std::string& suffix) const { return prefix_ + "_" + suffix; }
  const std::vector<std::string>& outputs() const { return outputs_; }
  const std::string& dir() const { return dir_; }

  void text(const std::string& suffix, const std::string& content) {
    const std::string path = path_for(suffix);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + path + "'");
    out << content;
    if (!out) throw std::runtime_error("write to '" + path + "' failed");
    outputs_.push_back(name_for(suffix));
  }

  void json(const std::string& suffix, const Json& j) { text(suffix, j.dump(2) + "\n"); }

  void field(const std::string& suffix, const VectorField& f, const Json& extras) {
    write_field(path_for(suffix), f, extras);
    outputs_.push_back(name_for(suffix));
  }

 private:
  std::string dir_;
  std::string prefix_;
  std::vector<std::string> outputs_;
};

inline std::string energy_trace_csv(const SolveReport& r) {
  std::string out = "iteration,energy,step,gradient_norm\n";
  for (std::size_t k = 0; k < r.energy_trace.size(); ++k) {
    out += std::to_string(k) + "," + format_double(r.energy_trace[k]) + "," +
           (k < r.step_trace.size() ? format_double(r.step_trace[k]) : std::string()) + "," +
           (k < r.gradient_trace.size() ? format_double(r.gradient_trace[k]) : std::string()) + "\n";
  }
  return out;
}

inline Json residual_json(const ElResidualReport& r) {
  return Json{{"max_abs", r.max_abs},
              {"max_normalized", r.max_normalized},
              {"elementary_omegas", r.elementary_omegas},
              {"entries", r.entries.size()},
              {"basis", r.basis_description}};
}

inline std::string residual_csv(const ElResidualReport& r) {
  std::string out = "bump,i,j,sign,residual,normalized\n";
  for (const auto& e : r.entries) {
    out += std::to_string(e.bump) + "," + std::to_string(e.i) + "," + std::to_string(e.j) + "," +
           std::to_string(e.sign) + "," + format_double(e.residual) + "," + format_double(e.normalized) + "\n";
  }
  return out;
}

inline Json solve_json(const SolveReport& r, const std::string& config_hash) {
  return Json{{"schema_version", kSchemaVersion},
              {"config_hash", config_hash},
              {"iterations", r.iterations},
              {"converged", r.converged},
              {"stop", to_string(r.stop)},
              {"initial_energy", r.energy_trace.front()},
              {"final_energy", r.energy_trace.back()},
              {"final_gradient_norm", r.final_gradient_norm},
              {"final_el_residual", std::isnan(r.final_el_residual) ? Json(nullptr) : Json(r.final_el_residual)}};
}

inline std::string decay_csv(const DecayTable& t) {
  std::string out = "level,radius,energy,sites,fitted,fit_residual\n";
  for (const auto& r : t.rows) {
    out += std::to_string(r.level) + "," + format_double(r.radius) + "," + format_double(r.energy) + "," +
           std::to_string(r.sites) + "," + (r.fitted ? "1" : "0") + "," +
           (r.fitted ? format_double(r.fit_residual) : std::string()) + "\n";
  }
  return out;
}

inline Json decay_json(const DecayTable& t) {
  return Json{{"theta", t.theta ? Json(*t.theta) : Json(nullptr)},
              {"fit_residual", t.theta ? Json(t.fit_residual) : Json(nullptr)},
              {"monotone", t.monotone}};
}

inline std::string probe_csv(const ProbeReport& r) {
  std::string out = "id,lhs,rhs,ratio\n";
  for (const auto& row : r.rows) {
    out += row.id + "," + format_double(row.lhs) + "," + format_double(row.rhs) + "," + format_double(row.ratio) + "\n";
  }
  return out;
}

inline Json probe_summary_json(const ProbeReport& r) {
  return Json{{"probe", r.name},
              {"worst_ratio", r.worst_ratio},
              {"frozen_C", std::isnan(r.frozen_C) ? Json(nullptr) : Json(r.frozen_C)},
              {"pass", r.pass},
              {"sample_count", r.sample_count},
              {"seed", r.seed}};
}

inline void emit_probe(ReportWriter& w, const ProbeReport& r) {
  w.text("probe_" + r.name + ".csv", probe_csv(r));
  w.json("probe_" + r.name + ".json", probe_summary_json(r));
}

/// UTC ISO-8601 timestamp; only ever written to the manifest.
inline std::string utc_timestamp(std::chrono::system_clock::time_point tp) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct RunManifest {
  std::string command;
  std::string config_hash;
  Json derived = Json::object();
  std::chrono::system_clock::time_point started = std::chrono::system_clock::now();
  int exit_code = 0;
};

/// manifest.json: the only file that carries timestamps and wall time.
inline void write_manifest(const ReportWriter& w, const RunManifest& m) {
  const auto finished = std::chrono::system_clock::now();
  const Json j{{"schema_version", kSchemaVersion},
               {"artifact_version", kArtifactVersion},
               {"command", m.command},
               {"config_hash", m.config_hash},
               {"derived", m.derived},
               {"outputs", w.outputs()},
               {"exit_code", m.exit_code},
               {"workers", workers()},
               {"started", utc_timestamp(m.started)},
               {"finished", utc_timestamp(finished)},
               {"wall_seconds", std::chrono::duration<double>(finished - m.started).count()}};
  const std::string path = (std::filesystem::path(w.dir()) / "manifest.json").string();
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

}  // namespace fracsphere
