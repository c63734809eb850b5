#pragma once

// Subcommands behind the fracsphere executable. Exit codes: 0 pass,
// 1 verification failure, 2 config error, 3 non-convergence.

#include "fracsphere/energy.hpp"
#include "fracsphere/frac_ops.hpp"
#include "fracsphere/grid.hpp"
#include "fracsphere/io.hpp"
#include "fracsphere/lab.hpp"
#include "fracsphere/parallel.hpp"
#include "fracsphere/solver.hpp"

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#ifndef FRACSPHERE_CONSTANTS_PATH
#define FRACSPHERE_CONSTANTS_PATH "data/frozen_constants.json"
#endif

namespace fracsphere {

enum ExitCode : int { kExitPass = 0, kExitVerifyFailed = 1, kExitConfigError = 2, kExitNotConverged = 3 };

struct Command {
  std::string name;  // solve, verify, probe, decay, selftest
  std::string config_path;
  std::string out_dir;  // overrides output_dir when set
  std::vector<std::string> overrides;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::string field_path;
  std::string constants_path = FRACSPHERE_CONSTANTS_PATH;
};

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"solve", "verify", "probe", "decay", "selftest"};
  return names;
}

namespace detail {

inline RunConfig resolve_config(const Command& cmd) {
  std::vector<std::string> overrides = cmd.overrides;
  if (cmd.seed) overrides.push_back("seed=" + std::to_string(*cmd.seed));
  RunConfig cfg = load_config(cmd.config_path, overrides);
  if (!cmd.out_dir.empty()) cfg.output_dir = cmd.out_dir;
  return cfg;
}

inline ElResidualReport run_residual_suite(const VectorField& u, const RunConfig& cfg) {
  return el_residual_suite(u, cfg.energy, cfg.ball_hierarchy(), cfg.residual.support_level, cfg.residual.basis_size);
}

inline std::optional<DecayTable> maybe_decay(const VectorField& u, const RunConfig& cfg) {
  const BallHierarchy h = cfg.ball_hierarchy();
  if (h.levels() < 4) return std::nullopt;
  return decay_profile(u, h, cfg.energy);
}

inline int cmd_solve(const Command& cmd, std::ostream& log) {
  const RunConfig cfg = resolve_config(cmd);
  const std::string hash = config_hash(cfg);
  RunManifest manifest{"solve", hash, derived_quantities(cfg)};
  ReportWriter w(cfg.output_dir, hash);

  SolveResult result = minimize(initial_field(cfg), cfg.energy, cfg.solver);
  const ElResidualReport el = run_residual_suite(result.u, cfg);
  result.report.final_el_residual = el.max_normalized;
  const auto decay = maybe_decay(result.u, cfg);

  Json summary = solve_json(result.report, hash);
  summary["el_residual"] = residual_json(el);
  summary["residual_tolerance"] = cfg.residual.tolerance;
  if (decay) summary["decay"] = decay_json(*decay);
  w.json("solve.json", summary);
  w.text("energy_trace.csv", energy_trace_csv(result.report));
  if (decay) w.text("decay.csv", decay_csv(*decay));
  w.field("field.bin", result.u, Json{{"iteration", result.report.iterations}, {"config_hash", hash}});

  int code = kExitPass;
  if (!result.report.converged) {
    code = kExitNotConverged;
  } else if (!(el.max_normalized <= cfg.residual.tolerance)) {
    code = kExitVerifyFailed;
  }
  log << "solve: " << result.report.iterations << " iterations, stop=" << to_string(result.report.stop)
      << ", energy=" << format_double(result.report.energy_trace.back())
      << ", el_residual=" << format_double(el.max_normalized) << "\n";
  manifest.exit_code = code;
  write_manifest(w, manifest);
  return code;
}

inline int cmd_verify(const Command& cmd, std::ostream& log) {
  const RunConfig cfg = resolve_config(cmd);
  if (cmd.field_path.empty()) throw ConfigError("verify: --field is required");
  FieldFile ff;
  try {
    ff = read_field(cmd.field_path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  const VectorField& u = ff.field;
  if (!(u.grid == cfg.grid) || u.components != cfg.components) {
    throw ConfigError("verify: field grid or component count does not match the config");
  }
  const std::string hash = config_hash(cfg);
  RunManifest manifest{"verify", hash, derived_quantities(cfg)};
  ReportWriter w(cfg.output_dir, hash);
  Json report{{"schema_version", kSchemaVersion}, {"config_hash", hash}, {"field_digest", sha256_hex(detail::encode_block(u.values))}};

  bool pass = u.is_unit();
  report["unit"] = pass;
  if (pass) {
    const ElResidualReport el = run_residual_suite(u, cfg);
    const bool el_pass = el.max_normalized <= cfg.residual.tolerance;
    report["el_residual"] = residual_json(el);
    report["el_residual"]["pass"] = el_pass;
    w.text("residual.csv", residual_csv(el));

    const BallHierarchy hier = cfg.ball_hierarchy();
    Json holes = Json::array();
    bool holes_pass = true;
    for (int L = hier.level_min + 1; L <= hier.level_max; ++L) {
      const HoleFillResult hf = holefill_check(u, hier, L - 1, L, cfg.energy);
      holes_pass = holes_pass && hf.pass;
      holes.push_back({{"K", L - 1}, {"L", L}, {"lhs", hf.lhs}, {"rhs", hf.rhs}, {"pass", hf.pass}});
    }
    report["holefill"] = holes;

    // test function: a smooth bump filling the top ball of the hierarchy
    const ScalarField phi = smooth_bump(u.grid, u.grid.position(hier.center), hier.radius(hier.level_max));
    const DualityResult d = duality_check(u, phi, Region::full(u.grid), cfg.t, cfg.energy, 0);
    const bool dual_pass = d.relative_error <= cfg.residual.duality_tolerance;
    report["duality"] = {{"lhs", d.lhs}, {"rhs", d.rhs}, {"relative_error", d.relative_error}, {"pass", dual_pass}};
    pass = el_pass && holes_pass && dual_pass;
    log << "verify: el_residual=" << format_double(el.max_normalized) << (el_pass ? " ok" : " FAIL")
        << ", holefill " << (holes_pass ? "ok" : "FAIL") << ", duality=" << format_double(d.relative_error)
        << (dual_pass ? " ok" : " FAIL") << "\n";
  } else {
    log << "verify: field is not unit-constrained\n";
  }
  report["pass"] = pass;
  w.json("verify.json", report);
  const int code = pass ? kExitPass : kExitVerifyFailed;
  manifest.exit_code = code;
  write_manifest(w, manifest);
  return code;
}

inline int cmd_probe(const Command& cmd, std::ostream& log) {
  const RunConfig cfg = resolve_config(cmd);
  FrozenConstants fc;
  try {
    fc = load_frozen_constants(cmd.constants_path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  const std::string hash = config_hash(cfg);
  RunManifest manifest{"probe", hash, derived_quantities(cfg)};
  manifest.derived["frozen_constants_version"] = fc.version;
  ReportWriter w(cfg.output_dir, hash);
  const ProbeSeeds seeds = ProbeSeeds::from_base(cfg.seed);
  bool pass = true;
  for (const auto& name : cfg.probes.select) {
    const ProbeReport rep = run_probe(name, cfg.probes.setups, seeds, fc.constants);
    emit_probe(w, rep);
    pass = pass && rep.pass;
    log << "probe " << name << ": worst_ratio=" << format_double(rep.worst_ratio)
        << " C=" << format_double(rep.frozen_C) << (rep.pass ? " pass" : " FAIL") << "\n";
  }
  const int code = pass ? kExitPass : kExitVerifyFailed;
  manifest.exit_code = code;
  write_manifest(w, manifest);
  return code;
}

inline int cmd_decay(const Command& cmd, std::ostream& log) {
  const RunConfig cfg = resolve_config(cmd);
  VectorField u;
  if (cmd.field_path.empty()) {
    u = initial_field(cfg);
  } else {
    try {
      u = read_field(cmd.field_path).field;
    } catch (const FormatError& e) {
      throw ConfigError(e.what());
    }
    if (!(u.grid == cfg.grid)) throw ConfigError("decay: field grid does not match the config");
  }
  if (cfg.ball_hierarchy().levels() < 4) throw ConfigError("decay: hierarchy must span at least 4 levels");
  const std::string hash = config_hash(cfg);
  RunManifest manifest{"decay", hash, derived_quantities(cfg)};
  ReportWriter w(cfg.output_dir, hash);
  const DecayTable t = decay_profile(u, cfg.ball_hierarchy(), cfg.energy);
  w.text("decay.csv", decay_csv(t));
  w.json("decay.json", decay_json(t));
  log << "decay: theta=" << (t.theta ? format_double(*t.theta) : std::string("undefined"))
      << (t.monotone ? "" : " (energies not monotone)") << "\n";
  const int code = t.monotone ? kExitPass : kExitVerifyFailed;
  manifest.exit_code = code;
  write_manifest(w, manifest);
  return code;
}

struct SelfCheck {
  std::string name;
  std::function<bool()> run;
};

inline bool near(double a, double b, double tol) { return std::abs(a - b) <= tol; }

template <class F>
bool throws(F&& f) {
  try {
    f();
  } catch (const std::exception&) {
    return true;
  }
  return false;
}

inline double max_abs(const ScalarField& f) {
  double m = 0.0;
  for (double v : f.values) m = std::max(m, std::abs(v));
  return m;
}

inline std::vector<SelfCheck> selftest_checks(const std::string& constants_path) {
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<SelfCheck> c;
  c.push_back({"grid spacing", [=] { return make_grid(1, 64, two_pi).spacing() == two_pi / 64; }});
  c.push_back({"grid site count", [] { return make_grid(2, 16, 1.0).size() == 256; }});
  c.push_back({"grid rejects dim 3", [] { return throws([] { make_grid(3, 16, 1.0); }); }});
  c.push_back({"cutoff is 1 at the center and 0 outside", [=] {
                 const GridSpec g = make_grid(1, 128, two_pi);
                 const BallHierarchy h(g, 64, 0.2, 0, 2);
                 const ScalarField eta = cutoff_smooth(h, 1);
                 const double far = h.radius(2) + g.spacing();
                 bool zero = true;
                 for (std::size_t x = 0; x < g.size(); ++x)
                   if (g.distance(x, 64) >= far - 1e-12) zero = zero && eta[x] == 0.0;
                 return eta[64] == 1.0 && zero;
               }});
  c.push_back({"ball mean of a constant", [=] {
                 const GridSpec g = make_grid(1, 64, two_pi);
                 return ball_mean(ScalarField(g, 3.5), BallHierarchy(g, 32, 0.5, 0, 1), 1) == 3.5;
               }});
  c.push_back({"fractional Laplacian of a constant", [=] {
                 return max_abs(frac_laplacian(ScalarField(make_grid(1, 64, two_pi), 2.0), {0.5})) <= 1e-12;
               }});
  c.push_back({"fractional Laplacian eigenfunction", [=] {
                 const GridSpec g = make_grid(1, 64, two_pi);
                 const ScalarField f = ScalarField::sample(g, [](Point q) { return std::cos(3.0 * q[0]); });
                 const ScalarField lf = frac_laplacian(f, {0.5});
                 double err = 0.0;
                 for (std::size_t x = 0; x < g.size(); ++x) err = std::max(err, std::abs(lf[x] - std::sqrt(3.0) * f[x]));
                 return err <= 1e-12;
               }});
  c.push_back({"Riesz potential inverts the Laplacian", [=] {
                 const GridSpec g = make_grid(1, 64, two_pi);
                 ScalarField f = random_band_limited(g, 7);
                 const ScalarField back = riesz_potential(frac_laplacian(f, {0.4}), 0.4);
                 double err = 0.0;
                 for (std::size_t x = 0; x < g.size(); ++x) err = std::max(err, std::abs(back[x] - f[x]));
                 return err <= 1e-10;
               }});
  c.push_back({"Riesz potential rejects a constant", [=] {
                 return throws([=] { riesz_potential(ScalarField(make_grid(1, 64, two_pi), 1.0), 0.4); });
               }});
  c.push_back({"single mode lives in three bands", [=] {
                 const GridSpec g = make_grid(1, 128, two_pi);
                 const LPBank bank = LPBank::covering(g);
                 const int j = 3;
                 const ScalarField f = ScalarField::sample(g, [](Point q) { return std::cos(8.0 * q[0]); });
                 bool ok = true;
                 for (int k = bank.level_min(); k <= bank.level_max(); ++k) {
                   const bool zero = max_abs(lp_project(f, bank, k)) <= 1e-12;
                   if (std::abs(k - j) > 1) ok = ok && zero;
                 }
                 return ok;
               }});
  c.push_back({"commutator with a constant vanishes", [=] {
                 const GridSpec g = make_grid(1, 64, two_pi);
                 return max_abs(commutator_H(random_band_limited(g, 3), ScalarField(g, 2.0), 0.5)) <= 1e-10;
               }});
  c.push_back({"commutator is symmetric", [=] {
                 const GridSpec g = make_grid(1, 64, two_pi);
                 const ScalarField a = random_band_limited(g, 1), b = random_band_limited(g, 2);
                 return commutator_H(a, b, 0.5).values == commutator_H(b, a, 0.5).values;
               }});
  c.push_back({"energy of a constant map", [=] {
                 const GridSpec g = make_grid(1, 32, two_pi);
                 const VectorField u = VectorField::sample(g, 2, [](Point) { return std::vector<double>{0.6, 0.8}; });
                 return energy(u, EnergyParams{}) == 0.0;
               }});
  c.push_back({"energy rotation invariance", [=] {
                 const GridSpec g = make_grid(1, 32, two_pi);
                 const VectorField u = random_unit_field(g, 2, 5);
                 VectorField q(g, 2);
                 const double a = 0.7;
                 for (std::size_t x = 0; x < g.size(); ++x) {
                   q.at(x, 0) = std::cos(a) * u.at(x, 0) - std::sin(a) * u.at(x, 1);
                   q.at(x, 1) = std::sin(a) * u.at(x, 0) + std::cos(a) * u.at(x, 1);
                 }
                 const double e = energy(u, EnergyParams{});
                 return std::abs(energy(q, EnergyParams{}) - e) <= 1e-12 * e;
               }});
  c.push_back({"first variation of radial and zero directions", [=] {
                 const GridSpec g = make_grid(1, 32, two_pi);
                 const VectorField u = random_unit_field(g, 3, 9);
                 VectorField radial = u;
                 for (std::size_t x = 0; x < g.size(); ++x)
                   for (int i = 0; i < 3; ++i) radial.at(x, i) *= 1.0 + 0.1 * static_cast<double>(x % 5);
                 return std::abs(first_variation(u, radial, EnergyParams{})) <= 1e-10 &&
                        first_variation(u, VectorField(g, 3), EnergyParams{}) == 0.0;
               }});
  c.push_back({"EL residual with omega = 0", [=] {
                 const GridSpec g = make_grid(1, 32, two_pi);
                 const VectorField u = random_unit_field(g, 2, 4);
                 return el_residual(u, random_band_limited(g, 4), SignMatrix::zero(2), EnergyParams{},
                                    Region::full(g)) == 0.0;
               }});
  c.push_back({"T operator of a constant map", [=] {
                 const GridSpec g = make_grid(1, 32, two_pi);
                 const VectorField u = VectorField::sample(g, 2, [](Point) { return std::vector<double>{1.0, 0.0}; });
                 const VectorField T = t_operator(u, Region::full(g), 0.45, EnergyParams{});
                 return std::all_of(T.values.begin(), T.values.end(), [](double v) { return v == 0.0; });
               }});
  c.push_back({"hole filling on a constant map", [=] {
                 const GridSpec g = make_grid(1, 64, two_pi);
                 const VectorField u = VectorField::sample(g, 2, [](Point) { return std::vector<double>{1.0, 0.0}; });
                 const HoleFillResult r = holefill_check(u, BallHierarchy(g, 32, 0.3, 0, 2), 1, 2, EnergyParams{});
                 return r.lhs == 0.0 && r.rhs == 0.0 && r.pass;
               }});
  c.push_back({"sphere projection", [=] {
                 const GridSpec g = make_grid(1, 4, 1.0);
                 const VectorField v = VectorField::sample(g, 2, [](Point) { return std::vector<double>{3.0, 4.0}; });
                 const VectorField p = project_sphere(v);
                 return near(p.at(0, 0), 0.6, 1e-15) && near(p.at(0, 1), 0.8, 1e-15);
               }});
  c.push_back({"tangent projection of u", [=] {
                 const VectorField u = random_unit_field(make_grid(1, 16, 1.0), 3, 2);
                 const VectorField t = tangent_project(u, u);
                 return std::all_of(t.values.begin(), t.values.end(), [](double v) { return std::abs(v) <= 1e-15; });
               }});
  c.push_back({"constant initial data converges at once", [=] {
                 const GridSpec g = make_grid(1, 16, two_pi);
                 const VectorField u = VectorField::sample(g, 2, [](Point) { return std::vector<double>{0.0, 1.0}; });
                 const SolveResult r = minimize(u, EnergyParams{}, SolverConfig{});
                 return r.report.converged && r.report.iterations == 0 && r.report.final_gradient_norm == 0.0;
               }});
  c.push_back({"residual suite counts one omega for N = 2", [=] {
                 const GridSpec g = make_grid(1, 64, two_pi);
                 const VectorField u = VectorField::sample(g, 2, [](Point) { return std::vector<double>{1.0, 0.0}; });
                 const ElResidualReport r = el_residual_suite(u, EnergyParams{}, BallHierarchy(g, 32, 0.5, 0, 1), 0, 2);
                 return r.elementary_omegas == 1 && r.max_abs == 0.0;
               }});
  c.push_back({"decay of a constant map is undefined", [=] {
                 const GridSpec g = make_grid(1, 64, two_pi);
                 const VectorField u = VectorField::sample(g, 2, [](Point) { return std::vector<double>{1.0, 0.0}; });
                 return !decay_profile(u, BallHierarchy(g, 32, 0.2, 0, 3), EnergyParams{}).theta.has_value();
               }});
  c.push_back({"Hoelder fit of a Lipschitz map and a jump", [=] {
                 const GridSpec g = make_grid(1, 256, two_pi);
                 std::vector<double> grid;
                 for (int k = 2; k <= 10; ++k) grid.push_back(k / 10.0);
                 const auto lip = holder_fit(as_vector(ScalarField::sample(g, [](Point q) { return std::sin(q[0]); })), grid);
                 const auto jump = holder_fit(
                     as_vector(ScalarField::sample(g, [](Point q) { return q[0] < std::numbers::pi ? 0.0 : 1.0; })), grid);
                 return lip.best_beta && *lip.best_beta == 1.0 && !jump.best_beta;
               }});
  c.push_back({"Lagrange identity on basis vectors", [] {
                 const std::vector<double> e1{1.0, 0.0}, e2{0.0, 1.0};
                 const LagrangeResult a = lagrange_check(e1, e1);
                 const LagrangeResult b = lagrange_check(e1, e2);
                 return a.lhs == 1.0 && a.rhs == 1.0 && a.equal && b.equal && b.rhs == 1.0;
               }});
  c.push_back({"kernel case classification", [] {
                 const double x[] = {0.0}, y[] = {0.1}, z[] = {10.0};
                 const KernelCaseResult r = kernel_case_check(x, y, z, 0.5, 0.3, 1.0);
                 const KernelCaseResult same = kernel_case_check(x, x, z, 0.5, 0.3, 1.0);
                 return r.case_id == 1 && same.lhs == 0.0 && same.pass;
               }});
  c.push_back({"Sobolev exponent arithmetic", [] {
                 return sobolev_exponent(Rational(1), Rational(1, 2), Rational(1, 4), Rational(2)) == Rational(4);
               }});
  c.push_back({"config fills the critical exponent", [] {
                 const RunConfig cfg = config_from_json(Json{{"energy", {{"s", 0.5}, {"critical_mode", true}, {"t", 0.45}}}});
                 return cfg.energy.p == 2.0;
               }});
  c.push_back({"config rejects negative t and unknown keys", [] {
                 return throws([] { config_from_json(Json{{"energy", {{"t", -0.1}}}}); }) &&
                        throws([] { config_from_json(Json{{"solver", {{"stepsize", 0.1}}}}); });
               }});
  c.push_back({"field round trip", [] {
                 const auto dir = std::filesystem::temp_directory_path() / "fracsphere_selftest";
                 std::filesystem::create_directories(dir);
                 const std::string path = (dir / "field.bin").string();
                 const VectorField u = random_unit_field(make_grid(1, 32, 1.0), 3, 11);
                 write_field(path, u);
                 const bool same = read_field(path).field.values == u.values;
                 std::filesystem::remove_all(dir);
                 return same;
               }});
  c.push_back({"frozen constants integrity", [constants_path] {
                 try {
                   load_frozen_constants(constants_path);
                   return true;
                 } catch (const std::exception&) {
                   return false;
                 }
               }});
  return c;
}

inline int cmd_selftest(const Command& cmd, std::ostream& log) {
  int failed = 0;
  for (const auto& check : selftest_checks(cmd.constants_path)) {
    bool ok = false;
    try {
      ok = check.run();
    } catch (const std::exception& e) {
      log << "  (" << e.what() << ")\n";
    }
    log << (ok ? "PASS " : "FAIL ") << check.name << "\n";
    if (!ok) ++failed;
  }
  log << "selftest: " << failed << " failure(s)\n";
  return failed == 0 ? kExitPass : kExitVerifyFailed;
}

}  // namespace detail

/// Runs one command. Configuration and I/O problems are reported on err with
/// exit 2.
inline int run_command(const Command& cmd, std::ostream& log, std::ostream& err) {
  if (cmd.workers) set_workers(*cmd.workers);
  try {
    if (cmd.name == "solve") return detail::cmd_solve(cmd, log);
    if (cmd.name == "verify") return detail::cmd_verify(cmd, log);
    if (cmd.name == "probe") return detail::cmd_probe(cmd, log);
    if (cmd.name == "decay") return detail::cmd_decay(cmd, log);
    if (cmd.name == "selftest") return detail::cmd_selftest(cmd, log);
    err << "unknown command '" << cmd.name << "'\n";
    return kExitConfigError;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfigError;
  }
}

}  // namespace fracsphere
