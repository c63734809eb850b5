#include "fracsphere/app.hpp"
#include "fracsphere/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace fracsphere;
namespace fs = std::filesystem;

namespace {

const double kTwoPi = 2.0 * std::numbers::pi;

// Fresh scratch directory per test.
class IoTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / ("fracsphere_io_" + std::to_string(::getpid()) + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name), std::ios::binary) << text;
    return path(name);
  }

  static std::string slurp(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
  }

  fs::path dir_;
};

RunConfig parse(const std::string& text) { return config_from_json(Json::parse(text)); }

template <class F>
std::string config_error(F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

TEST(Config, DefaultsAreValid) {
  const RunConfig c = config_from_json(Json::object());
  EXPECT_EQ(c.grid.points_per_axis, 128);
  EXPECT_EQ(c.energy.p, 2.0);
  EXPECT_DOUBLE_EQ(c.t, 0.45);
  EXPECT_EQ(c.probes.select, all_probes());
}

TEST(Config, CriticalModeFillsExponent) {
  const RunConfig c = parse(R"({"grid": {"dim": 1}, "energy": {"s": 0.5, "critical_mode": true}})");
  EXPECT_EQ(c.energy.p, 2.0);
  const RunConfig d = parse(R"({"energy": {"s": 0.25, "critical_mode": true, "t": 0.2}})");
  EXPECT_EQ(d.energy.p, 4.0);
  const std::string msg = config_error([] { parse(R"({"energy": {"s": 0.5, "p": 3, "critical_mode": true}})"); });
  EXPECT_NE(msg.find("critical_mode"), std::string::npos);
}

TEST(Config, NegativeOrderRejected) {
  const std::string msg = config_error([] { parse(R"({"energy": {"s": 0.5, "p": 2, "t": -0.1}})"); });
  EXPECT_NE(msg.find("energy.t"), std::string::npos);
  EXPECT_NE(msg.find("positive"), std::string::npos);
}

TEST(Config, AdmissibilityBoundNamed) {
  // 1 - (1 - s) p = 0.25 for s = 0.5, p = 1.5
  const std::string msg = config_error([] { parse(R"({"energy": {"s": 0.5, "p": 1.5, "eps_reg": 1e-3, "t": 0.2}})"); });
  EXPECT_NE(msg.find("t > 1 - (1 - s) p"), std::string::npos);
  EXPECT_NO_THROW(parse(R"({"energy": {"s": 0.5, "p": 1.5, "eps_reg": 1e-3, "t": 0.3}})"));
}

TEST(Config, UnknownKeyIsHardError) {
  const std::string msg = config_error([] { parse(R"({"solver": {"stepsize": 0.1}})"); });
  EXPECT_NE(msg.find("unknown key 'solver.stepsize'"), std::string::npos);
  EXPECT_NE(config_error([] { parse(R"({"stepsize": 0.1})"); }).find("'stepsize'"), std::string::npos);
}

TEST(Config, OtherConstraints) {
  for (const char* bad : {R"({"grid": {"points_per_axis": 100}})", R"({"energy": {"s": 1.2}})",
                          R"({"energy": {"s": 0.5, "p": 1.5}})", R"({"solver": {"armijo_c": 2}})",
                          R"({"hierarchy": {"base_radius": 1.0, "level_max": 3}})",
                          R"({"probes": {"select": ["nope"]}})", R"({"probes": {"t1_bound": {"points": 64}}})",
                          R"({"probes": {"commutator": {"p": 3}}})", R"({"seed": -1})", R"({"components": "two"})"}) {
    EXPECT_THROW(parse(bad), ConfigError) << bad;
  }
}

TEST_F(IoTest, ParseErrorReportsLineAndColumn) {
  const std::string p = write("bad.json", "{\n  \"seed\": 1,\n  \"grid\": {\"dim\": }\n}\n");
  const std::string msg = config_error([&] { load_config(p); });
  EXPECT_NE(msg.find("line 3, column 19"), std::string::npos) << msg;
}

TEST(Config, HashIgnoresKeyOrder) {
  const RunConfig a = parse(R"({"seed": 4, "energy": {"s": 0.5, "p": 2}, "grid": {"points_per_axis": 128, "dim": 1}})");
  const RunConfig b = parse(R"({"grid": {"dim": 1, "points_per_axis": 128}, "energy": {"p": 2, "s": 0.5}, "seed": 4})");
  EXPECT_EQ(config_hash(a), config_hash(b));
  EXPECT_EQ(config_hash(a).size(), 64u);
  const RunConfig c = parse(R"({"seed": 5, "energy": {"s": 0.5, "p": 2}, "grid": {"points_per_axis": 128, "dim": 1}})");
  EXPECT_NE(config_hash(a), config_hash(c));
  const RunConfig d = parse(R"({"seed": 4, "energy": {"s": 0.5, "p": 2}, "grid": {"points_per_axis": 128, "dim": 1},
                                "output_dir": "elsewhere"})");
  EXPECT_EQ(config_hash(a), config_hash(d));
}

TEST(Config, OverridesRevalidated) {
  Json root = Json::object();
  apply_override(root, "energy.s=0.25");
  apply_override(root, "energy.t=0.2");
  apply_override(root, "initial.kind=random");
  const RunConfig c = config_from_json(root);
  EXPECT_EQ(c.energy.s, 0.25);
  EXPECT_EQ(c.initial.kind, InitialKind::random);
  Json bad = Json::object();
  apply_override(bad, "energy.t=-0.1");
  EXPECT_THROW(config_from_json(bad), ConfigError);
  Json typo = Json::object();
  apply_override(typo, "solver.stepsize=1");
  EXPECT_THROW(config_from_json(typo), ConfigError);
  EXPECT_THROW(apply_override(root, "novalue"), ConfigError);
  EXPECT_THROW(apply_override(root, "energy..s=1"), ConfigError);
}

TEST(Config, DerivedQuantities) {
  const RunConfig c = parse(R"({"hierarchy": {"base_radius": 0.25, "level_min": 0, "level_max": 2}})");
  const Json d = derived_quantities(c);
  EXPECT_DOUBLE_EQ(d["h"].get<double>(), kTwoPi / 128);
  EXPECT_EQ(d["p_s"].get<double>(), 2.0);
  EXPECT_EQ(d["level_radii"], (Json{0.25, 0.5, 1.0}));
  // p* = n p / (n - (s - t) p) = 2 / (1 - 0.1)
  EXPECT_DOUBLE_EQ(d["p_star"].get<double>(), 2.0 / 0.9);
}

TEST_F(IoTest, FieldRoundTripIsBitExact) {
  const GridSpec g = make_grid(2, 8, 3.0);
  const VectorField u = random_unit_field(g, 3, 17);
  write_field(path("u.bin"), u, Json{{"tag", "x"}});
  const FieldFile ff = read_field(path("u.bin"));
  EXPECT_TRUE(ff.field.grid == g);
  EXPECT_EQ(ff.field.components, 3);
  EXPECT_TRUE(ff.unit);
  EXPECT_EQ(ff.extras["tag"], "x");
  ASSERT_EQ(ff.field.values.size(), u.values.size());
  EXPECT_EQ(std::memcmp(ff.field.values.data(), u.values.data(), 8 * u.values.size()), 0);
}

TEST_F(IoTest, CorruptedBlockFailsDigest) {
  const VectorField u = random_unit_field(make_grid(1, 16, 1.0), 2, 3);
  write_field(path("u.bin"), u);
  std::string bytes = slurp(path("u.bin"));
  bytes[bytes.size() - 5] ^= 0x10;
  write("u.bin", bytes);
  try {
    read_field(path("u.bin"));
    FAIL() << "no error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("digest"), std::string::npos);
  }
}

TEST_F(IoTest, TruncatedBlockRejected) {
  write_field(path("u.bin"), random_unit_field(make_grid(1, 16, 1.0), 2, 3));
  const std::string bytes = slurp(path("u.bin"));
  write("u.bin", bytes.substr(0, bytes.size() - 8));
  try {
    read_field(path("u.bin"));
    FAIL() << "no error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }
  write("v.bin", bytes + "x");
  EXPECT_THROW(read_field(path("v.bin")), FormatError);
}

TEST_F(IoTest, HeaderBlockMismatchIsStructural) {
  write_field(path("u.bin"), random_unit_field(make_grid(1, 16, 1.0), 2, 3));
  const std::string bytes = slurp(path("u.bin"));
  const auto nl = bytes.find('\n');
  Json header = Json::parse(bytes.substr(0, nl));
  header["grid"]["points_per_axis"] = 8;
  write("u.bin", header.dump() + bytes.substr(nl));
  try {
    read_field(path("u.bin"));
    FAIL() << "no error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("does not match"), std::string::npos);
  }
  write("w.bin", "not json\n");
  EXPECT_THROW(read_field(path("w.bin")), FormatError);
  EXPECT_THROW(read_field(path("missing.bin")), FormatError);
}

TEST_F(IoTest, FieldHeaderLayout) {
  write_field(path("u.bin"), VectorField(make_grid(1, 4, 1.0), 2, 0.0));
  const std::string bytes = slurp(path("u.bin"));
  const auto nl = bytes.find('\n');
  const Json header = Json::parse(bytes.substr(0, nl));
  EXPECT_EQ(header["schema_version"], kSchemaVersion);
  EXPECT_EQ(header["count"], 8);
  EXPECT_FALSE(header["unit"].get<bool>());
  EXPECT_EQ(bytes.size() - nl - 1, 64u);
}

TEST(Csv, HeaderAndFullPrecision) {
  SolveReport r;
  r.energy_trace = {1.0 / 3.0, 0.1};
  r.step_trace = {0.05};
  r.gradient_trace = {2.0 / 3.0, 1e-9};
  const std::string csv = energy_trace_csv(r);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "iteration,energy,step,gradient_norm");
  EXPECT_NE(csv.find("0.33333333333333331"), std::string::npos);
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");

  DecayTable t;
  t.rows.push_back({1, 0.2, 0.5, 9, true, 0.0});
  EXPECT_EQ(decay_csv(t).substr(0, decay_csv(t).find('\n')), "level,radius,energy,sites,fitted,fit_residual");
  ProbeReport p;
  detail::add_probe_row(p, "7", 1.0, 3.0);
  EXPECT_EQ(probe_csv(p), "id,lhs,rhs,ratio\n7,1,3,0.33333333333333331\n");
  ElResidualReport e;
  EXPECT_EQ(residual_csv(e), "bump,i,j,sign,residual,normalized\n");
}

TEST(ProbeSummary, Fields) {
  ProbeReport p;
  p.name = "sobolev";
  detail::add_probe_row(p, "1", 1.0, 2.0);
  detail::judge(p, 0.75);
  const Json j = probe_summary_json(p);
  EXPECT_EQ(j["probe"], "sobolev");
  EXPECT_EQ(j["worst_ratio"], 0.5);
  EXPECT_EQ(j["frozen_C"], 0.75);
  EXPECT_TRUE(j["pass"].get<bool>());
}

TEST_F(IoTest, FrozenConstantsRoundTripAndTamper) {
  FrozenConstants fc;
  fc.version = "test";
  for (const auto& name : calibrated_probes()) fc.constants[name] = 1.25;
  write_frozen_constants(path("c.json"), fc);
  const FrozenConstants back = load_frozen_constants(path("c.json"));
  EXPECT_EQ(back.constants, fc.constants);
  EXPECT_EQ(back.version, "test");

  Json j = Json::parse(slurp(path("c.json")));
  j["constants"]["sobolev"] = 9.0;
  write("t.json", j.dump());
  try {
    load_frozen_constants(path("t.json"));
    FAIL() << "no error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos);
  }

  FrozenConstants partial = fc;
  partial.constants.erase("lp_sup");
  write_frozen_constants(path("p.json"), partial);
  EXPECT_THROW(load_frozen_constants(path("p.json")), FormatError);
}

TEST(FrozenConstants, ShippedFileIsIntact) {
  const FrozenConstants fc = load_frozen_constants(FRACSPHERE_CONSTANTS_PATH);
  EXPECT_EQ(fc.margin, kCalibrationMargin);
  EXPECT_EQ(fc.calibration_seed_base, kCalibrationSeedBase);
  EXPECT_EQ(fc.constants.size(), calibrated_probes().size());
}

Command probe_command(const std::string& config, const std::string& out) {
  Command cmd;
  cmd.name = "probe";
  cmd.config_path = config;
  cmd.out_dir = out;
  return cmd;
}

TEST_F(IoTest, EmptyProbeListWritesManifestOnly) {
  const std::string cfg = write("cfg.json", R"({"probes": {"select": []}})");
  std::ostringstream log, err;
  EXPECT_EQ(run_command(probe_command(cfg, path("out")), log, err), kExitPass) << err.str();
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(path("out"))) names.push_back(e.path().filename().string());
  EXPECT_EQ(names, std::vector<std::string>{"manifest.json"});
  const Json m = Json::parse(slurp(path("out/manifest.json")));
  EXPECT_TRUE(m["outputs"].empty());
  EXPECT_EQ(m["schema_version"], kSchemaVersion);
}

TEST_F(IoTest, RerunGivesIdenticalBytesOutsideManifest) {
  const std::string cfg = write("cfg.json", R"({"probes": {"select": ["sobolev", "lp_sup"]}})");
  std::ostringstream log, err;
  ASSERT_EQ(run_command(probe_command(cfg, path("a")), log, err), kExitPass) << err.str();
  ASSERT_EQ(run_command(probe_command(cfg, path("b")), log, err), kExitPass) << err.str();
  const Json m = Json::parse(slurp(path("a/manifest.json")));
  const std::string prefix = config_hash(load_config(cfg)).substr(0, 16);
  ASSERT_EQ(m["outputs"].size(), 4u);
  for (const auto& name : m["outputs"]) {
    const std::string n = name.get<std::string>();
    EXPECT_EQ(n.substr(0, 17), prefix + "_");
    EXPECT_EQ(slurp(path("a/" + n)), slurp(path("b/" + n))) << n;
  }
  EXPECT_TRUE(m.contains("started"));
  EXPECT_TRUE(m.contains("wall_seconds"));
}

TEST_F(IoTest, UnwritableDirectoryRejected) {
  write("blocker", "x");
  EXPECT_THROW(ReportWriter(path("blocker/sub"), std::string(64, 'a')), std::runtime_error);
}

}  // namespace
