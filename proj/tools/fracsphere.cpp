// Command-line front end: fracsphere <solve|verify|probe|decay|selftest> [options]

#include "fracsphere/app.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  fracsphere::Command cmd;
  CLI::App app{"Sphere-constrained fractional energy: solver and diagnostics"};
  app.add_option("command", cmd.name, "solve, verify, probe, decay or selftest")
      ->required()
      ->check(CLI::IsMember(fracsphere::command_names()));
  app.add_option("--config", cmd.config_path, "JSON run configuration (defaults when omitted)");
  app.add_option("--out", cmd.out_dir, "output directory (overrides output_dir)");
  app.add_option("--set", cmd.overrides, "dotted-key override key=value, repeatable")->take_all();
  app.add_option("--workers", cmd.workers, "worker threads (0 = logical cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--seed", cmd.seed, "seed override");
  app.add_option("--field", cmd.field_path, "field file for verify and decay");
  app.add_option("--constants", cmd.constants_path, "frozen constants file");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fracsphere::kExitConfigError;
  }
  return fracsphere::run_command(cmd, std::cout, std::cerr);
}
