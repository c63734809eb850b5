// Runs the calibration sweeps and writes the frozen constants file.

#include "fracsphere/io.hpp"
#include "fracsphere/lab.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  std::string path = "data/frozen_constants.json";
  std::string version = "1";
  double margin = fracsphere::kCalibrationMargin;
  CLI::App app{"Calibrate probe constants"};
  app.add_option("--out", path, "constants file to write");
  app.add_option("--version", version, "version tag stored in the file");
  app.add_option("--margin", margin, "safety factor applied to the worst calibration ratio")
      ->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  fracsphere::FrozenConstants fc;
  fc.version = version;
  fc.margin = margin;
  fc.constants = fracsphere::calibrate_constants(fracsphere::ProbeSetups{}, margin);
  for (const auto& [name, c] : fc.constants) std::cout << name << " " << fracsphere::format_double(c) << "\n";
  fracsphere::write_frozen_constants(path, fc);
  std::cout << "wrote " << path << "\n";
  return 0;
}
