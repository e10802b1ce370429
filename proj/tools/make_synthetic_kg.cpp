// SPDX-License-Identifier: Apache-2.0
//
// Writes the bundled synthetic compositional knowledge graph.
#include <CLI11.hpp>
#include <iostream>

#include "pmd/error.hpp"
#include "pmd/kg/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic (hue, shape) knowledge graph"};
  pmd::kg::SyntheticSpec spec;
  std::string out = "data/synthetic";
  app.add_option("-o,--out", out, "output directory");
  app.add_option("--hues", spec.hues)->check(CLI::Range(2, 1000));
  app.add_option("--shapes", spec.shapes)->check(CLI::Range(2, 1000));
  app.add_option("--valid-fraction", spec.valid_fraction)->check(CLI::Range(0.0, 0.5));
  app.add_option("--test-fraction", spec.test_fraction)->check(CLI::Range(0.0, 0.5));
  app.add_option("--seed", spec.seed);
  CLI11_PARSE(app, argc, argv);
  try {
    pmd::kg::write_synthetic_kg(spec, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  std::cout << "wrote " << out << "\n";
  return 0;
}
