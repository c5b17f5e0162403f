#include <CLI11.hpp>
#include <cstdio>

#include "hexplore/mesh.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hexplore: harmonic-field autonomous exploration"};
  app.require_subcommand(1);

  auto* explore = app.add_subcommand("explore", "Run an exploration simulation");
  auto* solve = app.add_subcommand("solve-bvp", "Solve one boundary value problem");
  auto* bench = app.add_subcommand("bench-fmm", "Benchmark the fast solver");
  auto* maze = app.add_subcommand("gen-maze", "Generate a procedural maze environment");
  auto* exp = app.add_subcommand("export", "Convert grid/surface dumps");
  (void)explore;
  (void)solve;
  (void)bench;
  (void)maze;
  (void)exp;

  CLI11_PARSE(app, argc, argv);
  std::fprintf(stderr, "not implemented yet\n");
  return 1;
}
