#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "hexplore/grid_map.hpp"

using namespace hexplore;

namespace {

// Independent flood fill (stack DFS) used as the oracle for free_component.
std::vector<int> oracle_component(const VoxelGrid& g, const Coord& seed, double a_bar) {
  auto free = [&](const Coord& c) {
    return g.in_bounds(c) && g.log_odds(c) < 0.0f && g.probability(c) < a_bar;
  };
  std::set<int> seen;
  std::vector<Coord> stack{seed};
  seen.insert(g.linear(seed));
  while (!stack.empty()) {
    Coord c = stack.back();
    stack.pop_back();
    for (int k = 0; k < 3; ++k) {
      for (int s : {-1, 1}) {
        Coord n = c;
        n[k] += s;
        if (free(n) && !seen.count(g.linear(n))) {
          seen.insert(g.linear(n));
          stack.push_back(n);
        }
      }
    }
  }
  return {seen.begin(), seen.end()};
}

}  // namespace

TEST_SUITE("grid_map") {

TEST_CASE("fibonacci directions are unit and balanced") {
  auto dirs = fibonacci_directions(2000);
  REQUIRE(dirs.size() == 2000);
  Vec3 sum = Vec3::Zero();
  for (const auto& d : dirs) {
    CHECK(d.norm() == doctest::Approx(1.0).epsilon(1e-12));
    sum += d;
  }
  CHECK(sum.norm() / 2000 < 0.01);
  CHECK(dirs.front().z() > 0.99);
  CHECK(dirs.back().z() < -0.99);
}

TEST_CASE("cell_of: boundaries resolve to the smaller index") {
  VoxelGrid g(Vec3(0, 0, 0), 0.25, Coord(8, 8, 8));
  CHECK(g.cell_of(Vec3(0.1, 0.1, 0.1)) == Coord(0, 0, 0));
  CHECK(g.cell_of(Vec3(0.25, 0.1, 0.1)) == Coord(0, 0, 0));   // on face -> lower cell
  CHECK(g.cell_of(Vec3(0.26, 0.1, 0.1)) == Coord(1, 0, 0));
  CHECK(g.cell_of(Vec3(0.0, 0.0, 0.0)) == Coord(0, 0, 0));
  CHECK(g.cell_of(Vec3(2.0, 2.0, 2.0)) == Coord(7, 7, 7));    // top corner stays inside
  CHECK_FALSE(g.in_bounds(g.cell_of(Vec3(2.01, 0.1, 0.1))));
  CHECK_FALSE(g.in_bounds(g.cell_of(Vec3(-0.01, 0.1, 0.1))));
}

TEST_CASE("single axis-aligned ray: hand-computed log-odds ledger") {
  // Robot in cell 1 of a 0.25 m grid; wall face at x = 2.0 m. Cells 1..7 are
  // traversed (miss), the ray terminates on the face of cell 8 (hit).
  EnvironmentMesh env(make_box(Vec3(0, 0, 0), Vec3(2, 1, 1), 2, false));
  VoxelGrid g(Vec3(0, 0, 0), 0.25, Coord(10, 4, 4));
  SensorConfig cfg;
  cfg.range = 5.0;
  integrate_ray(g, Vec3(0.3, 0.375, 0.375), Vec3(1, 0, 0), env, cfg);

  const double lmiss = std::log(0.4 / 0.6), lhit = std::log(0.7 / 0.3);
  CHECK(g.log_odds(Coord(0, 1, 1)) == 0.0f);
  for (int x = 1; x <= 7; ++x)
    CHECK(g.log_odds(Coord(x, 1, 1)) == doctest::Approx(lmiss).epsilon(1e-6));
  CHECK(g.log_odds(Coord(8, 1, 1)) == doctest::Approx(lhit).epsilon(1e-6));
  CHECK(g.log_odds(Coord(9, 1, 1)) == 0.0f);
  int touched = 0;
  for (int i = 0; i < g.num_cells(); ++i) touched += g.observed(g.coord(i));
  CHECK(touched == 8);
}

TEST_CASE("scan in a small box: visible interior becomes free, shell becomes occupied") {
  EnvironmentMesh env(make_box(Vec3(0, 0, 0), Vec3(1.5, 1.5, 1.5), 2, false));
  VoxelGrid g(Vec3(-0.25, -0.25, -0.25), 0.25, Coord(8, 8, 8));
  SensorConfig cfg;  // range 3 > box diameter
  integrate_scan(g, Vec3(0.7, 0.7, 0.7), env, cfg);
  int interior_free = 0, interior_total = 0;
  for (int i = 0; i < g.num_cells(); ++i) {
    Coord c = g.coord(i);
    Vec3 p = g.center(c);
    bool inside = (p.array() > 0.0).all() && (p.array() < 1.5).all();
    if (inside) {
      ++interior_total;
      interior_free += g.probability(c) < 0.5;
    } else {
      // Outside the environment: unknown or occupied, never free.
      CHECK(g.log_odds(c) >= 0.0f);
    }
  }
  CHECK(interior_total == 6 * 6 * 6);
  CHECK(interior_free == interior_total);
  // Shell cells facing the interior got hits somewhere.
  CHECK(g.probability(Coord(0, 3, 3)) > 0.5);
  CHECK(g.probability(Coord(7, 3, 3)) > 0.5);
}

TEST_CASE("repeated scans move evidence monotonically and clamp") {
  EnvironmentMesh env(make_box(Vec3(0, 0, 0), Vec3(1.5, 1.5, 1.5), 2, false));
  VoxelGrid g(Vec3(-0.25, -0.25, -0.25), 0.25, Coord(8, 8, 8));
  SensorConfig cfg;
  integrate_scan(g, Vec3(0.7, 0.7, 0.7), env, cfg);
  std::vector<float> before(g.num_cells());
  for (int i = 0; i < g.num_cells(); ++i) before[i] = g.log_odds(g.coord(i));
  integrate_scan(g, Vec3(0.7, 0.7, 0.7), env, cfg);
  for (int i = 0; i < g.num_cells(); ++i) {
    float b = before[i], a = g.log_odds(g.coord(i));
    REQUIRE(a >= float(g.l_min()));
    REQUIRE(a <= float(g.l_max()));
    if (b < 0) REQUIRE(a <= b);       // free cells only gather free evidence
    if (b == 0.0f) REQUIRE(a == 0.0f);  // untouched cells stay untouched
  }
  for (int k = 0; k < 20; ++k) integrate_scan(g, Vec3(0.7, 0.7, 0.7), env, cfg);
  double pmax = 0;
  for (int i = 0; i < g.num_cells(); ++i) pmax = std::max(pmax, g.probability(g.coord(i)));
  CHECK(pmax == doctest::Approx(0.97).epsilon(1e-6));  // clamp = ln(0.97/0.03)
}

TEST_CASE("scan position outside the environment is rejected") {
  EnvironmentMesh env(make_box(Vec3(0, 0, 0), Vec3(1, 1, 1), 1, false));
  VoxelGrid g(Vec3(0, 0, 0), 0.25, Coord(4, 4, 4));
  SensorConfig cfg;
  CHECK_THROWS_AS(integrate_scan(g, Vec3(2, 2, 2), env, cfg), std::domain_error);
}

TEST_CASE("probability_at: unobserved prior, clamp value, face tie-break") {
  VoxelGrid g(Vec3(0, 0, 0), 0.5, Coord(2, 1, 1));
  CHECK(g.probability_at(Vec3(0.25, 0.25, 0.25)) == 0.5);
  for (int k = 0; k < 50; ++k) g.add_hit(Coord(0, 0, 0), 0.7);
  CHECK(g.probability(Coord(0, 0, 0)) == doctest::Approx(0.97).epsilon(1e-6));
  g.add_miss(Coord(1, 0, 0), 0.4);
  // q on the shared face x = 0.5 resolves to cell (0,0,0).
  CHECK(g.probability_at(Vec3(0.5, 0.25, 0.25)) == doctest::Approx(0.97).epsilon(1e-6));
  CHECK_THROWS_AS(g.probability_at(Vec3(1.01, 0.25, 0.25)), std::domain_error);
}

TEST_CASE("traverse: visits a face-connected chain that covers dense samples") {
  VoxelGrid g(Vec3(-1, -1, -1), 0.25, Coord(12, 12, 12));
  std::mt19937 rng(23);
  std::uniform_real_distribution<double> u(-1.4, 2.4);  // endpoints may leave the grid
  for (int it = 0; it < 300; ++it) {
    Vec3 a(u(rng), u(rng), u(rng)), b(u(rng), u(rng), u(rng));
    std::vector<Coord> cells;
    g.traverse(a, b, [&](const Coord& c) { cells.push_back(c); });
    for (size_t i = 0; i < cells.size(); ++i) {
      REQUIRE(g.in_bounds(cells[i]));
      if (i > 0) REQUIRE((cells[i] - cells[i - 1]).cwiseAbs().sum() == 1);
    }
    std::set<int> visited;
    for (const auto& c : cells) {
      REQUIRE(!visited.count(g.linear(c)));  // no cell repeats
      visited.insert(g.linear(c));
    }
    // Dense sampling may only find cells the DDA also found.
    for (double t = 0; t <= 1.0; t += 1e-3) {
      Vec3 p = a + t * (b - a);
      Coord c = g.cell_of(p);
      bool interior = true;  // skip samples landing exactly on a face
      for (int k = 0; k < 3; ++k) {
        double s = (p[k] - g.origin()[k]) / g.cell_size();
        if (s == std::floor(s)) interior = false;
      }
      if (g.in_bounds(c) && interior) REQUIRE(visited.count(g.linear(c)));
    }
  }
}

TEST_CASE("free_component equals the flood-fill oracle on random grids") {
  std::mt19937 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    VoxelGrid g(Vec3(0, 0, 0), 0.25, Coord(7, 6, 5));
    std::uniform_int_distribution<int> pick(0, 2);
    for (int i = 0; i < g.num_cells(); ++i) {
      int v = pick(rng);
      float l = v == 0 ? -1.0f : (v == 1 ? 0.0f : 1.0f);
      g.set_log_odds(g.coord(i), l);
    }
    Coord seed(3, 3, 2);
    g.set_log_odds(seed, -1.0f);
    auto got = free_component(g, g.center(seed), 0.5);
    auto ref = oracle_component(g, seed, 0.5);
    REQUIRE(got == ref);
  }
}

TEST_CASE("free_component: wall split, unobserved gap, bad seed") {
  VoxelGrid g(Vec3(0, 0, 0), 1.0, Coord(7, 3, 3));
  for (int i = 0; i < g.num_cells(); ++i) g.set_log_odds(g.coord(i), -2.0f);
  for (int y = 0; y < 3; ++y)
    for (int z = 0; z < 3; ++z) g.set_log_odds(Coord(3, y, z), 2.0f);  // occupied wall plane
  auto room_a = free_component(g, g.center(Coord(1, 1, 1)), 0.5);
  CHECK(room_a.size() == 3 * 3 * 3);
  for (int idx : room_a) CHECK(g.coord(idx).x() < 3);
  auto room_b = free_component(g, g.center(Coord(5, 1, 1)), 0.5);
  CHECK(room_b.size() == 3 * 3 * 3);

  // Unobserved gap blocks the component even though Pr = 0.5 < a_bar is false.
  g.set_log_odds(Coord(3, 1, 1), 0.0f);
  auto gapped = free_component(g, g.center(Coord(1, 1, 1)), 0.5);
  CHECK(gapped.size() == 27);

  CHECK_THROWS_WITH_AS(free_component(g, g.center(Coord(3, 0, 0)), 0.5),
                       doctest::Contains("not free"), std::domain_error);
}

TEST_CASE("binary dump round trip is exact") {
  VoxelGrid g(Vec3(0.5, -1.0, 2.0), 0.25, Coord(4, 3, 2));
  std::mt19937 rng(9);
  std::uniform_real_distribution<float> u(-3.0f, 3.0f);
  for (int i = 0; i < g.num_cells(); ++i) g.set_log_odds(g.coord(i), u(rng));
  const char* path = "grid_roundtrip.bin";
  write_grid_binary(g, path);
  auto r = read_grid_binary(path);
  CHECK(r.origin() == g.origin());
  CHECK(r.cell_size() == g.cell_size());
  REQUIRE(r.dims() == g.dims());
  for (int i = 0; i < g.num_cells(); ++i)
    CHECK(r.log_odds(r.coord(i)) == g.log_odds(g.coord(i)));
  std::remove(path);
}

TEST_CASE("vtk export writes one value per cell") {
  VoxelGrid g(Vec3(0, 0, 0), 0.25, Coord(3, 2, 2));
  const char* path = "grid_test.vtk";
  write_grid_vtk(g, path);
  std::ifstream f(path);
  std::string line;
  int data_lines = 0;
  bool in_data = false;
  while (std::getline(f, line)) {
    if (in_data && !line.empty()) ++data_lines;
    if (line.rfind("LOOKUP_TABLE", 0) == 0) in_data = true;
  }
  CHECK(data_lines == 12);
  std::remove(path);
}

}  // TEST_SUITE
