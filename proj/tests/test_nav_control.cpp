#include <doctest.h>

#include <cmath>

#include "hexplore/bvh.hpp"
#include "hexplore/grid_map.hpp"
#include "hexplore/mesh.hpp"
#include "hexplore/nav_control.hpp"
#include "hexplore/surface_extract.hpp"

using namespace hexplore;

TEST_SUITE("nav_control") {
  TEST_CASE("slow-down gate shape") {
    CHECK(bump(0.2, 0.1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(bump(0.2, 0.2) == 1.0);
    CHECK(bump(0.2, -1.0) == 0.0);
  }

  TEST_CASE("distance inside a single voxel boundary") {
    VoxelGrid g(Vec3::Zero(), 0.25, Coord(3, 3, 3));
    TriSurface s = extract_boundary({g.linear(Coord(1, 1, 1))}, g);
    TriBvh bvh(s);
    const Vec3 center = g.center(Coord(1, 1, 1));
    CHECK(bvh.distance(center) == doctest::Approx(0.125).epsilon(1e-12));
    // a point on the surface itself
    CHECK(bvh.distance(center + Vec3(0.125, 0, 0)) == doctest::Approx(0.0).epsilon(1e-15));
  }

  TEST_CASE("velocity command gain and cap") {
    ControlParams cp;  // K_u = 1, R_1 = 0.2
    const Vec3 g(0.3, -0.4, 0.0);

    SUBCASE("far from the boundary: full gain") {
      const Vec3 u = velocity_command(1.0, g, cp);
      CHECK((u + g).norm() <= 1e-15);
    }
    SUBCASE("at the boundary: zero") {
      CHECK(velocity_command(0.0, g, cp).norm() == 0.0);
    }
    SUBCASE("half radius: half gain, same direction") {
      const Vec3 u = velocity_command(cp.R_1 / 2, g, cp);
      CHECK((u + 0.5 * g).norm() <= 1e-15);
    }
    SUBCASE("cap engages and preserves direction") {
      const Vec3 big = 10.0 * g;
      const Vec3 u = velocity_command(1.0, big, cp);
      CHECK(u.norm() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(u.normalized().dot(-big.normalized()) == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("distance through the BVH overload") {
      TriSurface sphere = make_sphere_cubed(6);
      TriBvh bvh(sphere);
      // center of the unit sphere is ~1 away: gate saturated
      const Vec3 u = velocity_command(Vec3::Zero(), bvh, g, cp);
      CHECK((u + g).norm() <= 1e-12);
    }
  }

  TEST_CASE("euler step") {
    SUBCASE("zero velocity holds position") {
      RobotState r;
      r.p = Vec3(1, 2, 3);
      CHECK(step(r, Vec3::Zero(), 0.05, 0.0625) == 1);
      CHECK(r.p == Vec3(1, 2, 3));
      CHECK(r.t == 0.05);
    }
    SUBCASE("constant field integrates exactly") {
      RobotState r;
      const Vec3 u(0.3, 0.1, -0.2);
      for (int k = 0; k < 40; ++k) step(r, u, 0.05, 0.0625);
      CHECK(r.t == doctest::Approx(2.0).epsilon(1e-12));
      CHECK((r.p - 2.0 * u).norm() <= 1e-12);
      CHECK((r.u - u).norm() == 0.0);
    }
    SUBCASE("fast commands are sub-stepped") {
      RobotState r;
      const Vec3 u(10, 0, 0);
      const int sub = step(r, u, 0.05, 0.0625);
      CHECK(sub == 8);  // ceil(0.5 / 0.0625)
      CHECK(r.p.x() == doctest::Approx(0.5).epsilon(1e-12));
      CHECK(r.t == 0.05);
    }
    SUBCASE("bad arguments are rejected") {
      RobotState r;
      CHECK_THROWS_AS(step(r, Vec3::Zero(), 0.0, 0.1), std::invalid_argument);
      CHECK_THROWS_AS(step(r, Vec3::Zero(), 0.05, 0.0), std::invalid_argument);
    }
  }
}
