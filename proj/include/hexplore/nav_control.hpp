#pragma once

#include "hexplore/bvh.hpp"
#include "hexplore/bvp_control.hpp"
#include "hexplore/core.hpp"

namespace hexplore {

// Point robot under single-integrator kinematics.
struct RobotState {
  Vec3 p = Vec3::Zero();  // position (m)
  Vec3 u = Vec3::Zero();  // last commanded velocity (m/s)
  double t = 0;           // simulated time (s)
};

// u = -K_u * bump(R_1, dist) * gradient, then capped at u_max so a fixed
// integration step keeps bounded displacement. The bump gate zeroes the
// command at the boundary and leaves it untouched beyond R_1.
Vec3 velocity_command(double dist_to_boundary, const Vec3& gradient, const ControlParams& cp,
                      double u_max = 1.0);

// Same, with the distance taken from the boundary's BVH.
Vec3 velocity_command(const Vec3& p, const TriBvh& boundary, const Vec3& gradient,
                      const ControlParams& cp, double u_max = 1.0);

// Explicit Euler p += dt * u, split into equal sub-steps so no single
// sub-step moves farther than max_move. Advances r.t by dt and records u.
// Returns the number of sub-steps taken (1 unless the command is fast).
int step(RobotState& r, const Vec3& u, double dt, double max_move);

}  // namespace hexplore
