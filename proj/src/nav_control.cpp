#include "hexplore/nav_control.hpp"

#include <cmath>
#include <stdexcept>

namespace hexplore {

Vec3 velocity_command(double dist_to_boundary, const Vec3& gradient, const ControlParams& cp,
                      double u_max) {
  Vec3 u = -cp.K_u * bump(cp.R_1, dist_to_boundary) * gradient;
  const double speed = u.norm();
  if (speed > u_max) u *= u_max / speed;
  return u;
}

Vec3 velocity_command(const Vec3& p, const TriBvh& boundary, const Vec3& gradient,
                      const ControlParams& cp, double u_max) {
  return velocity_command(boundary.distance(p), gradient, cp, u_max);
}

int step(RobotState& r, const Vec3& u, double dt, double max_move) {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (!(max_move > 0)) throw std::invalid_argument("max_move must be positive");
  const double move = u.norm() * dt;
  const int sub = std::max(1, static_cast<int>(std::ceil(move / max_move)));
  const double h = dt / sub;
  for (int k = 0; k < sub; ++k) r.p += h * u;
  r.u = u;
  r.t += dt;
  return sub;
}

}  // namespace hexplore
