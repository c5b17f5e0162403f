#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace hexplore {

using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using Coord = Eigen::Vector3i;

template <class... Ts>
std::string cat(Ts&&... xs) {
  std::ostringstream ss;
  (ss << ... << xs);
  return ss.str();
}

// Smooth step: 0 for x < 0, 1 for x > a, cubic blend on [0, a].
inline double bump(double a, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= a) return 1.0;
  const double r = x / a;
  return r * r * (3.0 - 2.0 * r);
}

}  // namespace hexplore
