#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hexplore/bvh.hpp"
#include "hexplore/core.hpp"

namespace hexplore {

struct SensorConfig {
  double range = 3.0;  // m
  int ray_count = 2000;
  double p_hit = 0.7;
  double p_miss = 0.4;
};

// Deterministic quasi-uniform unit directions (Fibonacci spiral on the sphere).
std::vector<Vec3> fibonacci_directions(int n);

// Probabilistic occupancy grid over log-odds. Unobserved cells store exactly 0
// (Pr = 0.5). Scan updates clamp to [l_min, l_max]; set_probability does not
// (region surgery writes values outside the evidence clamp on purpose).
class VoxelGrid {
 public:
  VoxelGrid(const Vec3& origin, double cell_size, const Coord& dims);

  const Vec3& origin() const { return origin_; }
  double cell_size() const { return cell_; }
  const Coord& dims() const { return dims_; }
  int num_cells() const { return dims_.x() * dims_.y() * dims_.z(); }

  bool in_bounds(const Coord& c) const {
    return (c.array() >= 0).all() && (c.array() < dims_.array()).all();
  }
  int linear(const Coord& c) const { return c.x() + dims_.x() * (c.y() + dims_.y() * c.z()); }
  Coord coord(int linear) const;
  Vec3 center(const Coord& c) const {
    return origin_ + cell_ * (c.cast<double>() + Vec3::Constant(0.5));
  }
  // Cell containing q; points exactly on a cell boundary resolve to the
  // lexicographically smaller index. May return out-of-bounds coords.
  Coord cell_of(const Vec3& q) const;

  float log_odds(const Coord& c) const { return l_[linear(c)]; }
  double probability(const Coord& c) const { return 1.0 - 1.0 / (1.0 + std::exp(double(l_[linear(c)]))); }
  double probability_at(const Vec3& q) const;  // domain_error outside the grid
  bool observed(const Coord& c) const { return l_[linear(c)] != 0.0f; }
  // Observed-free: cells still at the unknown prior do not count.
  bool is_free(const Coord& c, double a_bar) const {
    return l_[linear(c)] < 0.0f && probability(c) < a_bar;
  }

  void add_hit(const Coord& c, double p_hit);
  void add_miss(const Coord& c, double p_miss);
  void set_log_odds(const Coord& c, float v) { l_[linear(c)] = v; }
  void set_probability(const Coord& c, double pr);

  double l_min() const { return lmin_; }
  double l_max() const { return lmax_; }

  // Enumerates the cells pierced by segment [a, b] in traversal order
  // (3D DDA), clipped to the grid bounds.
  void traverse(const Vec3& a, const Vec3& b, const std::function<void(const Coord&)>& visit) const;

 private:
  Vec3 origin_;
  double cell_;
  Coord dims_;
  double lmin_, lmax_;
  std::vector<float> l_;
};

// One simulated range ray: traversed cells get the miss update, the cell just
// past the hit point gets the hit update. No hit within range: misses only.
void integrate_ray(VoxelGrid& grid, const Vec3& position, const Vec3& dir,
                   const EnvironmentMesh& env, const SensorConfig& cfg);

// Full spherical scan from a position strictly inside the environment.
void integrate_scan(VoxelGrid& grid, const Vec3& position, const EnvironmentMesh& env,
                    const SensorConfig& cfg);

// 6-connected component of observed-free cells (Pr < a_bar) containing seed.
// Returns sorted linear indices. Throws if the seed cell is not free.
std::vector<int> free_component(const VoxelGrid& grid, const Vec3& seed, double a_bar);

void write_grid_vtk(const VoxelGrid& grid, const std::string& path);
void write_grid_binary(const VoxelGrid& grid, const std::string& path);
VoxelGrid read_grid_binary(const std::string& path);

}  // namespace hexplore
