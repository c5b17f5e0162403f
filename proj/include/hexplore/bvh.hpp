#pragma once

#include <limits>
#include <memory>
#include <optional>
#include <vector>

#include "hexplore/mesh.hpp"

namespace hexplore {

struct RayHit {
  double t = std::numeric_limits<double>::infinity();
  int tri = -1;
};

// Squared distance from a point to a triangle (closest point on the closure).
double point_triangle_dist2(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

// Median-split bounding volume hierarchy over a triangle surface.
// Supports ray casting, point containment (parity), and closest-point distance.
class TriBvh {
 public:
  explicit TriBvh(const TriSurface& surf);

  // First intersection along origin + t*dir for t in (tmin, tmax).
  std::optional<RayHit> raycast(const Vec3& origin, const Vec3& dir, double tmin = 1e-9,
                                double tmax = std::numeric_limits<double>::infinity()) const;

  // Odd number of crossings => inside. Assumes a closed surface.
  bool contains(const Vec3& p) const;

  double distance(const Vec3& p) const;

  const TriSurface& surface() const { return *surf_; }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;  // internal if left >= 0
    int begin = 0, end = 0;     // leaf range into order_
  };

  int build(int begin, int end, int depth);
  void ray_node(int node, const Vec3& o, const Vec3& inv_d, const Vec3& d, double tmin,
                double& tmax, int& best) const;
  void dist_node(int node, const Vec3& p, double& best) const;
  int count_crossings(const Vec3& p, const Vec3& dir) const;

  const TriSurface* surf_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<Vec3> centers_;
};

// Ground-truth world used by the simulated sensor: surface plus query structures.
// The surface lives behind a pointer so the object stays movable (TriBvh keeps a
// reference to it).
class EnvironmentMesh {
 public:
  explicit EnvironmentMesh(TriSurface surf)
      : surf_(std::make_unique<TriSurface>(std::move(surf))),
        bvh_(std::make_unique<TriBvh>(*surf_)) {}

  const TriSurface& surface() const { return *surf_; }
  bool contains(const Vec3& p) const { return bvh_->contains(p); }
  double distance(const Vec3& p) const { return bvh_->distance(p); }
  std::optional<RayHit> raycast(const Vec3& o, const Vec3& d, double tmin = 1e-9,
                                double tmax = std::numeric_limits<double>::infinity()) const {
    return bvh_->raycast(o, d, tmin, tmax);
  }

 private:
  std::unique_ptr<TriSurface> surf_;
  std::unique_ptr<TriBvh> bvh_;
};

}  // namespace hexplore
