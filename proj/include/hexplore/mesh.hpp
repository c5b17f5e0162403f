#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "hexplore/core.hpp"

namespace hexplore {

// Indexed triangle surface with per-element derived data. Orientation convention:
// normals point out of the enclosed domain (for closed surfaces, signed volume > 0).
struct TriSurface {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> triangles;

  // Derived per element, filled by finalize().
  std::vector<Vec3> centroid;
  std::vector<Vec3> normal;
  std::vector<double> area;
  // Stable element identity for caching/remapping; -1 when the mesh has none.
  std::vector<std::int64_t> keys;

  void finalize();
  int num_elements() const { return static_cast<int>(triangles.size()); }
  double total_area() const;
  double signed_volume() const;
  double max_diameter(int t) const;
};

// Watertightness report: every edge shared by exactly two triangles, traversed in
// opposite directions (consistent orientation).
struct WatertightReport {
  bool closed = false;
  bool oriented = false;
  int bad_edges = 0;
};
WatertightReport check_watertight(const TriSurface& s);

// Analytic test meshes.
TriSurface make_sphere_cubed(int n, double radius = 1.0);             // 12 n^2 elements
TriSurface make_sphere_latlong(int rings, int slices, double radius = 1.0);
// Axis-aligned box [lo, hi]; n subdivisions per face edge. crossed=true splits each
// quad into 4 triangles via the face-cell center (fully symmetric triangulation).
TriSurface make_box(const Vec3& lo, const Vec3& hi, int n, bool crossed = false);

// IO.
void write_stl_binary(const TriSurface& s, const std::string& path);
void write_obj(const TriSurface& s, const std::string& path);
TriSurface read_stl_binary(const std::string& path);
TriSurface read_obj(const std::string& path);
TriSurface read_surface(const std::string& path);  // dispatch on extension

}  // namespace hexplore
