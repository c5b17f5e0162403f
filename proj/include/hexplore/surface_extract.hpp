#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hexplore/core.hpp"
#include "hexplore/grid_map.hpp"
#include "hexplore/mesh.hpp"

namespace hexplore {

struct BoundaryData {
  VecX pr;                            // occupancy evidence carried by each element
  std::vector<std::uint8_t> occupied; // 1 = occupied class, 0 = free class
  VecX k_hat;                         // current Neumann data
  VecX k_target;                      // target Neumann data
  int size() const { return static_cast<int>(pr.size()); }
};

// Boundary surface of the union of free voxels: closed, outward-oriented,
// two triangles per exposed face, split along the face's min->max corner
// diagonal (the Freudenthal split restricted to the boundary). Non-manifold
// contacts (free cells meeting only at an edge or a corner) are resolved by
// vertex duplication so every edge keeps exactly two incident triangles.
// Element keys encode (cell, axis, side, half) and persist across
// re-extractions as long as the underlying exposed face persists.
TriSurface extract_boundary(const std::vector<int>& free_cells, const VoxelGrid& grid);

// Per-element occupancy: probes the cell past the face centroid. Faces onto
// unobserved or out-of-grid space inherit the free-side cell's probability
// instead (a frontier carries the explored side's evidence, keeping it
// attractive). Class is occupied iff Pr >= a_bar + 1e-6; k vectors start 0.
BoundaryData attach_occupancy(const TriSurface& surface, const VoxelGrid& grid, double a_bar);

void write_boundary_csv(const TriSurface& s, const BoundaryData& bd, const std::string& path);

}  // namespace hexplore
