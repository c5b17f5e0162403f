#pragma once

#include <cstdint>
#include <vector>

#include "hexplore/core.hpp"
#include "hexplore/mesh.hpp"

namespace hexplore {

// Seeded indoor test environments: a logical maze rasterized to voxels and
// turned into a watertight boundary surface. Corridors are corridor x height
// voxels in cross-section; walls are wall voxels thick everywhere, including
// the outer shell.
struct MazeConfig {
  std::uint64_t seed = 1;
  int cells_x = 4, cells_y = 4;  // logical maze cells
  int corridor = 3;              // corridor width (voxels), >= 3
  int wall = 1;                  // wall thickness (voxels), >= 1
  int height = 3;                // interior height (voxels), >= 2
  double cell_size = 0.25;       // voxel edge (m)
  int dead_end_target = 2;       // braid walls open until at most this many remain

  void validate() const;  // throws std::invalid_argument
};

struct MazeResult {
  TriSurface surface;           // closed free-space boundary, outward-oriented
  Vec3 start = Vec3::Zero();    // center of logical cell (0,0), strictly interior
  Vec3 bbox_lo = Vec3::Zero();  // outer extent of the environment incl. walls
  Vec3 bbox_hi = Vec3::Zero();
  int dead_ends = 0;            // logical dead ends left after braiding
  int cells_x = 0, cells_y = 0;
  // Logical adjacency, row-major by (x, y): passage toward +x / toward +y.
  std::vector<std::uint8_t> open_east, open_north;
};

// Depth-first spanning tree over the logical cells (every cell reachable),
// then walls are opened at dead ends until at most dead_end_target remain.
// Same seed, same maze.
MazeResult generate_maze(const MazeConfig& cfg);

}  // namespace hexplore
