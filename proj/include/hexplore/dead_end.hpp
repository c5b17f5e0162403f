#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hexplore/core.hpp"
#include "hexplore/grid_map.hpp"

namespace hexplore {

struct TrajectorySample {
  double t = 0;
  Vec3 p = Vec3::Zero();
};

// Planar cut perpendicular to the trajectory: the free cells within half a
// cell of the plane, flood-filled (6-connected) from the sample's cell so the
// patch cannot leak into parallel corridors.
struct PlanarPatch {
  Vec3 anchor = Vec3::Zero();
  Vec3 normal = Vec3::Zero();  // unit trajectory tangent
  std::vector<int> cells;      // linear indices, sorted
};

// none when the tangent vanishes or the sample's cell is not observed-free.
std::optional<PlanarPatch> find_patch(const Vec3& traj_point, const Vec3& tangent,
                                      const VoxelGrid& grid, double a_bar);

struct CloseOutcome {
  bool accepted = false;
  std::string reason;      // "closed" or why the patch was rejected
  int removed_cells = 0;   // sealed region plus patch, on accept
  // Linear cell indices, filled on accept. The patch is a virtual obstacle,
  // not ground truth; callers that keep sensing must re-assert both sets or
  // rays through the phantom wall will erode it.
  std::vector<int> region, patch;
};

// Removing the patch must split the free space into exactly two 6-connected
// components, and the component away from the robot must be fully sealed
// (every boundary face occupied-classified; no unknown or out-of-grid
// neighbors). Then that region is reset to the unknown prior (Pr = 0.5) and
// the patch cells are written occupied (Pr = 0.99). Rejections leave the
// grid untouched.
CloseOutcome try_close(const PlanarPatch& patch, VoxelGrid& grid, const Coord& robot_cell,
                       double a_bar);

struct CloseEvent {
  double t = 0;
  Vec3 anchor = Vec3::Zero();
  bool accepted = false;
  std::string reason;
  int removed_cells = 0;
  std::vector<int> region, patch;  // see CloseOutcome
};

// Sweep the trajectory: subsample every two cells of arc length, tangents by
// central differences (one-sided at the ends), try each patch in order.
// Accepted closes mutate the grid immediately, so later samples see the
// reduced free space.
std::vector<CloseEvent> close_dead_ends(VoxelGrid& grid, const std::vector<TrajectorySample>& traj,
                                        const Vec3& robot_pos, double a_bar);

void write_dead_end_csv(const std::string& path, const std::vector<CloseEvent>& events);

}  // namespace hexplore
