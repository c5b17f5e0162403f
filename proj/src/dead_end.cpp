#include "hexplore/dead_end.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <stdexcept>

namespace hexplore {

namespace {

const Coord kSteps[6] = {Coord(1, 0, 0),  Coord(-1, 0, 0), Coord(0, 1, 0),
                         Coord(0, -1, 0), Coord(0, 0, 1),  Coord(0, 0, -1)};

bool occupied_class(const VoxelGrid& g, const Coord& c, double a_bar) {
  return g.observed(c) && g.probability(c) >= a_bar + 1e-6;
}

}  // namespace

std::optional<PlanarPatch> find_patch(const Vec3& traj_point, const Vec3& tangent,
                                      const VoxelGrid& grid, double a_bar) {
  const double tn = tangent.norm();
  if (tn < 1e-12) return std::nullopt;  // stationary sample
  const Vec3 n = tangent / tn;

  const Coord seed = grid.cell_of(traj_point);
  if (!grid.in_bounds(seed) || !grid.is_free(seed, a_bar)) return std::nullopt;

  const double half = 0.5 * grid.cell_size();
  const auto in_slab = [&](const Coord& c) {
    return std::abs(n.dot(grid.center(c) - traj_point)) <= half;
  };

  PlanarPatch patch;
  patch.anchor = traj_point;
  patch.normal = n;
  std::vector<char> visited(grid.num_cells(), 0);
  std::deque<Coord> queue{seed};  // the seed holds the plane point itself
  visited[grid.linear(seed)] = 1;
  while (!queue.empty()) {
    const Coord c = queue.front();
    queue.pop_front();
    patch.cells.push_back(grid.linear(c));
    for (const Coord& d : kSteps) {
      const Coord nb = c + d;
      if (!grid.in_bounds(nb)) continue;
      const int id = grid.linear(nb);
      if (visited[id]) continue;
      if (!grid.is_free(nb, a_bar) || !in_slab(nb)) continue;
      visited[id] = 1;
      queue.push_back(nb);
    }
  }
  std::sort(patch.cells.begin(), patch.cells.end());
  return patch;
}

CloseOutcome try_close(const PlanarPatch& patch, VoxelGrid& grid, const Coord& robot_cell,
                       double a_bar) {
  CloseOutcome out;
  if (patch.cells.empty()) {
    out.reason = "empty patch";
    return out;
  }
  if (!grid.in_bounds(robot_cell) || !grid.is_free(robot_cell, a_bar)) {
    out.reason = "robot cell not free";
    return out;
  }

  const int n = grid.num_cells();
  std::vector<char> in_patch(n, 0);
  for (int id : patch.cells) in_patch[id] = 1;
  const int robot_id = grid.linear(robot_cell);
  if (in_patch[robot_id]) {
    out.reason = "robot inside patch";
    return out;
  }

  // 6-connected components of (free minus patch)
  std::vector<int> label(n, -1);
  int comps = 0;
  const Coord dims = grid.dims();
  for (int z = 0; z < dims.z(); ++z)
    for (int y = 0; y < dims.y(); ++y)
      for (int x = 0; x < dims.x(); ++x) {
        const Coord c(x, y, z);
        const int id = grid.linear(c);
        if (label[id] >= 0 || in_patch[id] || !grid.is_free(c, a_bar)) continue;
        label[id] = comps;
        std::deque<Coord> queue{c};
        while (!queue.empty()) {
          const Coord q = queue.front();
          queue.pop_front();
          for (const Coord& d : kSteps) {
            const Coord nb = q + d;
            if (!grid.in_bounds(nb)) continue;
            const int nid = grid.linear(nb);
            if (label[nid] >= 0 || in_patch[nid] || !grid.is_free(nb, a_bar)) continue;
            label[nid] = comps;
            queue.push_back(nb);
          }
        }
        ++comps;
      }

  if (comps != 2) {
    out.reason = cat("components: ", comps);
    return out;
  }
  const int far_label = 1 - label[robot_id];

  // the far side must be sealed: no unknown, ambiguous, or out-of-grid faces
  std::vector<int> far_cells;
  for (int id = 0; id < n; ++id) {
    if (label[id] != far_label) continue;
    far_cells.push_back(id);
    const Coord c = grid.coord(id);
    for (const Coord& d : kSteps) {
      const Coord nb = c + d;
      if (!grid.in_bounds(nb)) {
        out.reason = "open frontier";
        return out;
      }
      const int nid = grid.linear(nb);
      if (label[nid] == far_label || in_patch[nid]) continue;
      if (!occupied_class(grid, nb, a_bar)) {
        out.reason = "open frontier";
        return out;
      }
    }
  }

  for (int id : far_cells) grid.set_probability(grid.coord(id), 0.5);     // back to unknown
  for (int id : patch.cells) grid.set_probability(grid.coord(id), 0.99);  // sealing wall
  out.accepted = true;
  out.reason = "closed";
  out.removed_cells = static_cast<int>(far_cells.size() + patch.cells.size());
  out.region = std::move(far_cells);
  out.patch = patch.cells;
  return out;
}

std::vector<CloseEvent> close_dead_ends(VoxelGrid& grid, const std::vector<TrajectorySample>& traj,
                                        const Vec3& robot_pos, double a_bar) {
  std::vector<CloseEvent> events;
  if (traj.size() < 2) return events;

  // arc-length subsampling every two cells
  const double spacing = 2.0 * grid.cell_size();
  std::vector<TrajectorySample> picks{traj.front()};
  double acc = 0;
  for (std::size_t i = 1; i < traj.size(); ++i) {
    acc += (traj[i].p - traj[i - 1].p).norm();
    if (acc >= spacing) {
      picks.push_back(traj[i]);
      acc = 0;
    }
  }
  if (picks.size() < 2) return events;

  const Coord robot_cell = grid.cell_of(robot_pos);
  for (std::size_t i = 0; i < picks.size(); ++i) {
    const Vec3 tangent = (i == 0)                 ? picks[1].p - picks[0].p
                         : (i + 1 == picks.size()) ? picks[i].p - picks[i - 1].p
                                                   : picks[i + 1].p - picks[i - 1].p;
    auto patch = find_patch(picks[i].p, tangent, grid, a_bar);
    if (!patch) continue;
    CloseOutcome res = try_close(*patch, grid, robot_cell, a_bar);
    events.push_back({picks[i].t, picks[i].p, res.accepted, res.reason, res.removed_cells,
                      std::move(res.region), std::move(res.patch)});
  }
  return events;
}

void write_dead_end_csv(const std::string& path, const std::vector<CloseEvent>& events) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.precision(17);
  f << "t,anchor_x,anchor_y,anchor_z,decision,reason,removed_cells\n";
  for (const auto& e : events)
    f << e.t << "," << e.anchor.x() << "," << e.anchor.y() << "," << e.anchor.z() << ","
      << (e.accepted ? "accepted" : "rejected") << "," << e.reason << "," << e.removed_cells
      << "\n";
}

}  // namespace hexplore
