#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hexplore/bvh.hpp"
#include "hexplore/bvp_control.hpp"
#include "hexplore/dead_end.hpp"
#include "hexplore/fmm.hpp"
#include "hexplore/grid_map.hpp"
#include "hexplore/nav_control.hpp"

namespace hexplore {

// Exploration loop: sense, map, (close dead ends), extract the free-space
// boundary, design Neumann data, solve the interior potential, descend its
// gradient. The boundary problem is re-solved every resolve_every control
// steps or as soon as the robot comes within 2 R_1 of a frontier element.
struct ExplorationConfig {
  ControlParams control;
  SensorConfig sensor;
  FmmConfig fmm;            // iterative-solver settings (large boundaries)
  double cell_size = 0.25;  // map resolution (m)
  double dt = 0.05;         // control step (s)
  double u_max = 1.0;       // speed cap (m/s)
  int resolve_every = 10;   // control steps between scheduled re-solves
  int dense_limit = 4000;   // largest boundary handled by the direct solver
  int max_steps = 20000;    // control-step budget
  double max_sim_time = 1e9;
  bool close_dead_ends = true;
  std::uint64_t seed = 1;   // plateau-perturbation stream
  int grid_margin = 2;      // map cells padded around the environment box
  double eval_guard = 1e-3; // interior-eval standoff, in cells
  double stall_speed = 1e-3;  // gate-stall escape threshold (m/s)

  void validate() const;  // throws std::invalid_argument
};

struct TrajectoryRow {
  double t = 0;
  Vec3 p = Vec3::Zero();
  Vec3 u = Vec3::Zero();
  double phi = 0;            // potential at p under the current boundary data
  double grad_norm = 0;
  double dist_boundary = 0;  // distance to the extracted boundary surface
  double gate = 0;           // slow-down gate value in [0, 1]
  double clearance = 0;      // ground-truth distance to the environment
  int resolve = 0;           // boundary re-solved right before this step
  int saddle = 0;            // plateau perturbation applied this step
  int guarded = 0;           // interior eval fell back to the previous field
};

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows);

struct ExplorationReport {
  bool complete = false;
  std::string reason;  // "complete", "budget", or an abort diagnostic
  int steps = 0;
  int resolves = 0;
  long long elements_solved = 0;  // cumulative boundary size over re-solves
  double sim_time = 0;            // (s)
  double path_length = 0;         // (m)
  double coverage = 0;            // ever-observed-free over ground-truth free
  double min_clearance = std::numeric_limits<double>::infinity();
  int collisions = 0;             // steps with the robot outside ground truth
  int saddle_escapes = 0;
  int guard_events = 0;
  // Worst per-step potential rise between re-solves. The descent argument
  // holds only while the emergency flag is clear (the b_e transient pushes
  // attractive walls back to repulsive at the cost of raising the potential),
  // so steps taken under b_e are booked separately.
  double max_dphi = -std::numeric_limits<double>::infinity();
  double max_dphi_emergency = -std::numeric_limits<double>::infinity();
  double wall_scan_s = 0, wall_solve_s = 0, wall_eval_s = 0, wall_total_s = 0;
  std::vector<TrajectoryRow> trajectory;
  std::vector<ControlLogRow> control_log;
  std::vector<CloseEvent> close_events;
  std::shared_ptr<VoxelGrid> grid;      // final map
  std::shared_ptr<TriSurface> surface;  // last extracted boundary
};

// Fraction of ground-truth free map cells (center inside the environment)
// currently observed free. 0 while nothing free is on the map.
double coverage(const VoxelGrid& grid, const EnvironmentMesh& env, double a_bar);

// Same oracle against an explicit observed-free mask (the union over time;
// dead-end closing resets map cells but never un-explores them).
double coverage_of_mask(const VoxelGrid& grid, const std::vector<std::uint8_t>& seen_free,
                        const EnvironmentMesh& env);

// Escape hatch for the two stagnation modes of the discrete flow: interior
// critical points (saddles of the harmonic field — unstable, but the
// discrete flow can stall on them, detected by 10 consecutive steps with
// the gradient below eps_1) and boundary stagnation edges, where the
// clearance gate crushes the speed while the gradient stays strong
// (detected by 10 consecutive steps with the commanded speed below
// stall_speed). Both emit a deterministic displacement of magnitude `mag`
// orthogonal to the last gradient that was above the dead zone, which at a
// wall means a slide along the face.
struct SaddleEscape {
  int plateau = 0;
  int stalled = 0;
  Vec3 last_strong = Vec3::UnitX();

  std::optional<Vec3> update(const Vec3& grad, double u_norm, double eps_1, double stall_speed,
                             double mag, std::mt19937_64& rng);
};

ExplorationReport run_exploration(const EnvironmentMesh& env, const Vec3& start,
                                  const ExplorationConfig& cfg);

}  // namespace hexplore
