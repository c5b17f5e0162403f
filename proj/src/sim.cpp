#include "hexplore/sim.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "hexplore/bem.hpp"
#include "hexplore/surface_extract.hpp"

namespace hexplore {

namespace {

using Clk = std::chrono::steady_clock;

double seconds(Clk::time_point a, Clk::time_point b) {
  return std::chrono::duration<double>(b - a).count();
}

// Map geometry covering the environment box plus a margin, lattice-aligned
// when the environment itself sits on a multiple of the cell size.
VoxelGrid make_grid(const EnvironmentMesh& env, double cell, int margin) {
  Vec3 lo = env.surface().vertices.front(), hi = lo;
  for (const Vec3& v : env.surface().vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  Coord dims;
  for (int i = 0; i < 3; ++i)
    dims[i] = static_cast<int>(std::ceil((hi[i] - lo[i]) / cell - 1e-9)) + 2 * margin;
  return VoxelGrid(lo - margin * cell * Vec3::Ones(), cell, dims);
}

}  // namespace

void ExplorationConfig::validate() const {
  control.validate();
  if (!(cell_size > 0)) throw std::invalid_argument("cell_size must be positive");
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (!(u_max > 0)) throw std::invalid_argument("u_max must be positive");
  if (resolve_every < 1) throw std::invalid_argument("resolve_every must be >= 1");
  if (dense_limit < 0) throw std::invalid_argument("dense_limit must be >= 0");
  if (max_steps < 1) throw std::invalid_argument("max_steps must be >= 1");
  if (!(max_sim_time > 0)) throw std::invalid_argument("max_sim_time must be positive");
  if (grid_margin < 1) throw std::invalid_argument("grid_margin must be >= 1");
  if (!(eval_guard >= 0)) throw std::invalid_argument("eval_guard must be >= 0");
  if (!(stall_speed >= 0 && stall_speed < u_max))
    throw std::invalid_argument("stall_speed must lie in [0, u_max)");
  if (!(sensor.range > 0)) throw std::invalid_argument("sensor range must be positive");
  if (sensor.ray_count < 1) throw std::invalid_argument("sensor ray_count must be >= 1");
  if (!(sensor.p_hit > 0.5 && sensor.p_hit < 1.0))
    throw std::invalid_argument("sensor p_hit must lie in (0.5, 1)");
  if (!(sensor.p_miss > 0.0 && sensor.p_miss < 0.5))
    throw std::invalid_argument("sensor p_miss must lie in (0, 0.5)");
}

double coverage(const VoxelGrid& grid, const EnvironmentMesh& env, double a_bar) {
  long long gt = 0, seen = 0;
  const Coord d = grid.dims();
  for (int z = 0; z < d.z(); ++z)
    for (int y = 0; y < d.y(); ++y)
      for (int x = 0; x < d.x(); ++x) {
        const Coord c(x, y, z);
        if (!env.contains(grid.center(c))) continue;
        ++gt;
        if (grid.is_free(c, a_bar)) ++seen;
      }
  return gt ? static_cast<double>(seen) / static_cast<double>(gt) : 0.0;
}

double coverage_of_mask(const VoxelGrid& grid, const std::vector<std::uint8_t>& seen_free,
                        const EnvironmentMesh& env) {
  long long gt = 0, seen = 0;
  const Coord d = grid.dims();
  for (int z = 0; z < d.z(); ++z)
    for (int y = 0; y < d.y(); ++y)
      for (int x = 0; x < d.x(); ++x) {
        const Coord c(x, y, z);
        if (!env.contains(grid.center(c))) continue;
        ++gt;
        if (seen_free[grid.linear(c)]) ++seen;
      }
  return gt ? static_cast<double>(seen) / static_cast<double>(gt) : 0.0;
}

std::optional<Vec3> SaddleEscape::update(const Vec3& grad, double u_norm, double eps_1,
                                         double stall_speed, double mag, std::mt19937_64& rng) {
  if (grad.norm() >= eps_1) {
    last_strong = grad.normalized();
    plateau = 0;
  } else {
    ++plateau;
  }
  stalled = u_norm < stall_speed ? stalled + 1 : 0;
  if (plateau < 10 && stalled < 10) return std::nullopt;
  plateau = 0;
  stalled = 0;
  const Vec3 a = last_strong;
  int h = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(a[i]) < std::abs(a[h])) h = i;
  const Vec3 e1 = a.cross(Vec3::Unit(h)).normalized();
  const Vec3 e2 = a.cross(e1);
  // 53-bit draw; avoids the implementation-defined distribution adapters
  const double theta = 2.0 * M_PI * static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return mag * (std::cos(theta) * e1 + std::sin(theta) * e2);
}

void write_trajectory_csv(const std::string& path, const std::vector<TrajectoryRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "t,x,y,z,ux,uy,uz,phi,grad_norm,dist_boundary,gate,clearance,resolve,saddle,guarded\n";
  char buf[512];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf,
                  "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%d,"
                  "%d\n",
                  r.t, r.p.x(), r.p.y(), r.p.z(), r.u.x(), r.u.y(), r.u.z(), r.phi, r.grad_norm,
                  r.dist_boundary, r.gate, r.clearance, r.resolve, r.saddle, r.guarded);
    f << buf;
  }
}

namespace {

// One exploration run's working state. The loop body stays linear; phases
// live in members so re-solves can rebuild them together.
class SimRun {
 public:
  SimRun(const EnvironmentMesh& env, const Vec3& start, const ExplorationConfig& cfg)
      : env_(env),
        cfg_(cfg),
        grid_(make_grid(env, cfg.cell_size, cfg.grid_margin)),
        seen_free_(grid_.num_cells(), 0),
        rng_(cfg.seed) {
    if (!env.contains(start)) throw std::invalid_argument("start position is outside the environment");
    robot_.p = start;
  }

  ExplorationReport run();

 private:
  struct Seal {
    std::vector<int> region, patch;
  };

  void scan();
  void assert_seals();
  void update_mask();
  // 0 = solved and ready, 1 = exploration complete, 2 = abort (reason filled)
  int reextract();
  void solve_endpoints();
  bool interior_eval(Vec3* grad, double* phi, double* phi_target);
  void finish(bool complete, const std::string& reason);

  const EnvironmentMesh& env_;
  ExplorationConfig cfg_;
  VoxelGrid grid_;
  std::vector<std::uint8_t> seen_free_;
  std::mt19937_64 rng_;
  RobotState robot_;
  SaddleEscape saddle_;
  ExplorationReport rep_;

  // current boundary problem
  std::shared_ptr<TriSurface> surface_;
  BoundaryData bd_;
  BoundaryValueState values_;
  VecX area_;
  VecX k_t_, k_0_, phi_t_, phi_0_;
  std::unique_ptr<TriBvh> bvh_;
  std::shared_ptr<TriSurface> free_surface_;
  std::unique_ptr<TriBvh> free_bvh_;
  BemAssembler assembler_;

  std::vector<Seal> seals_;
  std::string abort_reason_;

  // eval fallbacks when the robot sits inside the quadrature guard
  Vec3 last_grad_ = Vec3::Zero();
  double last_phi_ = 0, last_phi_target_ = 0;
  bool have_eval_ = false;
};

void SimRun::scan() {
  const auto t0 = Clk::now();
  integrate_scan(grid_, robot_.p, env_, cfg_.sensor);
  rep_.wall_scan_s += seconds(t0, Clk::now());
  assert_seals();
}

void SimRun::assert_seals() {
  for (const Seal& s : seals_)
    for (int id : s.region)
      if (grid_.log_odds(grid_.coord(id)) != 0.0f) grid_.set_log_odds(grid_.coord(id), 0.0f);
  for (const Seal& s : seals_)
    for (int id : s.patch)
      if (grid_.probability(grid_.coord(id)) < 0.98) grid_.set_probability(grid_.coord(id), 0.99);
}

void SimRun::update_mask() {
  const Coord d = grid_.dims();
  for (int z = 0; z < d.z(); ++z)
    for (int y = 0; y < d.y(); ++y)
      for (int x = 0; x < d.x(); ++x) {
        const Coord c(x, y, z);
        if (grid_.is_free(c, cfg_.control.a_bar)) seen_free_[grid_.linear(c)] = 1;
      }
}

void SimRun::solve_endpoints() {
  const auto t0 = Clk::now();
  const TriSurface& s = *surface_;
  k_t_ = values_.k_target;
  k_0_ = values_.k_hat;
  const bool same =
      (k_0_ - k_t_).lpNorm<Eigen::Infinity>() <= 1e-12 * std::max(1.0, k_t_.lpNorm<Eigen::Infinity>());
  if (s.num_elements() <= cfg_.dense_limit) {
    auto ops = assembler_.assemble(s);
    phi_t_ = solve_neumann(*ops, k_t_).phi;
    phi_0_ = same ? phi_t_ : solve_neumann(*ops, k_0_).phi;
  } else {
    const Octree tree = build_tree(s, cfg_.fmm.leaf_capacity);
    phi_t_ = iterative_solve(tree, s, k_t_, cfg_.fmm).phi;
    phi_0_ = same ? phi_t_ : iterative_solve(tree, s, k_0_, cfg_.fmm).phi;
  }
  rep_.wall_solve_s += seconds(t0, Clk::now());
  ++rep_.resolves;
  rep_.elements_solved += s.num_elements();
}

int SimRun::reextract() {
  std::vector<int> free_cells;
  try {
    free_cells = free_component(grid_, robot_.p, cfg_.control.a_bar);
  } catch (const std::exception& e) {
    abort_reason_ = cat("map degenerated: ", e.what());
    return 2;
  }
  auto next = std::make_shared<TriSurface>(extract_boundary(free_cells, grid_));
  BoundaryData bd = attach_occupancy(*next, grid_, cfg_.control.a_bar);

  double free_area = 0;
  for (int i = 0; i < next->num_elements(); ++i)
    if (!bd.occupied[i]) free_area += next->area[i];
  if (free_area < 0.5 * cfg_.cell_size * cfg_.cell_size) return 1;  // frontier gone

  VecX k_target;
  try {
    k_target = target_values(*next, bd, cfg_.control);
  } catch (const std::exception& e) {
    abort_reason_ = cat("boundary data degenerated: ", e.what());
    return 2;
  }
  values_ = surface_ ? remap_on_reextraction(values_, *surface_, *next, k_target)
                     : init_state(*next, k_target);
  surface_ = std::move(next);
  bd_ = std::move(bd);
  area_ = Eigen::Map<const VecX>(surface_->area.data(), surface_->num_elements());

  try {
    solve_endpoints();
  } catch (const std::exception& e) {
    abort_reason_ = cat("boundary solve failed: ", e.what());
    return 2;
  }

  bvh_ = std::make_unique<TriBvh>(*surface_);
  auto fs = std::make_shared<TriSurface>();
  fs->vertices = surface_->vertices;
  for (int i = 0; i < surface_->num_elements(); ++i)
    if (!bd_.occupied[i]) fs->triangles.push_back(surface_->triangles[i]);
  fs->finalize();
  free_surface_ = std::move(fs);
  free_bvh_ = std::make_unique<TriBvh>(*free_surface_);
  return 0;
}

bool SimRun::interior_eval(Vec3* grad, double* phi, double* phi_target) {
  const auto t0 = Clk::now();
  const VecX diff = k_0_ - k_t_;
  const double denom = diff.squaredNorm();
  double sigma = 0;
  if (denom > 1e-30)
    sigma = std::clamp((values_.k_hat - k_t_).dot(diff) / denom, 0.0, 1.0);
  const VecX k_sigma = k_t_ + sigma * diff;
  const VecX phi_sigma = phi_t_ + sigma * (phi_0_ - phi_t_);
  const double guard = cfg_.eval_guard * cfg_.cell_size;
  bool ok = true;
  try {
    const Vec3 g = eval_gradient(*surface_, phi_sigma, k_sigma, robot_.p, guard);
    const double f = eval_potential(*surface_, phi_sigma, k_sigma, robot_.p, guard);
    const double ft = eval_potential(*surface_, phi_t_, k_t_, robot_.p, guard);
    last_grad_ = g;
    last_phi_ = f;
    last_phi_target_ = ft;
    have_eval_ = true;
  } catch (const std::domain_error&) {
    ++rep_.guard_events;
    ok = false;  // keep the previous field sample
  }
  *grad = last_grad_;
  *phi = last_phi_;
  *phi_target = last_phi_target_;
  rep_.wall_eval_s += seconds(t0, Clk::now());
  return ok;
}

void SimRun::finish(bool complete, const std::string& reason) {
  rep_.complete = complete;
  rep_.reason = reason;
  rep_.sim_time = robot_.t;
  update_mask();
  rep_.coverage = coverage_of_mask(grid_, seen_free_, env_);
  rep_.grid = std::make_shared<VoxelGrid>(grid_);
  rep_.surface = surface_;
}

ExplorationReport SimRun::run() {
  const auto t_start = Clk::now();
  const double cell = cfg_.cell_size;

  rep_.min_clearance = env_.distance(robot_.p);
  scan();
  update_mask();

  int rc = reextract();
  if (rc != 0) {
    finish(rc == 1, rc == 1 ? "complete" : abort_reason_);
    rep_.wall_total_s = seconds(t_start, Clk::now());
    return rep_;
  }

  int stuck = 0, steps_since_solve = 0;
  bool pending_resolve_flag = true;  // the initial solve precedes the first row
  double prev_phi = 0;
  bool prev_phi_ok = false, prev_saddle = false, prev_b_e = false;
  double cur_clearance = rep_.min_clearance;

  for (;;) {
    if (rep_.steps >= cfg_.max_steps || robot_.t >= cfg_.max_sim_time) {
      finish(false, "budget");
      break;
    }
    if (rep_.steps > 0) scan();

    Vec3 grad;
    double phi, phi_target;
    const bool eval_ok = interior_eval(&grad, &phi, &phi_target);
    const double grad_norm = grad.norm();
    const double dist = bvh_->distance(robot_.p);
    const double s_gate = bump(cfg_.control.R_1, dist);
    const double c = gain_c(grad_norm, cfg_.control);
    const double sens_dot = std::abs(phi_target - phi);
    const double mu = gain_mu(s_gate, grad_norm, sens_dot, cfg_.control);
    const bool b_e = b_e_flag(values_.k_hat, bd_.occupied);

    rep_.control_log.push_back({robot_.t, b_e ? 1 : 0, c, mu,
                                values_.k_hat.size() ? values_.k_hat.cwiseAbs().maxCoeff() : 0.0,
                                compatibility_residual(values_.k_hat, area_)});

    TrajectoryRow row;
    row.t = robot_.t;
    row.p = robot_.p;
    row.phi = phi;
    row.grad_norm = grad_norm;
    row.dist_boundary = dist;
    row.gate = s_gate;
    row.clearance = cur_clearance;
    row.resolve = pending_resolve_flag ? 1 : 0;
    row.guarded = eval_ok ? 0 : 1;
    pending_resolve_flag = false;

    step_boundary_values(values_, values_.k_target, c, mu, b_e, cfg_.dt, area_);

    const Vec3 u = velocity_command(dist, grad, cfg_.control, cfg_.u_max);
    const Vec3 before = robot_.p;
    bool escaped = false;
    if (auto delta = saddle_.update(grad, u.norm(), cfg_.control.eps_1, cfg_.stall_speed,
                                    cell / 10.0, rng_)) {
      const Vec3 axis = saddle_.last_strong;
      Vec3 d = *delta;
      // A gate stall pins the robot inside the guard band; a tangential hop
      // keeps the same clearance, so only reject hops that reduce it.
      const double floor = std::min(cfg_.eval_guard * cell, 0.99 * dist);
      for (int j = 0; j < 4 && !escaped; ++j) {
        const Vec3 cand = robot_.p + d;
        const Coord cc = grid_.cell_of(cand);
        if (grid_.in_bounds(cc) && grid_.is_free(cc, cfg_.control.a_bar) &&
            bvh_->distance(cand) > floor) {
          robot_.p = cand;
          robot_.u = d / cfg_.dt;
          robot_.t += cfg_.dt;
          escaped = true;
        }
        d = axis.cross(d);  // quarter turn in the orthogonal plane
      }
      if (escaped) {
        row.saddle = 1;
        ++rep_.saddle_escapes;
      }
    }
    if (!escaped) step(robot_, u, cfg_.dt, cell / 4.0);
    row.u = robot_.u;
    rep_.path_length += (robot_.p - before).norm();

    cur_clearance = env_.distance(robot_.p);
    rep_.min_clearance = std::min(rep_.min_clearance, cur_clearance);
    if (!env_.contains(robot_.p)) ++rep_.collisions;

    rep_.trajectory.push_back(row);
    if (prev_phi_ok && !row.resolve && !row.guarded && !prev_saddle) {
      if (prev_b_e)
        rep_.max_dphi_emergency = std::max(rep_.max_dphi_emergency, phi - prev_phi);
      else
        rep_.max_dphi = std::max(rep_.max_dphi, phi - prev_phi);
    }
    prev_phi = phi;
    prev_phi_ok = !row.guarded;
    prev_saddle = row.saddle != 0;
    prev_b_e = b_e;

    if (escaped || robot_.u.norm() >= 1e-6)
      stuck = 0;
    else if (++stuck >= 50) {
      finish(false, "robot stuck: command stayed below 1e-6 m/s for 50 steps");
      break;
    }

    ++rep_.steps;
    ++steps_since_solve;

    const bool near_frontier =
        free_bvh_ && free_bvh_->distance(robot_.p) < 2.0 * cfg_.control.R_1;
    if (steps_since_solve >= cfg_.resolve_every || near_frontier) {
      update_mask();
      if (cfg_.close_dead_ends && rep_.trajectory.size() >= 2) {
        std::vector<TrajectorySample> samples;
        samples.reserve(rep_.trajectory.size());
        for (const auto& r : rep_.trajectory) samples.push_back({r.t, r.p});
        auto events = close_dead_ends(grid_, samples, robot_.p, cfg_.control.a_bar);
        for (auto& e : events) {
          if (e.accepted) seals_.push_back({e.region, e.patch});
          rep_.close_events.push_back(std::move(e));
        }
      }
      rc = reextract();
      if (rc != 0) {
        finish(rc == 1, rc == 1 ? "complete" : abort_reason_);
        break;
      }
      steps_since_solve = 0;
      pending_resolve_flag = true;
      prev_phi_ok = false;  // gauge and geometry changed
    }
  }

  rep_.wall_total_s = seconds(t_start, Clk::now());
  return rep_;
}

}  // namespace

ExplorationReport run_exploration(const EnvironmentMesh& env, const Vec3& start,
                                  const ExplorationConfig& cfg) {
  cfg.validate();
  if (env.surface().num_elements() == 0)
    throw std::invalid_argument("environment surface is empty");
  SimRun run(env, start, cfg);
  return run.run();
}

}  // namespace hexplore
