#include "hexplore/grid_map.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>

namespace hexplore {

std::vector<Vec3> fibonacci_directions(int n) {
  std::vector<Vec3> dirs;
  dirs.reserve(n);
  const double ga = M_PI * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    double z = 1.0 - (2.0 * i + 1.0) / n;
    double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    double ph = ga * i;
    dirs.emplace_back(rho * std::cos(ph), rho * std::sin(ph), z);
  }
  return dirs;
}

VoxelGrid::VoxelGrid(const Vec3& origin, double cell_size, const Coord& dims)
    : origin_(origin), cell_(cell_size), dims_(dims) {
  if (cell_size <= 0) throw std::invalid_argument("cell_size must be positive");
  if ((dims.array() <= 0).any()) throw std::invalid_argument("grid dims must be positive");
  lmax_ = std::log(0.97 / 0.03);
  lmin_ = -lmax_;
  l_.assign(static_cast<size_t>(dims.x()) * dims.y() * dims.z(), 0.0f);
}

Coord VoxelGrid::coord(int linear) const {
  int x = linear % dims_.x();
  int y = (linear / dims_.x()) % dims_.y();
  int z = linear / (dims_.x() * dims_.y());
  return Coord(x, y, z);
}

Coord VoxelGrid::cell_of(const Vec3& q) const {
  Coord c;
  for (int k = 0; k < 3; ++k) {
    double s = (q[k] - origin_[k]) / cell_;
    double f = std::floor(s);
    auto i = static_cast<long long>(f);
    if (s == f && i >= 1) i -= 1;  // boundary points go to the smaller cell
    c[k] = static_cast<int>(i);
  }
  return c;
}

double VoxelGrid::probability_at(const Vec3& q) const {
  Coord c = cell_of(q);
  if (!in_bounds(c)) throw std::domain_error(cat("query outside grid: ", q.transpose()));
  return probability(c);
}

void VoxelGrid::add_hit(const Coord& c, double p_hit) {
  float& l = l_[linear(c)];
  l = static_cast<float>(std::clamp(double(l) + std::log(p_hit / (1.0 - p_hit)), lmin_, lmax_));
}

void VoxelGrid::add_miss(const Coord& c, double p_miss) {
  float& l = l_[linear(c)];
  l = static_cast<float>(std::clamp(double(l) + std::log(p_miss / (1.0 - p_miss)), lmin_, lmax_));
}

void VoxelGrid::set_probability(const Coord& c, double pr) {
  if (!(pr > 0.0 && pr < 1.0)) throw std::invalid_argument("probability must be in (0,1)");
  l_[linear(c)] = static_cast<float>(std::log(pr / (1.0 - pr)));
}

void VoxelGrid::traverse(const Vec3& A, const Vec3& B,
                         const std::function<void(const Coord&)>& visit) const {
  const double inf = std::numeric_limits<double>::infinity();
  Vec3 a = (A - origin_) / cell_, b = (B - origin_) / cell_;
  Vec3 d = b - a;
  double t0 = 0.0, t1 = 1.0;
  for (int k = 0; k < 3; ++k) {
    if (d[k] == 0.0) {
      if (a[k] < 0.0 || a[k] > dims_[k]) return;
    } else {
      double u = (0.0 - a[k]) / d[k], v = (dims_[k] - a[k]) / d[k];
      if (u > v) std::swap(u, v);
      t0 = std::max(t0, u);
      t1 = std::min(t1, v);
      if (t0 > t1) return;
    }
  }
  Vec3 s = a + t0 * d;
  Coord c;
  for (int k = 0; k < 3; ++k) {
    double f = std::floor(s[k]);
    int i = static_cast<int>(f);
    if (s[k] == f && d[k] < 0.0) i -= 1;  // entering a boundary from above
    c[k] = std::clamp(i, 0, dims_[k] - 1);
  }
  Coord step;
  Vec3 tmax, tdelta;
  for (int k = 0; k < 3; ++k) {
    if (d[k] > 0.0) {
      step[k] = 1;
      tdelta[k] = 1.0 / d[k];
      tmax[k] = (c[k] + 1 - a[k]) / d[k];
    } else if (d[k] < 0.0) {
      step[k] = -1;
      tdelta[k] = -1.0 / d[k];
      tmax[k] = (c[k] - a[k]) / d[k];
    } else {
      step[k] = 0;
      tdelta[k] = inf;
      tmax[k] = inf;
    }
  }
  while (true) {
    visit(c);
    int m = 0;
    if (tmax[1] < tmax[m]) m = 1;
    if (tmax[2] < tmax[m]) m = 2;
    if (tmax[m] >= t1) return;
    c[m] += step[m];
    if (c[m] < 0 || c[m] >= dims_[m]) return;
    tmax[m] += tdelta[m];
  }
}

void integrate_ray(VoxelGrid& grid, const Vec3& position, const Vec3& dir,
                   const EnvironmentMesh& env, const SensorConfig& cfg) {
  auto hit = env.raycast(position, dir, 1e-9, cfg.range);
  if (hit) {
    const Vec3 end = position + hit->t * dir;
    // Nudge past the surface so a hit exactly on a cell face lands in the cell
    // behind the face (the obstacle side), not in the last free cell.
    const Coord hc = grid.cell_of(end + (1e-6 * grid.cell_size()) * dir);
    grid.traverse(position, end, [&](const Coord& c) {
      if (c != hc) grid.add_miss(c, cfg.p_miss);
    });
    if (grid.in_bounds(hc)) grid.add_hit(hc, cfg.p_hit);
  } else {
    grid.traverse(position, position + cfg.range * dir,
                  [&](const Coord& c) { grid.add_miss(c, cfg.p_miss); });
  }
}

void integrate_scan(VoxelGrid& grid, const Vec3& position, const EnvironmentMesh& env,
                    const SensorConfig& cfg) {
  if (!env.contains(position))
    throw std::domain_error(cat("scan position outside environment: ", position.transpose()));
  for (const Vec3& d : fibonacci_directions(cfg.ray_count)) integrate_ray(grid, position, d, env, cfg);
}

std::vector<int> free_component(const VoxelGrid& grid, const Vec3& seed, double a_bar) {
  const Coord sc = grid.cell_of(seed);
  if (!grid.in_bounds(sc)) throw std::domain_error(cat("seed outside grid: ", seed.transpose()));
  if (!grid.is_free(sc, a_bar))
    throw std::domain_error(cat("seed cell not free (Pr = ", grid.probability(sc), ")"));
  std::vector<char> seen(grid.num_cells(), 0);
  std::vector<int> out;
  std::deque<Coord> queue{sc};
  seen[grid.linear(sc)] = 1;
  const Coord nbh[6] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
  while (!queue.empty()) {
    Coord c = queue.front();
    queue.pop_front();
    out.push_back(grid.linear(c));
    for (const Coord& d : nbh) {
      Coord n = c + d;
      if (!grid.in_bounds(n) || seen[grid.linear(n)]) continue;
      seen[grid.linear(n)] = 1;
      if (grid.is_free(n, a_bar)) queue.push_back(n);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

void write_grid_vtk(const VoxelGrid& g, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f << "# vtk DataFile Version 3.0\noccupancy probability\nASCII\nDATASET STRUCTURED_POINTS\n";
  f << "DIMENSIONS " << g.dims().x() + 1 << " " << g.dims().y() + 1 << " " << g.dims().z() + 1
    << "\n";
  f << "ORIGIN " << g.origin().x() << " " << g.origin().y() << " " << g.origin().z() << "\n";
  f << "SPACING " << g.cell_size() << " " << g.cell_size() << " " << g.cell_size() << "\n";
  f << "CELL_DATA " << g.num_cells() << "\nSCALARS probability float 1\nLOOKUP_TABLE default\n";
  for (int i = 0; i < g.num_cells(); ++i) {
    f << static_cast<float>(g.probability(g.coord(i))) << "\n";
  }
}

void write_grid_binary(const VoxelGrid& g, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  double head[4] = {g.origin().x(), g.origin().y(), g.origin().z(), g.cell_size()};
  f.write(reinterpret_cast<const char*>(head), sizeof(head));
  std::int32_t dims[3] = {g.dims().x(), g.dims().y(), g.dims().z()};
  f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  for (int i = 0; i < g.num_cells(); ++i) {
    float v = g.log_odds(g.coord(i));  // linear index is x-fastest already
    f.write(reinterpret_cast<const char*>(&v), 4);
  }
}

VoxelGrid read_grid_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  double head[4];
  std::int32_t dims[3];
  f.read(reinterpret_cast<char*>(head), sizeof(head));
  f.read(reinterpret_cast<char*>(dims), sizeof(dims));
  if (!f) throw std::runtime_error("truncated grid dump: " + path);
  VoxelGrid g(Vec3(head[0], head[1], head[2]), head[3], Coord(dims[0], dims[1], dims[2]));
  for (int i = 0; i < g.num_cells(); ++i) {
    float v;
    f.read(reinterpret_cast<char*>(&v), 4);
    if (!f) throw std::runtime_error("truncated grid dump: " + path);
    g.set_log_odds(g.coord(i), v);
  }
  return g;
}

}  // namespace hexplore
