#include "hexplore/maze.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "hexplore/grid_map.hpp"
#include "hexplore/surface_extract.hpp"

namespace hexplore {
namespace {

struct Lattice {
  int nx, ny;
  std::vector<std::uint8_t> east, north;  // passage open toward +x / +y

  Lattice(int x, int y) : nx(x), ny(y), east(x * y, 0), north(x * y, 0) {}
  int id(int x, int y) const { return x + nx * y; }

  int degree(int x, int y) const {
    int d = 0;
    if (x + 1 < nx && east[id(x, y)]) ++d;
    if (x > 0 && east[id(x - 1, y)]) ++d;
    if (y + 1 < ny && north[id(x, y)]) ++d;
    if (y > 0 && north[id(x, y - 1)]) ++d;
    return d;
  }

  void open(int x, int y, int dir) {  // 0:+x 1:-x 2:+y 3:-y
    switch (dir) {
      case 0: east[id(x, y)] = 1; break;
      case 1: east[id(x - 1, y)] = 1; break;
      case 2: north[id(x, y)] = 1; break;
      default: north[id(x, y - 1)] = 1; break;
    }
  }

  bool is_open(int x, int y, int dir) const {
    switch (dir) {
      case 0: return x + 1 < nx && east[id(x, y)];
      case 1: return x > 0 && east[id(x - 1, y)];
      case 2: return y + 1 < ny && north[id(x, y)];
      default: return y > 0 && north[id(x, y - 1)];
    }
  }
};

constexpr int kDx[4] = {1, -1, 0, 0};
constexpr int kDy[4] = {0, 0, 1, -1};

// Portable Fisher-Yates (std::shuffle's draw sequence is implementation
// defined; the modulo bias is irrelevant at 4 entries).
void shuffle_dirs(int* dirs, int n, std::mt19937_64& rng) {
  for (int i = n - 1; i > 0; --i) {
    int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(dirs[i], dirs[j]);
  }
}

void carve_tree(Lattice& lat, std::mt19937_64& rng) {
  std::vector<std::uint8_t> visited(lat.nx * lat.ny, 0);
  std::vector<std::pair<int, int>> stack;
  stack.emplace_back(0, 0);
  visited[0] = 1;
  while (!stack.empty()) {
    auto [x, y] = stack.back();
    int dirs[4] = {0, 1, 2, 3};
    shuffle_dirs(dirs, 4, rng);
    bool advanced = false;
    for (int d : dirs) {
      int nx = x + kDx[d], ny = y + kDy[d];
      if (nx < 0 || ny < 0 || nx >= lat.nx || ny >= lat.ny || visited[lat.id(nx, ny)]) continue;
      lat.open(x, y, d);
      visited[lat.id(nx, ny)] = 1;
      stack.emplace_back(nx, ny);
      advanced = true;
      break;
    }
    if (!advanced) stack.pop_back();
  }
}

std::vector<std::pair<int, int>> dead_end_cells(const Lattice& lat) {
  std::vector<std::pair<int, int>> out;
  for (int y = 0; y < lat.ny; ++y)
    for (int x = 0; x < lat.nx; ++x)
      if (lat.degree(x, y) == 1) out.emplace_back(x, y);
  return out;
}

// Open one extra wall per surplus dead end, turning it into a loop junction.
void braid(Lattice& lat, int target, std::mt19937_64& rng) {
  for (;;) {
    auto dead = dead_end_cells(lat);
    if (static_cast<int>(dead.size()) <= target) return;
    int pick = static_cast<int>(rng() % dead.size());
    auto [x, y] = dead[pick];
    int dirs[4] = {0, 1, 2, 3};
    shuffle_dirs(dirs, 4, rng);
    bool opened = false;
    for (int d : dirs) {
      int nx = x + kDx[d], ny = y + kDy[d];
      if (nx < 0 || ny < 0 || nx >= lat.nx || ny >= lat.ny || lat.is_open(x, y, d)) continue;
      lat.open(x, y, d);
      opened = true;
      break;
    }
    if (!opened) return;  // 1x1 lattice corner case
  }
}

}  // namespace

void MazeConfig::validate() const {
  if (cells_x < 1 || cells_y < 1 || cells_x * cells_y < 2)
    throw std::invalid_argument("maze: need at least two logical cells");
  if (corridor < 3) throw std::invalid_argument("maze: corridor width must be >= 3 voxels");
  if (wall < 1) throw std::invalid_argument("maze: wall thickness must be >= 1 voxel");
  if (height < 2) throw std::invalid_argument("maze: interior height must be >= 2 voxels");
  if (!(cell_size > 0)) throw std::invalid_argument("maze: cell_size must be positive");
  if (dead_end_target < 0) throw std::invalid_argument("maze: dead_end_target must be >= 0");
}

MazeResult generate_maze(const MazeConfig& cfg) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed);
  Lattice lat(cfg.cells_x, cfg.cells_y);
  carve_tree(lat, rng);
  braid(lat, cfg.dead_end_target, rng);

  const int pitch = cfg.corridor + cfg.wall;
  const int nx = cfg.cells_x * pitch + cfg.wall;
  const int ny = cfg.cells_y * pitch + cfg.wall;
  const int nz = cfg.height + 2;
  VoxelGrid grid(Vec3::Zero(), cfg.cell_size, Coord(nx, ny, nz));

  std::vector<int> free_cells;
  auto mark_block = [&](int x0, int x1, int y0, int y1) {
    for (int x = x0; x < x1; ++x)
      for (int y = y0; y < y1; ++y)
        for (int z = 1; z <= cfg.height; ++z) free_cells.push_back(grid.linear(Coord(x, y, z)));
  };
  for (int cy = 0; cy < cfg.cells_y; ++cy)
    for (int cx = 0; cx < cfg.cells_x; ++cx) {
      const int bx = cfg.wall + cx * pitch, by = cfg.wall + cy * pitch;
      mark_block(bx, bx + cfg.corridor, by, by + cfg.corridor);
      if (lat.east[lat.id(cx, cy)])
        mark_block(bx + cfg.corridor, bx + pitch, by, by + cfg.corridor);
      if (lat.north[lat.id(cx, cy)])
        mark_block(bx, bx + cfg.corridor, by + cfg.corridor, by + pitch);
    }
  std::sort(free_cells.begin(), free_cells.end());

  MazeResult out;
  out.surface = extract_boundary(free_cells, grid);
  const int mid = cfg.wall + cfg.corridor / 2;
  out.start = grid.center(Coord(mid, mid, 1 + cfg.height / 2));
  out.bbox_lo = Vec3::Zero();
  out.bbox_hi = cfg.cell_size * Vec3(nx, ny, nz);
  out.dead_ends = static_cast<int>(dead_end_cells(lat).size());
  out.cells_x = cfg.cells_x;
  out.cells_y = cfg.cells_y;
  out.open_east = lat.east;
  out.open_north = lat.north;
  return out;
}

}  // namespace hexplore
