#include "hexplore/surface_extract.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <unordered_map>

namespace hexplore {

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  int find(int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

struct Face {
  Coord cell;
  int axis, dir;                      // neighbor = cell + dir * e_axis
  std::array<long long, 4> corner;    // lattice keys: m, m+u, m+v, m+u+v
  std::array<int, 4> slot;            // one union-find slot per corner
};

}  // namespace

TriSurface extract_boundary(const std::vector<int>& free_cells, const VoxelGrid& grid) {
  if (free_cells.empty()) throw std::domain_error("cannot extract a boundary from no free cells");
  std::vector<int> cells = free_cells;
  std::sort(cells.begin(), cells.end());

  const Coord dims = grid.dims();
  std::vector<char> mask(grid.num_cells(), 0);
  for (int idx : cells) mask[idx] = 1;
  auto cell_free = [&](const Coord& c) { return grid.in_bounds(c) && mask[grid.linear(c)]; };

  const long long kx = dims.x() + 1, ky = dims.y() + 1;
  auto lattice_key = [&](const Coord& p) { return p.x() + kx * (p.y() + ky * p.z()); };

  // Face enumeration. Two triangles per face; per-corner slots to be welded.
  std::vector<Face> faces;
  std::vector<std::array<int, 3>> tri_corner;  // triangle -> face corner indices
  std::vector<int> tri_face;
  std::vector<std::int64_t> tri_key;
  std::unordered_map<long long, int> face_lookup;  // (cell*3+axis)*2+dirbit -> face index
  for (int idx : cells) {
    const Coord c = grid.coord(idx);
    for (int a = 0; a < 3; ++a) {
      const int b = (a + 1) % 3, cc = (a + 2) % 3;
      for (int s : {-1, 1}) {
        Coord n = c;
        n[a] += s;
        if (cell_free(n)) continue;
        Face f;
        f.cell = c;
        f.axis = a;
        f.dir = s;
        Coord m = c;
        if (s > 0) m[a] += 1;
        Coord u = Coord::Zero(), v = Coord::Zero();
        u[b] = 1;
        v[cc] = 1;
        f.corner = {lattice_key(m), lattice_key(m + u), lattice_key(m + v),
                    lattice_key(m + u + v)};
        const int fi = static_cast<int>(faces.size());
        const long long fkey = (static_cast<long long>(idx) * 3 + a) * 2 + (s > 0 ? 1 : 0);
        face_lookup.emplace(fkey, fi);
        // Diagonal m -> m+u+v; winding chosen so normals point at the neighbor.
        // Keys carry a * 16 so pinch repair below can mint child keys (parent
        // * 16 + split-edge-position * 4 + half + 1, all nonzero mod 16) that
        // never clash with whole-triangle keys and encode the child geometry.
        std::array<std::array<int, 3>, 2> tris =
            s > 0 ? std::array<std::array<int, 3>, 2>{{{0, 1, 3}, {0, 3, 2}}}
                  : std::array<std::array<int, 3>, 2>{{{0, 2, 3}, {0, 3, 1}}};
        for (int h = 0; h < 2; ++h) {
          tri_corner.push_back(tris[h]);
          tri_face.push_back(fi);
          tri_key.push_back((fkey * 2 + h) * 16);
        }
        faces.push_back(f);
      }
    }
  }

  // Slots: one per (face, corner). Both triangles of a face share them.
  UnionFind uf(static_cast<int>(faces.size()) * 4);
  for (size_t fi = 0; fi < faces.size(); ++fi)
    for (int k = 0; k < 4; ++k) faces[fi].slot[k] = static_cast<int>(fi) * 4 + k;

  // Sew faces along shared lattice edges. Around an edge the four incident
  // cells form a cycle; a face is welded to the boundary face reached by
  // rotating through the free side (so two free cells meeting only at this
  // edge keep separate sheets with duplicated vertices).
  auto face_id_of = [&](const Coord& cell, int axis, int dir) {
    const long long fkey =
        (static_cast<long long>(grid.linear(cell)) * 3 + axis) * 2 + (dir > 0 ? 1 : 0);
    auto it = face_lookup.find(fkey);
    return it == face_lookup.end() ? -1 : it->second;
  };
  // Lattice edges with four incident faces (free cells diagonal across the
  // edge) produce two independently sewn sheets; remember the sewn pairs so
  // the repair pass below can split them apart if their welded vertices end
  // up coinciding anyway.
  std::map<long long, std::vector<std::array<int, 2>>> pinch_pairs;
  for (size_t fi = 0; fi < faces.size(); ++fi) {
    const Face& f = faces[fi];
    const int a = f.axis;
    // The face's four side edges run along its two in-plane axes.
    for (int w : {(a + 1) % 3, (a + 2) % 3}) {
      const int o = 3 - a - w;  // the other in-plane axis
      for (int side = 0; side < 2; ++side) {
        // Edge start point P: face base corner, offset by side along o.
        Coord P = f.cell;
        if (f.dir > 0) P[a] += 1;
        P[o] += side;
        // Quadrant cells around the edge, in cyclic order.
        Coord q[4];
        const int da[4] = {0, -1, -1, 0}, dv[4] = {0, 0, -1, -1};
        for (int i = 0; i < 4; ++i) {
          q[i] = P;
          q[i][a] += da[i];
          q[i][o] += dv[i];
        }
        bool fr[4];
        for (int i = 0; i < 4; ++i) fr[i] = cell_free(q[i]);
        // Which interface is this face? It separates f.cell from its neighbor.
        Coord nb = f.cell;
        nb[a] += f.dir;
        int start = -1;
        for (int i = 0; i < 4; ++i) {
          const Coord &x = q[i], &y = q[(i + 1) % 4];
          if ((x == f.cell && y == nb) || (x == nb && y == f.cell)) start = i;
        }
        // Rotate through the free side to the next boundary interface.
        const int stepdir = fr[start] ? -1 : 1;
        int j = start;
        for (int steps = 0; steps < 3; ++steps) {
          j = (j + stepdir + 4) % 4;
          if (fr[j] != fr[(j + 1) % 4]) break;
        }
        // Partner face: free cell of interface j against its neighbor.
        int pj = fr[j] ? j : (j + 1) % 4;
        int nj = fr[j] ? (j + 1) % 4 : j;
        int paxis = 0;
        for (int k = 0; k < 3; ++k)
          if (q[pj][k] != q[nj][k]) paxis = k;
        const int pdir = q[nj][paxis] - q[pj][paxis];
        const int partner = face_id_of(q[pj], paxis, pdir);
        if (partner < 0 || partner == static_cast<int>(fi)) continue;  // defensive
        if (fr[0] != fr[1] && fr[1] != fr[2] && fr[2] != fr[3]) {
          auto& pv = pinch_pairs[lattice_key(P) * 3 + w];
          std::array<int, 2> pr{std::min<int>(fi, partner), std::max<int>(fi, partner)};
          if (std::find(pv.begin(), pv.end(), pr) == pv.end()) pv.push_back(pr);
        }
        // Weld matching corners at the edge's two endpoints.
        Coord P2 = P;
        P2[w] += 1;
        for (const Coord& pt : {P, P2}) {
          const long long key = lattice_key(pt);
          int sa = -1, sb = -1;
          for (int k = 0; k < 4; ++k) {
            if (faces[fi].corner[k] == key) sa = faces[fi].slot[k];
            if (faces[partner].corner[k] == key) sb = faces[partner].slot[k];
          }
          if (sa >= 0 && sb >= 0) uf.unite(sa, sb);
        }
      }
    }
  }

  // Emit vertices per union-find class, in deterministic first-use order.
  std::vector<Vec3> verts;
  std::vector<std::array<int, 3>> tris;
  std::unordered_map<int, int> vid;
  const double h = grid.cell_size();
  auto lattice_point = [&](long long key) {
    const long long x = key % kx, y = (key / kx) % ky, z = key / (kx * ky);
    return Vec3(grid.origin() + h * Vec3(double(x), double(y), double(z)));
  };
  for (size_t t = 0; t < tri_corner.size(); ++t) {
    std::array<int, 3> ids;
    for (int k = 0; k < 3; ++k) {
      const Face& f = faces[tri_face[t]];
      const int corner = tri_corner[t][k];
      const int root = uf.find(f.slot[corner]);
      auto it = vid.find(root);
      if (it == vid.end()) {
        it = vid.emplace(root, static_cast<int>(verts.size())).first;
        verts.push_back(lattice_point(f.corner[corner]));
      }
      ids[k] = it->second;
    }
    tris.push_back(ids);
  }

  // Pinch repair. When the two sheets crossing a four-face lattice edge are
  // each welded, through chains of ordinary edges, onto the *same* vertices
  // at both endpoints (free cells also connect around each endpoint), the
  // edge would carry four triangles on one vertex pair. No choice of vertex
  // duplication alone can avoid that, so split the four triangles at the
  // edge midpoint, one coincident midpoint vertex per sheet. Volume, area,
  // orientation and closedness are preserved exactly.
  std::vector<std::vector<int>> face_tris(faces.size());
  for (size_t t = 0; t < tri_face.size(); ++t) face_tris[tri_face[t]].push_back(int(t));
  auto vid_at = [&](int face, long long key) {
    for (int k = 0; k < 4; ++k)
      if (faces[face].corner[k] == key) return vid.at(uf.find(faces[face].slot[k]));
    return -1;
  };
  const long long stride[3] = {1, kx, kx * ky};
  for (const auto& [ekey, pairs] : pinch_pairs) {
    if (pairs.size() != 2) continue;  // defensive; a pinched edge sews two pairs
    const long long k1 = ekey / 3, k2 = k1 + stride[ekey % 3];
    const int u = vid_at(pairs[0][0], k1), v = vid_at(pairs[0][0], k2);
    if (u != vid_at(pairs[1][0], k1) || v != vid_at(pairs[1][0], k2)) continue;
    for (const auto& pr : pairs) {
      const int mid = static_cast<int>(verts.size());
      verts.push_back(0.5 * (verts[u] + verts[v]));
      for (int g : pr) {
        int t = -1, k = -1;
        for (int cand : face_tris[g])
          for (int e = 0; e < 3; ++e)
            if ((tris[cand][e] == u && tris[cand][(e + 1) % 3] == v) ||
                (tris[cand][e] == v && tris[cand][(e + 1) % 3] == u)) {
              t = cand;
              k = e;
            }
        const int a = tris[t][k], b = tris[t][(k + 1) % 3], c = tris[t][(k + 2) % 3];
        tris[t] = {a, mid, c};
        tris.push_back({mid, b, c});
        const long long pk = tri_key[t];
        tri_key[t] = pk * 16 + 4 * k + 1;
        tri_key.push_back(pk * 16 + 4 * k + 2);
        tri_face.push_back(g);
        face_tris[g].push_back(static_cast<int>(tris.size()) - 1);
      }
    }
  }

  TriSurface surf;
  surf.vertices = std::move(verts);
  surf.triangles = std::move(tris);
  surf.keys = std::move(tri_key);
  surf.finalize();
  return surf;
}

BoundaryData attach_occupancy(const TriSurface& surface, const VoxelGrid& grid, double a_bar) {
  const int n = surface.num_elements();
  BoundaryData bd;
  bd.pr.resize(n);
  bd.occupied.resize(n);
  bd.k_hat = VecX::Zero(n);
  bd.k_target = VecX::Zero(n);
  const double half = 0.5 * grid.cell_size();
  for (int i = 0; i < n; ++i) {
    const Vec3 beyond = surface.centroid[i] + half * surface.normal[i];
    Coord c = grid.cell_of(beyond);
    double pr;
    if (grid.in_bounds(c) && grid.observed(c)) {
      pr = grid.probability(c);
    } else {
      // Frontier: carry the explored side's (free) evidence.
      const Coord inside = grid.cell_of(surface.centroid[i] - half * surface.normal[i]);
      pr = grid.in_bounds(inside) ? grid.probability(inside) : 0.5;
    }
    bd.pr[i] = pr;
    bd.occupied[i] = pr >= a_bar + 1e-6 ? 1 : 0;
  }
  return bd;
}

void write_boundary_csv(const TriSurface& s, const BoundaryData& bd, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.precision(17);
  f << "element_id,cx,cy,cz,area,nx,ny,nz,Pr,class,k_hat,k_target\n";
  for (int i = 0; i < s.num_elements(); ++i) {
    const Vec3 &c = s.centroid[i], &n = s.normal[i];
    f << i << "," << c.x() << "," << c.y() << "," << c.z() << "," << s.area[i] << "," << n.x()
      << "," << n.y() << "," << n.z() << "," << bd.pr[i] << ","
      << (bd.occupied[i] ? "occupied" : "free") << "," << bd.k_hat[i] << "," << bd.k_target[i]
      << "\n";
  }
}

}  // namespace hexplore
