#include "hexplore/mesh.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <unordered_map>

namespace hexplore {

void TriSurface::finalize() {
  const int n = num_elements();
  centroid.resize(n);
  normal.resize(n);
  area.resize(n);
  if (keys.empty()) keys.assign(n, -1);
  for (int t = 0; t < n; ++t) {
    const Vec3& a = vertices[triangles[t][0]];
    const Vec3& b = vertices[triangles[t][1]];
    const Vec3& c = vertices[triangles[t][2]];
    const Vec3 cr = (b - a).cross(c - a);
    const double a2 = cr.norm();
    centroid[t] = (a + b + c) / 3.0;
    area[t] = 0.5 * a2;
    const double dmax = max_diameter(t);
    if (!(a2 > 1e-12 * dmax * dmax))
      throw std::invalid_argument(cat("degenerate triangle ", t, " (area ", 0.5 * a2, ")"));
    normal[t] = cr / a2;
  }
}

double TriSurface::total_area() const {
  double s = 0;
  for (double a : area) s += a;
  return s;
}

double TriSurface::signed_volume() const {
  double v = 0;
  for (const auto& t : triangles)
    v += vertices[t[0]].dot(vertices[t[1]].cross(vertices[t[2]]));
  return v / 6.0;
}

double TriSurface::max_diameter(int t) const {
  const Vec3& a = vertices[triangles[t][0]];
  const Vec3& b = vertices[triangles[t][1]];
  const Vec3& c = vertices[triangles[t][2]];
  return std::sqrt(std::max({(a - b).squaredNorm(), (b - c).squaredNorm(), (c - a).squaredNorm()}));
}

WatertightReport check_watertight(const TriSurface& s) {
  // Map undirected edge -> (count, sum of directions). Opposite traversal cancels.
  std::map<std::pair<int, int>, std::pair<int, int>> edges;
  for (const auto& t : s.triangles) {
    for (int e = 0; e < 3; ++e) {
      int u = t[e], v = t[(e + 1) % 3];
      int dir = u < v ? 1 : -1;
      auto key = std::minmax(u, v);
      auto& rec = edges[{key.first, key.second}];
      rec.first += 1;
      rec.second += dir;
    }
  }
  WatertightReport rep;
  rep.closed = true;
  rep.oriented = true;
  for (const auto& [k, rec] : edges) {
    if (rec.first != 2) {
      rep.closed = false;
      ++rep.bad_edges;
    } else if (rec.second != 0) {
      rep.oriented = false;
      ++rep.bad_edges;
    }
  }
  return rep;
}

namespace {

// Per-face frames: normal axis, u axis, v axis with u x v = outward normal.
struct FaceFrame {
  Vec3 n, u, v;
};
const FaceFrame kFaces[6] = {
    {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}},   {{-1, 0, 0}, {0, 0, 1}, {0, 1, 0}},
    {{0, 1, 0}, {0, 0, 1}, {1, 0, 0}},   {{0, -1, 0}, {1, 0, 0}, {0, 0, 1}},
    {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}},   {{0, 0, -1}, {0, 1, 0}, {1, 0, 0}}};

}  // namespace

TriSurface make_sphere_cubed(int n, double radius) {
  TriSurface s;
  std::map<std::array<long long, 3>, int> weld;
  auto vid = [&](const Vec3& p) {
    std::array<long long, 3> k{llround(p.x() * 1e9), llround(p.y() * 1e9), llround(p.z() * 1e9)};
    auto it = weld.find(k);
    if (it != weld.end()) return it->second;
    int id = static_cast<int>(s.vertices.size());
    s.vertices.push_back(p);
    weld[k] = id;
    return id;
  };
  for (const auto& f : kFaces) {
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        auto pt = [&](int a, int b) {
          double uu = -1.0 + 2.0 * a / n, vv = -1.0 + 2.0 * b / n;
          Vec3 p = f.n + uu * f.u + vv * f.v;
          return Vec3(radius * p.normalized());
        };
        int p00 = vid(pt(i, j)), p10 = vid(pt(i + 1, j));
        int p11 = vid(pt(i + 1, j + 1)), p01 = vid(pt(i, j + 1));
        s.triangles.push_back({p00, p10, p11});
        s.triangles.push_back({p00, p11, p01});
      }
    }
  }
  s.finalize();
  return s;
}

TriSurface make_sphere_latlong(int rings, int slices, double radius) {
  TriSurface s;
  const int R = rings, S = slices;
  std::vector<std::vector<int>> ring(R + 1);
  for (int r = 0; r <= R; ++r) {
    double th = M_PI * r / R;
    if (r == 0 || r == R) {
      ring[r].assign(S, static_cast<int>(s.vertices.size()));
      s.vertices.push_back(Vec3(0, 0, radius * std::cos(th)));
      continue;
    }
    for (int k = 0; k < S; ++k) {
      double ph = 2.0 * M_PI * k / S;
      ring[r].push_back(static_cast<int>(s.vertices.size()));
      s.vertices.push_back(radius * Vec3(std::sin(th) * std::cos(ph),
                                         std::sin(th) * std::sin(ph), std::cos(th)));
    }
  }
  for (int r = 0; r < R; ++r) {
    for (int k = 0; k < S; ++k) {
      int k1 = (k + 1) % S;
      int a = ring[r][k], b = ring[r + 1][k], c = ring[r + 1][k1], d = ring[r][k1];
      if (r == 0) {
        s.triangles.push_back({a, b, c});
      } else if (r == R - 1) {
        s.triangles.push_back({a, b, d});
      } else {
        s.triangles.push_back({a, b, c});
        s.triangles.push_back({a, c, d});
      }
    }
  }
  s.finalize();
  return s;
}

TriSurface make_box(const Vec3& lo, const Vec3& hi, int n, bool crossed) {
  TriSurface s;
  const Vec3 c = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  std::map<std::array<long long, 3>, int> weld;
  auto vid = [&](const Vec3& p) {
    std::array<long long, 3> k{llround(p.x() * 1e9), llround(p.y() * 1e9), llround(p.z() * 1e9)};
    auto it = weld.find(k);
    if (it != weld.end()) return it->second;
    int id = static_cast<int>(s.vertices.size());
    s.vertices.push_back(p);
    weld[k] = id;
    return id;
  };
  for (const auto& f : kFaces) {
    auto pt = [&](double a, double b) {
      Vec3 p = f.n + (-1.0 + 2.0 * a / n) * f.u + (-1.0 + 2.0 * b / n) * f.v;
      return Vec3(c + p.cwiseProduct(half));
    };
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) {
        int p00 = vid(pt(i, j)), p10 = vid(pt(i + 1, j));
        int p11 = vid(pt(i + 1, j + 1)), p01 = vid(pt(i, j + 1));
        if (crossed) {
          int pc = vid(pt(i + 0.5, j + 0.5));
          s.triangles.push_back({p00, p10, pc});
          s.triangles.push_back({p10, p11, pc});
          s.triangles.push_back({p11, p01, pc});
          s.triangles.push_back({p01, p00, pc});
        } else {
          s.triangles.push_back({p00, p10, p11});
          s.triangles.push_back({p00, p11, p01});
        }
      }
    }
  }
  s.finalize();
  return s;
}

void write_stl_binary(const TriSurface& s, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  char header[80] = {0};
  std::strncpy(header, "hexplore surface", sizeof(header) - 1);
  f.write(header, 80);
  std::uint32_t n = static_cast<std::uint32_t>(s.triangles.size());
  f.write(reinterpret_cast<const char*>(&n), 4);
  for (int t = 0; t < s.num_elements(); ++t) {
    float buf[12];
    for (int k = 0; k < 3; ++k) buf[k] = static_cast<float>(s.normal[t][k]);
    for (int v = 0; v < 3; ++v)
      for (int k = 0; k < 3; ++k) buf[3 + 3 * v + k] = static_cast<float>(s.vertices[s.triangles[t][v]][k]);
    f.write(reinterpret_cast<const char*>(buf), sizeof(buf));
    std::uint16_t attr = 0;
    f.write(reinterpret_cast<const char*>(&attr), 2);
  }
}

void write_obj(const TriSurface& s, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.precision(17);
  for (const auto& v : s.vertices) f << "v " << v.x() << " " << v.y() << " " << v.z() << "\n";
  for (const auto& t : s.triangles) f << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
}

TriSurface read_stl_binary(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open: " + path);
  char header[80];
  f.read(header, 80);
  std::uint32_t n = 0;
  f.read(reinterpret_cast<char*>(&n), 4);
  TriSurface s;
  std::map<std::array<float, 3>, int> weld;
  auto vid = [&](const float* p) {
    std::array<float, 3> k{p[0], p[1], p[2]};
    auto it = weld.find(k);
    if (it != weld.end()) return it->second;
    int id = static_cast<int>(s.vertices.size());
    s.vertices.push_back(Vec3(p[0], p[1], p[2]));
    weld[k] = id;
    return id;
  };
  for (std::uint32_t t = 0; t < n; ++t) {
    float buf[12];
    std::uint16_t attr;
    f.read(reinterpret_cast<char*>(buf), sizeof(buf));
    f.read(reinterpret_cast<char*>(&attr), 2);
    if (!f) throw std::runtime_error("truncated STL: " + path);
    s.triangles.push_back({vid(buf + 3), vid(buf + 6), vid(buf + 9)});
  }
  s.finalize();
  return s;
}

TriSurface read_obj(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  TriSurface s;
  std::string tok;
  while (f >> tok) {
    if (tok == "v") {
      Vec3 v;
      f >> v.x() >> v.y() >> v.z();
      s.vertices.push_back(v);
    } else if (tok == "f") {
      std::array<int, 3> t;
      for (int k = 0; k < 3; ++k) {
        std::string w;
        f >> w;
        t[k] = std::stoi(w.substr(0, w.find('/'))) - 1;
      }
      s.triangles.push_back(t);
    } else {
      std::string rest;
      std::getline(f, rest);
    }
  }
  s.finalize();
  return s;
}

TriSurface read_surface(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  if (ext == "stl" || ext == "STL") return read_stl_binary(path);
  if (ext == "obj" || ext == "OBJ") return read_obj(path);
  throw std::runtime_error("unsupported surface format: " + path);
}

}  // namespace hexplore
