#include "hexplore/bvh.hpp"

#include <algorithm>
#include <cmath>

namespace hexplore {

namespace {

// Moller-Trumbore. Returns t, or nan. *marginal set when the hit grazes an
// edge/vertex (parity counting must then retry with another direction).
double ray_tri(const Vec3& o, const Vec3& d, const Vec3& a, const Vec3& b, const Vec3& c,
               bool* marginal = nullptr) {
  const double eps = 1e-12;
  Vec3 e1 = b - a, e2 = c - a;
  Vec3 p = d.cross(e2);
  double det = e1.dot(p);
  if (std::abs(det) < eps * e1.norm() * e2.norm()) return std::nan("");
  double inv = 1.0 / det;
  Vec3 s = o - a;
  double u = s.dot(p) * inv;
  Vec3 q = s.cross(e1);
  double v = d.dot(q) * inv;
  if (u < 0 || v < 0 || u + v > 1) return std::nan("");
  if (marginal && (u < 1e-9 || v < 1e-9 || u + v > 1 - 1e-9)) *marginal = true;
  return e2.dot(q) * inv;
}

double tri_dist2_impl(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  // Ericson, Real-Time Collision Detection 5.1.5.
  Vec3 ab = b - a, ac = c - a, ap = p - a;
  double d1 = ab.dot(ap), d2 = ac.dot(ap);
  if (d1 <= 0 && d2 <= 0) return ap.squaredNorm();
  Vec3 bp = p - b;
  double d3 = ab.dot(bp), d4 = ac.dot(bp);
  if (d3 >= 0 && d4 <= d3) return bp.squaredNorm();
  double vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    double v = d1 / (d1 - d3);
    return (ap - v * ab).squaredNorm();
  }
  Vec3 cp = p - c;
  double d5 = ab.dot(cp), d6 = ac.dot(cp);
  if (d6 >= 0 && d5 <= d6) return cp.squaredNorm();
  double vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    double w = d2 / (d2 - d6);
    return (ap - w * ac).squaredNorm();
  }
  double va = d3 * d6 - d5 * d4;
  if (va <= 0 && d4 - d3 >= 0 && d5 - d6 >= 0) {
    double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return (bp - w * (c - b)).squaredNorm();
  }
  double denom = 1.0 / (va + vb + vc);
  double v = vb * denom, w = vc * denom;
  return (ap - v * ab - w * ac).squaredNorm();
}

double aabb_dist2(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  double d2 = 0;
  for (int k = 0; k < 3; ++k) {
    double d = std::max({lo[k] - p[k], 0.0, p[k] - hi[k]});
    d2 += d * d;
  }
  return d2;
}

bool slab_hit(const Vec3& o, const Vec3& inv_d, const Vec3& lo, const Vec3& hi, double tmin,
              double tmax) {
  for (int k = 0; k < 3; ++k) {
    double t0 = (lo[k] - o[k]) * inv_d[k];
    double t1 = (hi[k] - o[k]) * inv_d[k];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return false;
  }
  return true;
}

}  // namespace

double point_triangle_dist2(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  return tri_dist2_impl(p, a, b, c);
}

TriBvh::TriBvh(const TriSurface& surf) : surf_(&surf) {
  int n = surf.num_elements();
  order_.resize(n);
  centers_.resize(n);
  for (int i = 0; i < n; ++i) {
    order_[i] = i;
    centers_[i] = surf.centroid[i];
  }
  nodes_.reserve(2 * std::max(n, 1));
  if (n > 0) build(0, n, 0);
}

int TriBvh::build(int begin, int end, int depth) {
  Node node;
  node.lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  node.hi = -node.lo;
  for (int i = begin; i < end; ++i) {
    for (int v = 0; v < 3; ++v) {
      const Vec3& p = surf_->vertices[surf_->triangles[order_[i]][v]];
      node.lo = node.lo.cwiseMin(p);
      node.hi = node.hi.cwiseMax(p);
    }
  }
  int idx = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= 4 || depth > 40) {
    nodes_[idx].begin = begin;
    nodes_[idx].end = end;
    return idx;
  }
  int axis;
  (node.hi - node.lo).maxCoeff(&axis);
  int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return centers_[a][axis] < centers_[b][axis]; });
  int l = build(begin, mid, depth + 1);
  int r = build(mid, end, depth + 1);
  nodes_[idx].left = l;
  nodes_[idx].right = r;
  return idx;
}

void TriBvh::ray_node(int ni, const Vec3& o, const Vec3& inv_d, const Vec3& d, double tmin,
                      double& tmax, int& best) const {
  const Node& node = nodes_[ni];
  if (!slab_hit(o, inv_d, node.lo, node.hi, tmin, tmax)) return;
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      int t = order_[i];
      const auto& tri = surf_->triangles[t];
      double hit = ray_tri(o, d, surf_->vertices[tri[0]], surf_->vertices[tri[1]],
                           surf_->vertices[tri[2]]);
      if (std::isfinite(hit) && hit > tmin && hit < tmax) {
        tmax = hit;
        best = t;
      }
    }
    return;
  }
  ray_node(node.left, o, inv_d, d, tmin, tmax, best);
  ray_node(node.right, o, inv_d, d, tmin, tmax, best);
}

std::optional<RayHit> TriBvh::raycast(const Vec3& origin, const Vec3& dir, double tmin,
                                      double tmax) const {
  if (nodes_.empty()) return std::nullopt;
  Vec3 inv_d;
  for (int k = 0; k < 3; ++k) inv_d[k] = 1.0 / dir[k];  // inf is fine for slab test
  int best = -1;
  ray_node(0, origin, inv_d, dir, tmin, tmax, best);
  if (best < 0) return std::nullopt;
  return RayHit{tmax, best};
}

int TriBvh::count_crossings(const Vec3& p, const Vec3& dir) const {
  // Counts all crossings; returns -1 when any hit grazes an edge.
  Vec3 inv_d;
  for (int k = 0; k < 3; ++k) inv_d[k] = 1.0 / dir[k];
  int count = 0;
  std::vector<int> stack = {0};
  while (!stack.empty()) {
    const Node& node = nodes_[stack.back()];
    stack.pop_back();
    if (!slab_hit(p, inv_d, node.lo, node.hi, 0, std::numeric_limits<double>::infinity()))
      continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const auto& tri = surf_->triangles[order_[i]];
        bool marginal = false;
        double t = ray_tri(p, dir, surf_->vertices[tri[0]], surf_->vertices[tri[1]],
                           surf_->vertices[tri[2]], &marginal);
        if (!std::isfinite(t) || t <= 0) continue;
        if (marginal) return -1;
        ++count;
      }
    } else {
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  return count;
}

bool TriBvh::contains(const Vec3& p) const {
  if (nodes_.empty()) return false;
  // Irrational-slope directions avoid grazing axis-aligned geometry; retry on a graze.
  static const Vec3 dirs[] = {Vec3(0.57231, 0.33147, 0.74632).normalized(),
                              Vec3(-0.41325, 0.81217, 0.41161).normalized(),
                              Vec3(0.12783, -0.55439, 0.82237).normalized(),
                              Vec3(0.90211, 0.21345, -0.37519).normalized()};
  for (const Vec3& d : dirs) {
    int c = count_crossings(p, d);
    if (c >= 0) return c % 2 == 1;
  }
  return count_crossings(p, Vec3(1, 0, 0)) % 2 == 1;
}

void TriBvh::dist_node(int ni, const Vec3& p, double& best) const {
  const Node& node = nodes_[ni];
  if (aabb_dist2(p, node.lo, node.hi) >= best) return;
  if (node.left < 0) {
    for (int i = node.begin; i < node.end; ++i) {
      const auto& tri = surf_->triangles[order_[i]];
      best = std::min(best, point_triangle_dist2(p, surf_->vertices[tri[0]], surf_->vertices[tri[1]],
                                            surf_->vertices[tri[2]]));
    }
    return;
  }
  double dl = aabb_dist2(p, nodes_[node.left].lo, nodes_[node.left].hi);
  double dr = aabb_dist2(p, nodes_[node.right].lo, nodes_[node.right].hi);
  int first = node.left, second = node.right;
  if (dr < dl) std::swap(first, second);
  dist_node(first, p, best);
  dist_node(second, p, best);
}

double TriBvh::distance(const Vec3& p) const {
  if (nodes_.empty()) return std::numeric_limits<double>::infinity();
  double best = std::numeric_limits<double>::infinity();
  dist_node(0, p, best);
  return std::sqrt(best);
}

}  // namespace hexplore
