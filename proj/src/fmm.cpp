#include "hexplore/fmm.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace hexplore {
namespace {

using C = std::complex<double>;

// --- solid harmonics ---------------------------------------------------------
// Scaled solid harmonics R (regular) and S (singular) with the recurrences
// below and plain conjugate symmetry for negative orders: X_n^{-m} = conj(X_n^m)
// (no Condon-Shortley factor). Under that symmetry the translation theorems
// carry the sign esign(a,b,c) = (-1)^((|a|+|b|-|c|)/2); all five operators
// (P2M, M2M, M2L, L2L, L2P and the dipole variant) were frozen against direct
// 1/r sums before this file was written.

inline int hidx(int n, int m) { return n * (n + 1) + m; }

inline double esign(int a, int b, int c) {
  const int e = (std::abs(a) + std::abs(b) - std::abs(c)) / 2;  // always integral
  return (e & 1) ? -1.0 : 1.0;
}

struct Harm {
  int p = -1;
  std::vector<C> a;

  void zero(int order) {
    p = order;
    a.assign(static_cast<std::size_t>(order + 1) * (order + 1), C(0));
  }
  C& at(int n, int m) { return a[hidx(n, m)]; }
  const C& at(int n, int m) const { return a[hidx(n, m)]; }
  // Guarded read: out-of-range (n, m) contribute nothing to convolutions.
  C cat(int n, int m) const {
    if (n < 0 || n > p || m > n || m < -n) return C(0);
    return a[hidx(n, m)];
  }
  void mirror() {  // fill m < 0 from m >= 0 (real source densities)
    for (int n = 1; n <= p; ++n)
      for (int m = 1; m <= n; ++m) at(n, -m) = std::conj(at(n, m));
  }
};

void regular_into(const Vec3& v, int p, Harm& R) {
  R.zero(p);
  const C xy(v.x(), v.y());
  const double r2 = v.squaredNorm(), z = v.z();
  R.at(0, 0) = 1.0;
  for (int m = 1; m <= p; ++m) R.at(m, m) = xy / (2.0 * m) * R.at(m - 1, m - 1);
  for (int m = 0; m < p; ++m) R.at(m + 1, m) = z * R.at(m, m);
  for (int m = 0; m <= p; ++m)
    for (int n = m + 2; n <= p; ++n)
      R.at(n, m) = ((2 * n - 1) * z * R.at(n - 1, m) - r2 * R.at(n - 2, m)) /
                   double((n + m) * (n - m));
  R.mirror();
}

void singular_into(const Vec3& v, int p, Harm& S) {
  S.zero(p);
  const C xy(v.x(), v.y());
  const double r2 = v.squaredNorm(), z = v.z();
  S.at(0, 0) = 1.0 / std::sqrt(r2);
  for (int m = 1; m <= p; ++m) S.at(m, m) = (2.0 * m - 1) * xy * S.at(m - 1, m - 1) / r2;
  for (int m = 0; m < p; ++m) S.at(m + 1, m) = (2 * m + 1) * z * S.at(m, m) / r2;
  for (int m = 0; m <= p; ++m)
    for (int n = m + 2; n <= p; ++n)
      S.at(n, m) = ((2 * n - 1) * z * S.at(n - 1, m) -
                    double((n - 1) * (n - 1) - m * m) * S.at(n - 2, m)) / r2;
  S.mirror();
}

inline std::uint64_t cell_key(std::int32_t x, std::int32_t y, std::int32_t z) {
  return (static_cast<std::uint64_t>(x) << 42) | (static_cast<std::uint64_t>(y) << 21) |
         static_cast<std::uint64_t>(z);
}

}  // namespace

// --- near field --------------------------------------------------------------

struct NearField {
  int n = 0;
  // CSR over target elements: exact quadrature entries for all pairs inside
  // adjacent leaves. The double-layer diagonal is stored as 0 here and
  // completed per expansion order from the row-sum identity.
  std::vector<std::int64_t> offset;
  std::vector<std::int32_t> idx;
  std::vector<double> G, H;
  // Per-element source data shared by the expansion passes.
  std::vector<std::array<Vec3, 7>> quad_x;
  std::vector<std::array<double, 7>> quad_w;  // weights scaled by 1/(4*pi)
  std::vector<Vec3> normal, target;
  mutable std::map<int, VecX> h_diag;  // expansion order -> diagonal completion
};

std::size_t Octree::near_entry_count() const {
  return near_field ? near_field->idx.size() : 0;
}

// --- tree build ----------------------------------------------------------------

Octree build_tree(const TriSurface& surface, int leaf_capacity) {
  const int n = surface.num_elements();
  if (n < 1) throw std::invalid_argument("build_tree: surface has no elements");
  if (leaf_capacity < 1) throw std::invalid_argument("build_tree: leaf_capacity must be >= 1");

  Octree tree;
  tree.leaf_capacity = leaf_capacity;
  Vec3 lo = surface.centroid[0], hi = surface.centroid[0];
  for (int i = 1; i < n; ++i) {
    lo = lo.cwiseMin(surface.centroid[i]);
    hi = hi.cwiseMax(surface.centroid[i]);
  }
  tree.root_center = 0.5 * (lo + hi);
  double hw = 0.5 * (hi - lo).maxCoeff();
  if (!(hw > 0)) hw = 1.0;        // all centroids coincide
  tree.root_half_width = hw * (1.0 + 1e-12) + 1e-300;

  constexpr int kMaxDepth = 12;
  const Vec3 root_lo = tree.root_center - Vec3::Constant(tree.root_half_width);
  auto coords_at = [&](const Vec3& c, int level) {
    const double w = 2.0 * tree.root_half_width / double(1 << level);
    std::array<std::int32_t, 3> out;
    for (int k = 0; k < 3; ++k) {
      auto v = static_cast<std::int64_t>(std::floor((c[k] - root_lo[k]) / w));
      out[k] = static_cast<std::int32_t>(
          std::clamp<std::int64_t>(v, 0, (std::int64_t(1) << level) - 1));
    }
    return out;
  };

  int depth = 0;
  for (; depth < kMaxDepth; ++depth) {
    if (n <= leaf_capacity && depth == 0) break;
    std::unordered_map<std::uint64_t, int> count;
    count.reserve(static_cast<std::size_t>(n) * 2);
    int worst = 0;
    for (int i = 0; i < n; ++i) {
      const auto c = coords_at(surface.centroid[i], depth);
      worst = std::max(worst, ++count[cell_key(c[0], c[1], c[2])]);
    }
    if (worst <= leaf_capacity) break;
  }
  depth = std::min(depth, kMaxDepth);
  tree.depth = depth;

  // Create the occupied cells level by level, root first.
  tree.levels.assign(depth + 1, {});
  std::vector<std::unordered_map<std::uint64_t, int>> id_at(depth + 1);
  {
    OctreeNode root;
    root.center = tree.root_center;
    root.half_width = tree.root_half_width;
    root.level = 0;
    root.leaf = (depth == 0);
    tree.nodes.push_back(root);
    tree.levels[0].push_back(0);
    id_at[0][cell_key(0, 0, 0)] = 0;
  }
  tree.leaf_of.assign(n, 0);
  for (int i = 0; i < n; ++i) {
    const auto lc = coords_at(surface.centroid[i], depth);
    int node = 0;
    for (int lvl = 1; lvl <= depth; ++lvl) {
      const int shift = depth - lvl;
      const std::array<std::int32_t, 3> c = {lc[0] >> shift, lc[1] >> shift, lc[2] >> shift};
      auto [it, inserted] = id_at[lvl].try_emplace(cell_key(c[0], c[1], c[2]), -1);
      if (inserted) {
        OctreeNode nd;
        nd.level = lvl;
        nd.coord = c;
        nd.half_width = tree.root_half_width / double(1 << lvl);
        for (int k = 0; k < 3; ++k)
          nd.center[k] = root_lo[k] + (2.0 * c[k] + 1.0) * nd.half_width;
        nd.parent = node;
        nd.leaf = (lvl == depth);
        it->second = static_cast<int>(tree.nodes.size());
        tree.nodes.push_back(nd);
        tree.levels[lvl].push_back(it->second);
        const int oct = ((c[0] & 1) << 2) | ((c[1] & 1) << 1) | (c[2] & 1);
        tree.nodes[node].children[oct] = it->second;
      }
      node = it->second;
    }
    tree.nodes[node].elements.push_back(i);
    tree.leaf_of[i] = node;
  }

  // Colleague lists (same-level cells at most one cell away, self included)
  // drive both the far lists and the leaf near field.
  std::vector<std::vector<int>> colleagues(tree.nodes.size());
  colleagues[0] = {0};
  for (int lvl = 1; lvl <= depth; ++lvl) {
    for (int u : tree.levels[lvl]) {
      OctreeNode& nu = tree.nodes[u];
      for (int q : colleagues[nu.parent]) {
        for (int c : tree.nodes[q].children) {
          if (c < 0) continue;
          const OctreeNode& nc = tree.nodes[c];
          const int dx = std::abs(nc.coord[0] - nu.coord[0]);
          const int dy = std::abs(nc.coord[1] - nu.coord[1]);
          const int dz = std::abs(nc.coord[2] - nu.coord[2]);
          if (std::max({dx, dy, dz}) <= 1)
            colleagues[u].push_back(c);
          else
            nu.far.push_back(c);
        }
      }
    }
  }
  for (int u : tree.levels[depth]) tree.nodes[u].near = colleagues[u];
  return tree;
}

// --- near-field cache ----------------------------------------------------------

namespace {

const NearField& ensure_near_field(const Octree& tree, const TriSurface& surface) {
  const int n = surface.num_elements();
  if (tree.near_field && tree.near_field->n == n) return *tree.near_field;

  auto nf = std::make_shared<NearField>();
  nf->n = n;
  nf->quad_x.resize(n);
  nf->quad_w.resize(n);
  nf->normal.resize(n);
  nf->target.resize(n);
  constexpr double inv4pi = 1.0 / (4.0 * M_PI);
  for (int i = 0; i < n; ++i) {
    const auto& t = surface.triangles[i];
    const TriQuad7 q = tri_quad7(surface.vertices[t[0]], surface.vertices[t[1]],
                                 surface.vertices[t[2]]);
    nf->quad_x[i] = q.x;
    for (int k = 0; k < 7; ++k) nf->quad_w[i][k] = q.w[k] * inv4pi;
    nf->normal[i] = surface.normal[i];
    nf->target[i] = surface.centroid[i];
  }

  nf->offset.assign(n + 1, 0);
  for (int i = 0; i < n; ++i) {
    std::int64_t cnt = 0;
    for (int v : tree.nodes[tree.leaf_of[i]].near)
      cnt += static_cast<std::int64_t>(tree.nodes[v].elements.size());
    nf->offset[i + 1] = nf->offset[i] + cnt;
  }
  nf->idx.resize(nf->offset[n]);
  nf->G.resize(nf->offset[n]);
  nf->H.resize(nf->offset[n]);
  for (int i = 0; i < n; ++i) {
    std::int64_t pos = nf->offset[i];
    const Vec3& p = surface.centroid[i];
    for (int v : tree.nodes[tree.leaf_of[i]].near) {
      for (int j : tree.nodes[v].elements) {
        const auto& t = surface.triangles[j];
        const Vec3 &a = surface.vertices[t[0]], &b = surface.vertices[t[1]],
                   &c = surface.vertices[t[2]];
        nf->idx[pos] = j;
        if (j == i) {
          nf->G[pos] = tri_self_single_layer(a, b, c);
          nf->H[pos] = 0.0;  // completed per order from the row-sum identity
        } else {
          nf->G[pos] = tri_single_layer(p, a, b, c);
          nf->H[pos] = tri_double_layer(p, a, b, c);
        }
        ++pos;
      }
    }
  }
  tree.near_field = nf;
  return *tree.near_field;
}

// --- expansion passes ----------------------------------------------------------

// Far-field part of (H or G)·x: P2M, M2M up to level 2, M2L across far lists,
// L2L down, L2P at leaf elements. Exact zero when the tree is too shallow to
// have far lists (everything is near field then).
VecX far_pass(const Octree& tree, const NearField& nf, Kernel kernel, const VecX& x,
              int p) {
  const int n = nf.n;
  VecX y = VecX::Zero(n);
  if (tree.depth < 2) return y;

  const std::size_t ncoef = static_cast<std::size_t>(p + 1) * (p + 1);
  std::vector<std::vector<C>> M(tree.nodes.size()), L(tree.nodes.size());
  Harm R, S;

  // P2M at leaves (order m >= 0, mirrored afterwards).
  for (int u : tree.levels[tree.depth]) {
    const OctreeNode& nu = tree.nodes[u];
    auto& Mu = M[u];
    Mu.assign(ncoef, C(0));
    for (int e : nu.elements) {
      if (x[e] == 0.0) continue;
      const Vec3 d = nf.normal[e];
      const C dxy_m(d.x(), -d.y()), dxy_p(d.x(), d.y());
      for (int q = 0; q < 7; ++q) {
        regular_into(nf.quad_x[e][q] - nu.center, p, R);
        const double s = x[e] * nf.quad_w[e][q];
        if (kernel == Kernel::single_layer) {
          for (int nn = 0; nn <= p; ++nn)
            for (int mm = 0; mm <= nn; ++mm) Mu[hidx(nn, mm)] += s * R.at(nn, mm);
        } else {
          // dipole along the element normal: (d·∇)R
          for (int nn = 0; nn <= p; ++nn)
            for (int mm = 0; mm <= nn; ++mm) {
              const double sm = mm > 0 ? 1.0 : -1.0;  // s+ is -1 for m >= 0
              Mu[hidx(nn, mm)] +=
                  s * (d.z() * R.cat(nn - 1, mm) - 0.5 * dxy_m * R.cat(nn - 1, mm + 1) +
                       sm * 0.5 * dxy_p * R.cat(nn - 1, mm - 1));
            }
        }
      }
    }
    for (int nn = 1; nn <= p; ++nn)
      for (int mm = 1; mm <= nn; ++mm) Mu[hidx(nn, -mm)] = std::conj(Mu[hidx(nn, mm)]);
  }

  // M2M towards level 2.
  for (int lvl = tree.depth - 1; lvl >= 2; --lvl) {
    for (int u : tree.levels[lvl]) {
      auto& Mu = M[u];
      Mu.assign(ncoef, C(0));
      for (int c : tree.nodes[u].children) {
        if (c < 0 || M[c].empty()) continue;
        const auto& Mc = M[c];
        regular_into(tree.nodes[c].center - tree.nodes[u].center, p, R);
        for (int nn = 0; nn <= p; ++nn)
          for (int mm = 0; mm <= nn; ++mm) {
            C acc(0);
            for (int k = 0; k <= nn; ++k)
              for (int l = -k; l <= k; ++l) {
                if (std::abs(mm - l) > nn - k) continue;
                acc += esign(l, mm - l, mm) * R.at(k, l) * Mc[hidx(nn - k, mm - l)];
              }
            Mu[hidx(nn, mm)] += acc;
          }
      }
      for (int nn = 1; nn <= p; ++nn)
        for (int mm = 1; mm <= nn; ++mm) Mu[hidx(nn, -mm)] = std::conj(Mu[hidx(nn, mm)]);
    }
  }

  // M2L per level, then L2L into the next level. Translation operators depend
  // only on the integer cell offset, so they are cached per level.
  for (int lvl = 2; lvl <= tree.depth; ++lvl) {
    const double w = 2.0 * tree.root_half_width / double(1 << lvl);
    std::unordered_map<int, Harm> s_cache;
    for (int u : tree.levels[lvl]) {
      const OctreeNode& nu = tree.nodes[u];
      if (nu.far.empty()) continue;
      auto& Lu = L[u];
      if (Lu.empty()) Lu.assign(ncoef, C(0));
      for (int v : nu.far) {
        if (M[v].empty()) continue;
        const auto& Mv = M[v];
        const OctreeNode& nv = tree.nodes[v];
        const int ox = nu.coord[0] - nv.coord[0], oy = nu.coord[1] - nv.coord[1],
                  oz = nu.coord[2] - nv.coord[2];
        Harm& St = s_cache[(ox + 3) * 49 + (oy + 3) * 7 + (oz + 3)];
        if (St.p < 0) singular_into(Vec3(ox * w, oy * w, oz * w), 2 * p, St);
        for (int nn = 0; nn <= p; ++nn) {
          const double fn = (nn & 1) ? -1.0 : 1.0;
          for (int mm = 0; mm <= nn; ++mm) {
            C acc(0);
            for (int k = 0; k <= p; ++k)
              for (int l = -k; l <= k; ++l)
                acc += esign(mm, l, l - mm) * Mv[hidx(k, l)] *
                       std::conj(St.at(nn + k, l - mm));
            Lu[hidx(nn, mm)] += fn * acc;
          }
        }
      }
    }
    for (int u : tree.levels[lvl]) {
      auto& Lu = L[u];
      if (Lu.empty()) continue;
      for (int nn = 1; nn <= p; ++nn)
        for (int mm = 1; mm <= nn; ++mm) Lu[hidx(nn, -mm)] = std::conj(Lu[hidx(nn, mm)]);
    }
    if (lvl == tree.depth) break;
    for (int u : tree.levels[lvl]) {
      if (L[u].empty()) continue;
      const auto& Lu = L[u];
      for (int c : tree.nodes[u].children) {
        if (c < 0) continue;
        auto& Lc = L[c];
        if (Lc.empty()) Lc.assign(ncoef, C(0));
        regular_into(tree.nodes[c].center - tree.nodes[u].center, p, R);
        for (int nn = 0; nn <= p; ++nn)
          for (int mm = 0; mm <= nn; ++mm) {
            C acc(0);
            for (int k = nn; k <= p; ++k)
              for (int l = -k; l <= k; ++l) {
                if (std::abs(l - mm) > k - nn) continue;
                acc += esign(l - mm, mm, l) * std::conj(R.at(k - nn, l - mm)) * Lu[hidx(k, l)];
              }
            Lc[hidx(nn, mm)] += acc;
          }
      }
    }
  }

  // L2P at leaf elements.
  for (int u : tree.levels[tree.depth]) {
    if (L[u].empty()) continue;
    const auto& Lu = L[u];
    const OctreeNode& nu = tree.nodes[u];
    for (int e : nu.elements) {
      regular_into(nf.target[e] - nu.center, p, R);
      double acc = Lu[hidx(0, 0)].real() * R.at(0, 0).real();
      for (int nn = 1; nn <= p; ++nn) {
        acc += (Lu[hidx(nn, 0)] * std::conj(R.at(nn, 0))).real();
        for (int mm = 1; mm <= nn; ++mm)
          acc += 2.0 * (Lu[hidx(nn, mm)] * std::conj(R.at(nn, mm))).real();
      }
      y[e] = acc;
    }
  }
  return y;
}

const VecX& h_diagonal(const Octree& tree, const NearField& nf, int p) {
  auto it = nf.h_diag.find(p);
  if (it != nf.h_diag.end()) return it->second;
  const VecX far1 = far_pass(tree, nf, Kernel::double_layer, VecX::Ones(nf.n), p);
  VecX diag(nf.n);
  for (int i = 0; i < nf.n; ++i) {
    double s = far1[i];
    for (std::int64_t e = nf.offset[i]; e < nf.offset[i + 1]; ++e) s += nf.H[e];
    diag[i] = -s;
  }
  return nf.h_diag.emplace(p, std::move(diag)).first->second;
}

}  // namespace

// --- matvec ----------------------------------------------------------------

VecX fmm_matvec(const Octree& tree, const TriSurface& surface, Kernel kernel,
                const VecX& x, const FmmConfig& cfg) {
  if (cfg.p_exp < 2)
    throw std::invalid_argument("fmm_matvec: expansion order must be at least 2");
  const int n = surface.num_elements();
  if (static_cast<int>(tree.leaf_of.size()) != n)
    throw std::invalid_argument("fmm_matvec: tree was built for a different surface");
  if (x.size() != n) throw std::invalid_argument("fmm_matvec: vector size mismatch");

  const NearField& nf = ensure_near_field(tree, surface);
  VecX y = far_pass(tree, nf, kernel, x, cfg.p_exp);
  const std::vector<double>& entries = kernel == Kernel::single_layer ? nf.G : nf.H;
  for (int i = 0; i < n; ++i) {
    double acc = y[i];
    for (std::int64_t e = nf.offset[i]; e < nf.offset[i + 1]; ++e)
      acc += entries[e] * x[nf.idx[e]];
    y[i] = acc;
  }
  if (kernel == Kernel::double_layer) {
    const VecX& diag = h_diagonal(tree, nf, cfg.p_exp);
    y.array() += diag.array() * x.array();
  }
  return y;
}

// --- iterative solve ---------------------------------------------------------

FmmSolution iterative_solve(const Octree& tree, const TriSurface& surface, VecX k_hat,
                            const FmmConfig& cfg) {
  if (cfg.p_exp < 2)
    throw std::invalid_argument("iterative_solve: expansion order must be at least 2");
  const int n = surface.num_elements();
  if (k_hat.size() != n) throw std::invalid_argument("flux size does not match surface");

  FmmSolution out;
  VecX area(n);
  for (int i = 0; i < n; ++i) area[i] = surface.area[i];
  const double total = area.sum();
  const double net = area.dot(k_hat);
  const double scale = area.dot(k_hat.cwiseAbs());
  out.incompatibility = scale > 0 ? std::abs(net) / scale : 0.0;
  if (out.incompatibility > 1e-8) {
    k_hat.array() -= net / total;
    out.projected = true;
  }

  // Bordered system [[H, A], [A^T, 0]], border scaled to unit norm for the
  // Krylov iteration; the multiplier is scaled back on exit.
  const double anorm = area.norm();
  const VecX a_unit = area / anorm;
  const int dim = n + 1;
  auto apply = [&](const VecX& v) {
    VecX w(dim);
    w.head(n) =
        fmm_matvec(tree, surface, Kernel::double_layer, v.head(n), cfg) + v(n) * a_unit;
    w(n) = a_unit.dot(v.head(n));
    return w;
  };

  VecX b(dim);
  b.head(n) = fmm_matvec(tree, surface, Kernel::single_layer, k_hat, cfg);
  b(n) = 0.0;
  const double bnorm = b.norm();
  if (bnorm == 0.0) {
    out.phi = VecX::Zero(n);
    return out;
  }

  // Restarted GMRES, modified Gram-Schmidt with Givens rotations.
  const int restart = std::max(1, std::min(cfg.restart, dim));
  VecX x = VecX::Zero(dim);
  double rel = 1.0;
  bool converged = false;
  while (!converged && out.iterations < cfg.max_iterations) {
    VecX r = b - apply(x);
    const double beta = r.norm();
    rel = beta / bnorm;
    if (rel <= cfg.tolerance) {
      converged = true;
      break;
    }
    std::vector<VecX> V;
    V.reserve(restart + 1);
    V.push_back(r / beta);
    MatX Hs = MatX::Zero(restart + 1, restart);
    VecX g = VecX::Zero(restart + 1);
    g(0) = beta;
    std::vector<double> cs(restart), sn(restart);
    int j = 0;
    for (; j < restart && out.iterations < cfg.max_iterations; ++j) {
      VecX w = apply(V[j]);
      for (int i = 0; i <= j; ++i) {
        Hs(i, j) = V[i].dot(w);
        w -= Hs(i, j) * V[i];
      }
      Hs(j + 1, j) = w.norm();
      const bool breakdown = Hs(j + 1, j) <= 1e-14 * bnorm;
      if (!breakdown) V.push_back(w / Hs(j + 1, j));
      for (int i = 0; i < j; ++i) {
        const double t = cs[i] * Hs(i, j) + sn[i] * Hs(i + 1, j);
        Hs(i + 1, j) = -sn[i] * Hs(i, j) + cs[i] * Hs(i + 1, j);
        Hs(i, j) = t;
      }
      const double denom = std::hypot(Hs(j, j), Hs(j + 1, j));
      cs[j] = Hs(j, j) / denom;
      sn[j] = Hs(j + 1, j) / denom;
      Hs(j, j) = denom;
      Hs(j + 1, j) = 0.0;
      g(j + 1) = -sn[j] * g(j);
      g(j) = cs[j] * g(j);
      ++out.iterations;
      rel = std::abs(g(j + 1)) / bnorm;
      out.residual_history.push_back(rel);
      if (rel <= cfg.tolerance || breakdown) {
        ++j;
        break;
      }
    }
    // x += V * (upper-triangular solve)
    VecX yv = VecX::Zero(j);
    for (int i = j - 1; i >= 0; --i) {
      double s = g(i);
      for (int k = i + 1; k < j; ++k) s -= Hs(i, k) * yv(k);
      yv(i) = s / Hs(i, i);
    }
    for (int i = 0; i < j; ++i) x += yv(i) * V[i];
    if (rel <= cfg.tolerance) converged = true;
  }

  // Honest final residual (the Givens estimate drifts slightly).
  rel = (b - apply(x)).norm() / bnorm;
  out.residual = rel;
  if (rel > cfg.tolerance) {
    std::ostringstream msg;
    msg << "iterative solve did not converge after " << out.iterations
        << " iterations (relative residual " << rel << "); history:";
    char buf[16];
    for (double h : out.residual_history) {
      std::snprintf(buf, sizeof buf, " %.3e", h);
      msg << buf;
    }
    throw std::runtime_error(msg.str());
  }
  out.phi = x.head(n);
  out.phi.array() -= area.dot(out.phi) / total;
  out.lambda = x(n) / anorm;
  return out;
}

}  // namespace hexplore
