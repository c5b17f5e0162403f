#include "hexplore/bem.hpp"

#include <Eigen/LU>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

#include "hexplore/bvh.hpp"

namespace hexplore {

namespace {

constexpr double kPi = 3.14159265358979323846;
// One-shot 7-point rule once the evaluation point is this many triangle
// diameters away (measured to the closest point of the panel); calibrated so
// single-layer entries come out below 1e-9 relative error.
constexpr double kFarRatio2 = 36.0;
constexpr int kMaxDepth = 16;

struct Rule7 {
  double l[7][3];
  double w[7];
};

const Rule7& rule7() {
  static const Rule7 r = [] {
    Rule7 q;
    const double s15 = std::sqrt(15.0);
    const double b1 = (6.0 - s15) / 21.0, b2 = (6.0 + s15) / 21.0;
    const double sets[3][2] = {{1.0 / 3.0, 1.0 / 3.0}, {1.0 - 2.0 * b1, b1}, {1.0 - 2.0 * b2, b2}};
    const double wts[3] = {9.0 / 40.0, (155.0 - s15) / 1200.0, (155.0 + s15) / 1200.0};
    int k = 0;
    for (int g = 0; g < 3; ++g) {
      const double a = sets[g][0], b = sets[g][1];
      const int reps = g == 0 ? 1 : 3;
      double pt[3] = {a, b, b};
      for (int rct = 0; rct < reps; ++rct) {
        for (int i = 0; i < 3; ++i) q.l[k][i] = pt[i];
        q.w[k++] = wts[g];
        std::swap(pt[0], pt[1]);
        std::swap(pt[1], pt[2]);
      }
    }
    return q;
  }();
  return r;
}

double diameter2(const Vec3& a, const Vec3& b, const Vec3& c) {
  return std::max({(a - b).squaredNorm(), (b - c).squaredNorm(), (c - a).squaredNorm()});
}

// kernel(x, weight) accumulates one quadrature point's contribution.
template <class K>
void apply_rule(const K& kernel, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Rule7& q = rule7();
  const double area = 0.5 * (b - a).cross(c - a).norm();
  for (int i = 0; i < 7; ++i)
    kernel(q.l[i][0] * a + q.l[i][1] * b + q.l[i][2] * c, q.w[i] * area);
}

template <class K>
void integrate(const K& kernel, const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c,
               int depth = 0) {
  if (depth >= kMaxDepth ||
      point_triangle_dist2(p, a, b, c) >= kFarRatio2 * diameter2(a, b, c)) {
    apply_rule(kernel, a, b, c);
    return;
  }
  const Vec3 ab = 0.5 * (a + b), bc = 0.5 * (b + c), ca = 0.5 * (c + a);
  integrate(kernel, p, a, ab, ca, depth + 1);
  integrate(kernel, p, ab, b, bc, depth + 1);
  integrate(kernel, p, ca, bc, c, depth + 1);
  integrate(kernel, p, ab, bc, ca, depth + 1);
}

Vec3 unit_normal(const Vec3& a, const Vec3& b, const Vec3& c) {
  return (b - a).cross(c - a).normalized();
}

}  // namespace

TriQuad7 tri_quad7(const Vec3& a, const Vec3& b, const Vec3& c) {
  TriQuad7 out;
  const Rule7& q = rule7();
  const double area = 0.5 * (b - a).cross(c - a).norm();
  for (int i = 0; i < 7; ++i) {
    out.x[i] = q.l[i][0] * a + q.l[i][1] * b + q.l[i][2] * c;
    out.w[i] = q.w[i] * area;
  }
  return out;
}

double tri_single_layer(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  double acc = 0;
  integrate([&](const Vec3& x, double w) { acc += w / (4.0 * kPi * (p - x).norm()); }, p, a, b, c);
  return acc;
}

double tri_double_layer(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = unit_normal(a, b, c);
  double acc = 0;
  integrate(
      [&](const Vec3& x, double w) {
        const Vec3 d = p - x;
        acc += w * n.dot(d) / (4.0 * kPi * std::pow(d.squaredNorm(), 1.5));
      },
      p, a, b, c);
  return acc;
}

Vec3 tri_single_layer_grad(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  Vec3 acc = Vec3::Zero();
  integrate(
      [&](const Vec3& x, double w) {
        const Vec3 d = x - p;
        acc += w * d / (4.0 * kPi * std::pow(d.squaredNorm(), 1.5));
      },
      p, a, b, c);
  return acc;
}

Vec3 tri_double_layer_grad(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 n = unit_normal(a, b, c);
  Vec3 acc = Vec3::Zero();
  integrate(
      [&](const Vec3& x, double w) {
        const Vec3 d = p - x;
        const double r2 = d.squaredNorm(), r = std::sqrt(r2);
        acc += w * (n / (r2 * r) - 3.0 * n.dot(d) * d / (r2 * r2 * r)) / (4.0 * kPi);
      },
      p, a, b, c);
  return acc;
}

double tri_self_single_layer(const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 p = (a + b + c) / 3.0;
  const Vec3 n = unit_normal(a, b, c);
  const Vec3 v[3] = {a, b, c};
  double acc = 0;
  for (int e = 0; e < 3; ++e) {
    const Vec3 &s = v[e], &t = v[(e + 1) % 3];
    const double len = (t - s).norm();
    const Vec3 tangent = (t - s) / len;
    const Vec3 out = tangent.cross(n);  // in-plane, away from the interior
    const double h = (s - p).dot(out);
    const double s1 = (s - p).dot(tangent), s2 = (t - p).dot(tangent);
    const double r1 = (s - p).norm(), r2 = (t - p).norm();
    acc += h * std::log((r2 + s2) / (r1 + s1));
  }
  return acc / (4.0 * kPi);
}

double surface_distance(const TriSurface& s, const Vec3& p) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : s.triangles)
    best = std::min(best, point_triangle_dist2(p, s.vertices[t[0]], s.vertices[t[1]],
                                               s.vertices[t[2]]));
  return std::sqrt(best);
}

std::shared_ptr<const LaplaceOperators> BemAssembler::assemble(const TriSurface& s) {
  const int n = s.num_elements();
  if (n == 0) throw std::domain_error("cannot assemble operators for an empty surface");
  auto ops = std::make_shared<LaplaceOperators>();
  ops->H.resize(n, n);
  ops->G.resize(n, n);
  ops->area.resize(n);
  ops->keys = s.keys;
  for (int i = 0; i < n; ++i) {
    if (s.area[i] < 1e-12)
      throw std::domain_error("degenerate element " + std::to_string(i) +
                              " (area=" + std::to_string(s.area[i]) + ")");
    ops->area[i] = s.area[i];
  }

  // Entries whose row and column element both appeared in the previous
  // surface are geometric invariants of the key pair: copy them.
  std::vector<int> old_of(n, -1);
  if (prev_ && !prev_->keys.empty()) {
    std::unordered_map<std::int64_t, int> lookup;
    for (size_t i = 0; i < prev_->keys.size(); ++i) lookup.emplace(prev_->keys[i], int(i));
    for (int i = 0; i < n; ++i) {
      auto it = lookup.find(s.keys[i]);
      if (it != lookup.end()) old_of[i] = it->second;
    }
  }

  auto tri = [&](int j, Vec3& a, Vec3& b, Vec3& c) {
    a = s.vertices[s.triangles[j][0]];
    b = s.vertices[s.triangles[j][1]];
    c = s.vertices[s.triangles[j][2]];
  };
  for (int i = 0; i < n; ++i) {
    const Vec3 p = s.centroid[i];
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      if (old_of[i] >= 0 && old_of[j] >= 0) {
        ops->H(i, j) = prev_->H(old_of[i], old_of[j]);
        ops->G(i, j) = prev_->G(old_of[i], old_of[j]);
        ++hits_;
        continue;
      }
      ++misses_;
      Vec3 a, b, c;
      tri(j, a, b, c);
      ops->G(i, j) = tri_single_layer(p, a, b, c);
      ops->H(i, j) = tri_double_layer(p, a, b, c);
    }
  }
  for (int i = 0; i < n; ++i) {
    if (old_of[i] >= 0) {
      ops->G(i, i) = prev_->G(old_of[i], old_of[i]);
      ++hits_;
    } else {
      ++misses_;
      Vec3 a, b, c;
      tri(i, a, b, c);
      ops->G(i, i) = tri_self_single_layer(a, b, c);
    }
    // The diagonal closes the row sum, so it always reflects the new column
    // set even when every off-diagonal entry was copied.
    ops->H(i, i) = 0.0;
    ops->H(i, i) = -ops->H.row(i).sum();
  }
  prev_ = ops;
  return ops;
}

std::shared_ptr<const LaplaceOperators> assemble(const TriSurface& s) {
  BemAssembler one;
  return one.assemble(s);
}

struct BorderedLU {
  Eigen::PartialPivLU<MatX> lu;
};

namespace {

const BorderedLU& bordered(const LaplaceOperators& ops) {
  if (!ops.lu) {
    const int n = ops.size();
    MatX m(n + 1, n + 1);
    m.topLeftCorner(n, n) = ops.H;
    m.topRightCorner(n, 1) = ops.area;
    m.bottomLeftCorner(1, n) = ops.area.transpose();
    m(n, n) = 0.0;
    auto f = std::make_shared<BorderedLU>();
    f->lu.compute(m);
    ops.lu = f;
  }
  return *ops.lu;
}

// Solve Mᵀ y = b reusing the factorization P M = L U of M:
// Mᵀ = Uᵀ Lᵀ P, so y = Pᵀ (Lᵀ \ (Uᵀ \ b)).
VecX transposed_solve(const BorderedLU& f, const VecX& b) {
  const auto& lu = f.lu;
  VecX z = lu.matrixLU().triangularView<Eigen::Upper>().transpose().solve(b);
  VecX w = lu.matrixLU().triangularView<Eigen::UnitLower>().transpose().solve(z);
  return lu.permutationP().transpose() * w;
}

void check_guard(const TriSurface& s, const Vec3& p, double guard) {
  if (guard <= 0) return;
  const double d = surface_distance(s, p);
  if (d <= guard)
    throw std::domain_error("evaluation point is " + std::to_string(d) +
                            " m from the boundary (guard " + std::to_string(guard) + " m)");
}

}  // namespace

NeumannSolution solve_neumann(const LaplaceOperators& ops, VecX k_hat) {
  const int n = ops.size();
  if (k_hat.size() != n) throw std::invalid_argument("flux size does not match operator");
  NeumannSolution out;
  const double total = ops.area.sum();
  const double net = ops.area.dot(k_hat);
  const double scale = ops.area.dot(k_hat.cwiseAbs());
  out.incompatibility = scale > 0 ? std::abs(net) / scale : 0.0;
  if (out.incompatibility > 1e-8) {
    k_hat.array() -= net / total;
    out.projected = true;
  }
  const VecX b = ops.G * k_hat;
  VecX rhs(n + 1);
  rhs.head(n) = b;
  rhs(n) = 0.0;
  VecX x = bordered(ops).lu.solve(rhs);
  out.phi = x.head(n);
  out.phi.array() -= ops.area.dot(out.phi) / total;  // scrub rounding in the constraint
  out.lambda = x(n);
  // Residual of the rank-completed system that was solved. The raw residual
  // H*phi - b equals -lambda*A exactly: for generic compatible flux, G*k
  // carries an O(h^2) component outside range(H) that no solver can remove;
  // lambda reports it.
  const double bn = b.norm();
  const VecX r = ops.H * out.phi + out.lambda * ops.area - b;
  out.residual = bn > 0 ? r.norm() / bn : r.norm();
  return out;
}

EvalVectors eval_vectors(const TriSurface& s, const Vec3& p) {
  const int n = s.num_elements();
  EvalVectors ev;
  ev.Hp.resize(n);
  ev.Gp.resize(n);
  for (int j = 0; j < n; ++j) {
    const Vec3 &a = s.vertices[s.triangles[j][0]], &b = s.vertices[s.triangles[j][1]],
               &c = s.vertices[s.triangles[j][2]];
    ev.Hp[j] = -tri_double_layer(p, a, b, c);
    ev.Gp[j] = -tri_single_layer(p, a, b, c);
  }
  return ev;
}

double eval_potential(const TriSurface& s, const VecX& phi, const VecX& k_hat, const Vec3& p,
                      double guard) {
  check_guard(s, p, guard);
  const EvalVectors ev = eval_vectors(s, p);
  return ev.Hp.dot(phi) - ev.Gp.dot(k_hat);
}

double eval_potential(const LaplaceOperators&, const TriSurface& s, const VecX& phi,
                      const VecX& k_hat, const Vec3& p, double guard) {
  return eval_potential(s, phi, k_hat, p, guard);
}

Vec3 eval_gradient(const LaplaceOperators&, const TriSurface& s, const VecX& phi,
                   const VecX& k_hat, const Vec3& p, double guard) {
  return eval_gradient(s, phi, k_hat, p, guard);
}

Vec3 eval_gradient(const TriSurface& s, const VecX& phi, const VecX& k_hat, const Vec3& p,
                   double guard) {
  check_guard(s, p, guard);
  Vec3 acc = Vec3::Zero();
  for (int j = 0; j < s.num_elements(); ++j) {
    const Vec3 &a = s.vertices[s.triangles[j][0]], &b = s.vertices[s.triangles[j][1]],
               &c = s.vertices[s.triangles[j][2]];
    acc += phi[j] * (-tri_double_layer_grad(p, a, b, c));
    acc -= k_hat[j] * (-tri_single_layer_grad(p, a, b, c));
  }
  return acc;
}

VecX sensitivity_row(const LaplaceOperators& ops, const TriSurface& s, const Vec3& p,
                     double guard) {
  check_guard(s, p, guard);
  const int n = ops.size();
  const EvalVectors ev = eval_vectors(s, p);
  VecX rhs(n + 1);
  rhs.head(n) = ev.Hp;
  rhs(n) = 0.0;
  const VecX y = transposed_solve(bordered(ops), rhs);
  return ops.G.transpose() * y.head(n) - ev.Gp;
}

void write_matrix(const std::string& path, const MatX& m) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  const std::int64_t rows = m.rows(), cols = m.cols();
  f.write(reinterpret_cast<const char*>(&rows), 8);
  f.write(reinterpret_cast<const char*>(&cols), 8);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) {
      const double v = m(i, j);
      f.write(reinterpret_cast<const char*>(&v), 8);
    }
}

MatX read_matrix(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for read: " + path);
  std::int64_t rows = 0, cols = 0;
  f.read(reinterpret_cast<char*>(&rows), 8);
  f.read(reinterpret_cast<char*>(&cols), 8);
  MatX m(rows, cols);
  for (std::int64_t i = 0; i < rows; ++i)
    for (std::int64_t j = 0; j < cols; ++j) {
      double v;
      f.read(reinterpret_cast<char*>(&v), 8);
      m(i, j) = v;
    }
  if (!f) throw std::runtime_error("truncated matrix file: " + path);
  return m;
}

void write_residual_csv(const std::string& path, const std::vector<double>& residuals) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.precision(17);
  f << "iteration,residual\n";
  for (size_t i = 0; i < residuals.size(); ++i) f << i << "," << residuals[i] << "\n";
}

}  // namespace hexplore
