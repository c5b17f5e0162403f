#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "hexplore/core.hpp"
#include "hexplore/mesh.hpp"

namespace hexplore {

// Dense boundary-element operators for the interior Laplace problem with
// Neumann data (flux k = ∂φ/∂n, outward normal) on a closed triangulated
// surface. Constant elements, centroid collocation:
//
//   boundary system   H φ̂ = G k̂,  H = ½I + B,  B_ij = ∫ n_j·(x_i − y) / (4π r³) dS
//   interior point    φ(p) = H_p·φ̂ − G_p·k̂       with H_p·1 = +1
//
// H's diagonal is set from the row-sum identity H·1 = 0 (constants are in the
// nullspace: pure Neumann). Solves pin the area-weighted mean of φ̂ to zero
// through a bordered system.

// --- element quadrature ------------------------------------------------------
// Fixed 7-point degree-5 rule per (sub)triangle; panels are split four ways
// until the evaluation point is at least six diameters away. Entries come out
// at ~1e-9 relative accuracy (checked against an error-driven refinement
// oracle in the tests).

struct TriQuad7 {
  std::array<Vec3, 7> x;
  std::array<double, 7> w;  // weights sum to the triangle area
};
TriQuad7 tri_quad7(const Vec3& a, const Vec3& b, const Vec3& c);

// ∫ 1/(4π|p−y|) dS(y) over the triangle.
double tri_single_layer(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
// ∫ n·(p−y)/(4π|p−y|³) dS(y); n is the unit normal of (a,b,c) by winding.
double tri_double_layer(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
// Gradients of the two integrals with respect to p.
Vec3 tri_single_layer_grad(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
Vec3 tri_double_layer_grad(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);
// Self term ∫ 1/(4π|c̄−y|) dS(y) from the centroid c̄, by the in-plane
// edge-logarithm closed form.
double tri_self_single_layer(const Vec3& a, const Vec3& b, const Vec3& c);

struct BorderedLU;  // cached factorization of [[H, A], [Aᵀ, 0]]

struct LaplaceOperators {
  MatX H, G;                      // N×N collocation matrices; H·1 = 0, G_ij > 0
  VecX area;                      // element areas = compatibility weights A
  std::vector<std::int64_t> keys; // element identities (drive the entry cache)

  int size() const { return static_cast<int>(area.size()); }

  mutable std::shared_ptr<const BorderedLU> lu;  // built lazily on first solve
};

// Assembles H and G; entries between elements whose keys appeared in the
// previously assembled surface are copied instead of re-integrated (element
// keys determine geometry exactly).
class BemAssembler {
 public:
  std::shared_ptr<const LaplaceOperators> assemble(const TriSurface& surface);

  long long cache_hits() const { return hits_; }
  long long cache_misses() const { return misses_; }

 private:
  std::shared_ptr<const LaplaceOperators> prev_;
  long long hits_ = 0, misses_ = 0;
};

// One-shot assembly without reuse.
std::shared_ptr<const LaplaceOperators> assemble(const TriSurface& surface);

struct NeumannSolution {
  VecX phi;               // area-weighted mean-zero boundary potential
  double residual = 0;    // ‖Hφ̂ + λA − Gk̂‖₂ / ‖Gk̂‖₂ (the solved system)
  double lambda = 0;      // rank-completion multiplier; |λ|‖A‖/‖Gk̂‖ is the
                          // part of Gk̂ outside range(H) (discretization error)
  double incompatibility = 0;  // |Σ A_i k_i| / Σ A_i |k_i| of the input
  bool projected = false;      // input flux was projected to Σ A_i k_i = 0
};

// Solves H φ̂ = G k̂ with the constant mode removed (Σ A_i φ̂_i = 0), via the
// bordered system [[H, A], [Aᵀ, 0]]. Flux whose area-weighted sum exceeds
// 1e-8 relative is projected first and the solution flagged.
NeumannSolution solve_neumann(const LaplaceOperators& ops, VecX k_hat);

struct EvalVectors {
  VecX Hp, Gp;  // φ(p) = Hp·φ̂ − Gp·k̂
};
EvalVectors eval_vectors(const TriSurface& surface, const Vec3& p);

// Interior evaluation. `guard` is the minimum allowed distance from p to the
// surface; closer points throw (near-singular quadrature would be garbage).
// Only the boundary solution (phi, k_hat) enters; no assembled operator is
// needed, so these also serve solutions produced by the fast solver.
double eval_potential(const TriSurface& surface, const VecX& phi, const VecX& k_hat,
                      const Vec3& p, double guard = 0.0);
Vec3 eval_gradient(const TriSurface& surface, const VecX& phi, const VecX& k_hat, const Vec3& p,
                   double guard = 0.0);
double eval_potential(const LaplaceOperators& ops, const TriSurface& surface, const VecX& phi,
                      const VecX& k_hat, const Vec3& p, double guard = 0.0);
Vec3 eval_gradient(const LaplaceOperators& ops, const TriSurface& surface, const VecX& phi,
                   const VecX& k_hat, const Vec3& p, double guard = 0.0);

// Row ∂φ(p)/∂k̂ = H_p H⁻¹ G − G_p via one transposed bordered solve.
VecX sensitivity_row(const LaplaceOperators& ops, const TriSurface& surface, const Vec3& p,
                     double guard = 0.0);

// Exact distance from p to the surface (brute force over elements).
double surface_distance(const TriSurface& surface, const Vec3& p);

// Binary row-major float64 matrix dump for offline inspection.
void write_matrix(const std::string& path, const MatX& m);
MatX read_matrix(const std::string& path);
// Solver diagnostics: one "iteration,residual" line per entry.
void write_residual_csv(const std::string& path, const std::vector<double>& residuals);

}  // namespace hexplore
