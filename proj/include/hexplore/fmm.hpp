#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include "hexplore/bem.hpp"
#include "hexplore/core.hpp"
#include "hexplore/mesh.hpp"

namespace hexplore {

// Fast multipole acceleration of the H and G matrix-vector products from the
// boundary-element module. Element-element interactions are replaced by octree
// cell-cell interactions: adjacent leaf pairs keep exact quadrature (the same
// integrals the dense assembler uses, diagonal included), everything farther
// goes through solid-harmonic multipole/local expansions. Neither H nor G is
// ever formed; memory is O(N) plus the near-field sparse block.

struct FmmConfig {
  int p_exp = 12;            // expansion order; (p_exp+1)^2 coefficients
  int leaf_capacity = 50;    // build_tree default
  double tolerance = 1e-6;   // iterative solve: relative residual target
  int restart = 80;          // GMRES restart length
  int max_iterations = 400;  // total inner iterations before giving up
};

enum class Kernel { single_layer, double_layer };

// Multipole/local coefficients about a cell center, dense solid-harmonic
// layout: index n(n+1)+m for degree n ≤ p, order m ∈ [-n, n].
struct Expansion {
  Vec3 center = Vec3::Zero();
  std::vector<std::complex<double>> multipole, local;
};

struct OctreeNode {
  Vec3 center = Vec3::Zero();
  double half_width = 0;
  int level = 0;
  int parent = -1;
  std::array<int, 8> children{{-1, -1, -1, -1, -1, -1, -1, -1}};
  std::array<std::int32_t, 3> coord{{0, 0, 0}};  // integer cell coords at level
  std::vector<int> elements;  // element ids (leaves only)
  std::vector<int> near;      // leaves: adjacent leaves, self included
  std::vector<int> far;       // same-level cells two or three cells away
  bool leaf = false;
};

struct NearField;  // cached exact entries for adjacent-leaf element pairs

// Uniform-depth octree over element centroids: the depth is the smallest one
// at which every occupied cell holds ≤ leaf_capacity elements, empty cells are
// pruned, and all leaves sit at that depth. Every element belongs to exactly
// one leaf. Far lists cover each element pair at exactly one level; pairs in
// adjacent leaves stay in the near field.
struct Octree {
  Vec3 root_center = Vec3::Zero();
  double root_half_width = 0;
  int depth = 0;
  int leaf_capacity = 50;
  std::vector<OctreeNode> nodes;             // nodes[0] is the root
  std::vector<std::vector<int>> levels;      // node ids per level
  std::vector<int> leaf_of;                  // element id -> leaf node id

  // Exact near-field entries, built on the first matvec and reused (same
  // lazy-cache pattern as the dense factorization). The double-layer diagonal
  // is completed from the row-sum identity per expansion order.
  mutable std::shared_ptr<const NearField> near_field;

  // Number of cached near-field (i, j) pairs; 0 until the first matvec.
  // Structural witness that no N×N storage exists on this path.
  std::size_t near_entry_count() const;
};

// Builds the octree for the surface. Degenerate inputs are fine: if all
// elements fit one cell the root is the single leaf. Capacity is best-effort
// past depth 12 (coincident centroids cannot be separated by subdivision).
Octree build_tree(const TriSurface& surface, int leaf_capacity = 50);

// One accelerated product H·x or G·x. Upward pass (P2M, M2M), translations
// (M2L), downward pass (L2L, L2P), plus the exact near field. Matches the
// dense product to ~1e-5 relative at the default order. The double-layer
// kernel applies gradient-form expansions to dipole densities along element
// normals, and its diagonal is the same row-sum completion the dense assembler
// uses, so H·1 = 0 holds exactly.
// Throws std::invalid_argument for p_exp < 2.
VecX fmm_matvec(const Octree& tree, const TriSurface& surface, Kernel kernel,
                const VecX& x, const FmmConfig& cfg = {});

struct FmmSolution {
  VecX phi;               // area-weighted mean-zero boundary potential
  double residual = 0;    // final relative residual of the bordered system
  double lambda = 0;      // rank-completion multiplier (see dense solver)
  double incompatibility = 0;
  bool projected = false;
  int iterations = 0;
  std::vector<double> residual_history;  // relative residual per iteration
};

// Restarted GMRES on the same bordered system the dense path factorizes
// ([[H, A], [A^T, 0]]), with both the operator and the right-hand side G·k̂
// applied through fmm_matvec. Stops at cfg.tolerance relative residual.
// Incompatible flux is projected and flagged exactly like solve_neumann.
// Throws std::runtime_error with the residual history on non-convergence,
// std::invalid_argument for p_exp < 2.
FmmSolution iterative_solve(const Octree& tree, const TriSurface& surface, VecX k_hat,
                            const FmmConfig& cfg = {});

}  // namespace hexplore
