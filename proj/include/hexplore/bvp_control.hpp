#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hexplore/core.hpp"
#include "hexplore/mesh.hpp"
#include "hexplore/surface_extract.hpp"

namespace hexplore {

// Controller parameters (one struct shared by the boundary-value law and the
// velocity law). Defaults are the reference operating point.
struct ControlParams {
  double k_bar = 1.0;       // bound on the Neumann data magnitude
  double a_bar = 0.5;       // occupancy probability threshold
  double eps_w = 0.01;      // width of the critical-point gate
  double eps_1 = 0.01;      // gradient-norm dead zone
  double eps_2 = 0.01;      // sensitivity regularizer
  double mu_1 = 10.0 / 8.0; // rate-gain saturation scale, must exceed 9/8
  double K_u = 1.0;         // velocity gain
  double R_1 = 0.2;         // slow-down radius (m)

  void validate() const;  // throws std::invalid_argument on a bad field
};

// Neumann boundary data evolving under the adaptive law, with element
// identity (lattice keys) so values survive surface re-extraction.
struct BoundaryValueState {
  std::vector<std::int64_t> keys;
  VecX k_hat;
  VecX k_target;
  bool b_e = false;  // last emergency flag
  double c = 0;      // last critical-point gate
  double mu = 0;     // last rate gain
  int size() const { return static_cast<int>(k_hat.size()); }
};

// Signed flux seed for one element: +bump above the occupancy threshold,
// -bump below it, in [-1, 1], zero exactly at the threshold.
double k_prime(double pr, double a_bar);

// Target Neumann data: k_prime per element, normalized per sign class by the
// class's area-weighted flux so the result is exactly compatible
// (area-weighted sum ~ 0) and peaks at exactly +-k_bar.
// Throws std::domain_error when either sign class is empty (one-signed
// boundary: nothing to explore toward, or nothing explored).
VecX target_values(const TriSurface& surface, const BoundaryData& bd, const ControlParams& p);

// Gate that vanishes at critical points: bump(eps_w, |grad phi| - eps_1).
double gain_c(double grad_norm, const ControlParams& p);

// Rate gain bump(mu_1, K_u s |grad|^2 / (sens_dot + eps_2)); sens_dot is the
// magnitude of the solution sensitivity along (k_target - k_hat). Since
// mu_1 > 9/8 the gain is strictly below its argument for positive arguments.
double gain_mu(double s, double grad_norm, double sens_dot, const ControlParams& p);

// Emergency flag: set iff some occupied element carries negative flux
// (attractive obstacle). Vacuously clear without occupied elements.
bool b_e_flag(const VecX& k_hat, const std::vector<std::uint8_t>& occupied);

// Explicit Euler update k_hat += dt (c mu + b_e)(k_target - k_hat),
// sub-stepped so each sub-step's decay factor stays below 1/2 (the law is a
// diagonal linear decay; the update is then a convex combination and the
// k_bar bound is preserved). When k_target is itself area-compatible,
// floating-point compatibility drift beyond 1e-10 (relative, area-weighted)
// is removed by mean subtraction; an incompatible k_target disables the
// repair so the op stays a pure Euler step on toy fixtures.
void step_boundary_values(BoundaryValueState& st, const VecX& k_target, double c, double mu,
                          bool b_e, double dt, const VecX& area);

// Carry k_hat across a re-extraction: elements whose lattice key persists
// keep their value, new elements start at their target value, and the result
// is mean-projected when it drifts out of compatibility (then rescaled in
// the rare case the projection pushed it past k_bar).
BoundaryValueState remap_on_reextraction(const BoundaryValueState& old_state,
                                         const TriSurface& old_surface,
                                         const TriSurface& new_surface, const VecX& new_k_target);

// Fresh state on a first extraction: k_hat starts at the target values.
BoundaryValueState init_state(const TriSurface& surface, const VecX& k_target);

// |A . k| / sum A_i |k_i|  (0 when the denominator vanishes).
double compatibility_residual(const VecX& k_hat, const VecX& area);

struct ControlLogRow {
  double t = 0;
  int b_e = 0;
  double c = 0, mu = 0, k_max = 0, compat = 0;
};

void write_control_csv(const std::string& path, const std::vector<ControlLogRow>& rows);

}  // namespace hexplore
