#include "hexplore/bvp_control.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace hexplore {

void ControlParams::validate() const {
  if (!(k_bar > 0)) throw std::invalid_argument("k_bar must be positive");
  if (!(a_bar >= 0.5 && a_bar <= 1.0))
    throw std::invalid_argument("a_bar must lie in [0.5, 1]");
  if (!(eps_w > 0 && eps_1 > 0 && eps_2 > 0))
    throw std::invalid_argument("eps_w, eps_1, eps_2 must be positive");
  if (!(mu_1 > 9.0 / 8.0)) throw std::invalid_argument("mu_1 must exceed 9/8");
  if (!(K_u > 0)) throw std::invalid_argument("K_u must be positive");
  if (!(R_1 > 0)) throw std::invalid_argument("R_1 must be positive");
}

double k_prime(double pr, double a_bar) {
  if (pr < 0 || pr > 1) throw std::invalid_argument("probability outside [0, 1]");
  if (pr >= a_bar) return bump(1.0 - a_bar, pr - a_bar);
  return -bump(a_bar, a_bar - pr);
}

VecX target_values(const TriSurface& surface, const BoundaryData& bd, const ControlParams& p) {
  const int n = surface.num_elements();
  if (bd.size() != n) throw std::invalid_argument("occupancy data does not match the surface");

  VecX kp(n);
  double flux_pos = 0, flux_neg = 0;  // area-weighted flux per sign class
  for (int i = 0; i < n; ++i) {
    kp[i] = k_prime(bd.pr[i], p.a_bar);
    if (kp[i] >= 0)
      flux_pos += surface.area[i] * kp[i];
    else
      flux_neg -= surface.area[i] * kp[i];
  }
  if (!(flux_pos > 0) || !(flux_neg > 0))
    throw std::domain_error(
        "boundary flux is one-signed: the interior flow has no source/sink pair");

  // Normalize per class; the peak ratio maps to exactly +-k_bar.
  VecX ratio(n);
  double ratio_max = 0;
  for (int i = 0; i < n; ++i) {
    ratio[i] = kp[i] / (kp[i] >= 0 ? flux_pos : flux_neg);
    ratio_max = std::max(ratio_max, std::abs(ratio[i]));
  }
  VecX kt(n);
  for (int i = 0; i < n; ++i) kt[i] = p.k_bar * (ratio[i] / ratio_max);
  return kt;
}

double gain_c(double grad_norm, const ControlParams& p) {
  return bump(p.eps_w, grad_norm - p.eps_1);
}

double gain_mu(double s, double grad_norm, double sens_dot, const ControlParams& p) {
  if (sens_dot < 0) throw std::invalid_argument("sensitivity magnitude cannot be negative");
  return bump(p.mu_1, p.K_u * s * grad_norm * grad_norm / (sens_dot + p.eps_2));
}

bool b_e_flag(const VecX& k_hat, const std::vector<std::uint8_t>& occupied) {
  if (static_cast<int>(occupied.size()) != k_hat.size())
    throw std::invalid_argument("occupancy mask does not match the flux vector");
  for (int i = 0; i < k_hat.size(); ++i)
    if (occupied[i] && k_hat[i] < 0) return true;
  return false;
}

double compatibility_residual(const VecX& k_hat, const VecX& area) {
  const double denom = area.cwiseAbs().dot(k_hat.cwiseAbs());
  if (denom == 0) return 0;
  return std::abs(area.dot(k_hat)) / denom;
}

void step_boundary_values(BoundaryValueState& st, const VecX& k_target, double c, double mu,
                          bool b_e, double dt, const VecX& area) {
  const int n = st.size();
  if (k_target.size() != n || area.size() != n)
    throw std::invalid_argument("flux/area size mismatch in boundary-value step");
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");

  st.k_target = k_target;
  st.c = c;
  st.mu = mu;
  st.b_e = b_e;

  const double lambda = c * mu + (b_e ? 1.0 : 0.0);
  if (lambda > 0) {
    // sub-step so each factor lambda*h stays <= 1/2 (comfortably stable)
    const int sub = std::max(1, static_cast<int>(std::ceil(lambda * dt / 0.5)));
    const double h = dt / sub;
    for (int k = 0; k < sub; ++k) st.k_hat += (lambda * h) * (k_target - st.k_hat);
  }

  // Repair floating-point compatibility drift. Only meaningful when the
  // target itself is compatible; otherwise the mean shift would fight the
  // law instead of cleaning round-off.
  if (compatibility_residual(k_target, area) <= 1e-10 &&
      compatibility_residual(st.k_hat, area) > 1e-10) {
    st.k_hat.array() -= area.dot(st.k_hat) / area.sum();
  }
}

BoundaryValueState init_state(const TriSurface& surface, const VecX& k_target) {
  if (k_target.size() != surface.num_elements())
    throw std::invalid_argument("target size does not match the surface");
  BoundaryValueState st;
  st.keys = surface.keys;
  st.k_hat = k_target;
  st.k_target = k_target;
  return st;
}

BoundaryValueState remap_on_reextraction(const BoundaryValueState& old_state,
                                         const TriSurface& old_surface,
                                         const TriSurface& new_surface,
                                         const VecX& new_k_target) {
  const int n_old = old_state.size();
  if (static_cast<int>(old_surface.keys.size()) != n_old ||
      static_cast<int>(old_state.keys.size()) != n_old)
    throw std::invalid_argument("old state does not match the old surface");
  const int n = new_surface.num_elements();
  if (new_k_target.size() != n)
    throw std::invalid_argument("target size does not match the new surface");

  std::unordered_map<std::int64_t, double> carried;
  carried.reserve(n_old);
  for (int i = 0; i < n_old; ++i)
    if (old_state.keys[i] >= 0)  // negative keys mean "no persistent identity"
      carried.emplace(old_state.keys[i], old_state.k_hat[i]);

  BoundaryValueState st;
  st.keys = new_surface.keys;
  st.k_target = new_k_target;
  st.b_e = old_state.b_e;
  st.c = old_state.c;
  st.mu = old_state.mu;
  st.k_hat.resize(n);
  for (int i = 0; i < n; ++i) {
    auto it = new_surface.keys[i] >= 0 ? carried.find(new_surface.keys[i]) : carried.end();
    st.k_hat[i] = it != carried.end() ? it->second : new_k_target[i];
  }

  const VecX area = Eigen::Map<const VecX>(new_surface.area.data(), n);
  if (compatibility_residual(st.k_hat, area) > 1e-10) {
    st.k_hat.array() -= area.dot(st.k_hat) / area.sum();
    // A large carried/new mismatch can push the projected values past the
    // bound; scaling preserves the zero area-weighted sum exactly.
    const double peak = st.k_hat.cwiseAbs().maxCoeff();
    const double bound = new_k_target.cwiseAbs().maxCoeff();
    if (bound > 0 && peak > bound) st.k_hat *= bound / peak;
  }
  return st;
}

void write_control_csv(const std::string& path, const std::vector<ControlLogRow>& rows) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for write: " + path);
  f.precision(17);
  f << "t,b_e,c,mu,k_max,compat_residual\n";
  for (const auto& r : rows)
    f << r.t << "," << r.b_e << "," << r.c << "," << r.mu << "," << r.k_max << "," << r.compat
      << "\n";
}

}  // namespace hexplore
