#pragma once

// Makalic-Schmidt hierarchical horseshoe: Gibbs conditionals and the
// deterministic VB expectation updates. Inverse gamma is used in the
// rate parameterization throughout.

#include <Eigen/Dense>
#include <algorithm>
#include <stdexcept>

#include "qfavar/rng.hpp"

namespace qfavar {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Numerical guards on scale draws/expectations. IG draws can underflow
// (or blow up) at double precision; both ends are clamped.
inline constexpr double kScaleFloor = 1e-12;
inline constexpr double kScaleCap = 1e12;

inline double clamp_scale(double x) {
  return std::clamp(x, kScaleFloor, kScaleCap);
}

struct HorseshoeState {
  Vector local_scales;  // lambda_bar^2_k, one per coefficient
  Vector local_aux;     // upsilon_k
  double global_scale = 1.0;  // tau^2
  double global_aux = 1.0;    // xi
  double b = 1e-4;            // VB scale hyperparameter (b_phi or b_psi)

  // VB-only: per-coefficient tau^2 and the stored inverse expectations.
  Vector vb_tau_sq;        // tau^2_k
  Vector inv_local;        // E[1/lambda_bar^2_k]
  Vector inv_local_aux;    // E[1/upsilon_k]
  Vector inv_tau;          // E[1/tau^2_k]
  double inv_xi = 1.0;     // E[1/xi]

  static HorseshoeState init(int n_coeffs, double b = 1e-4) {
    HorseshoeState s;
    s.local_scales = Vector::Ones(n_coeffs);
    s.local_aux = Vector::Ones(n_coeffs);
    s.b = b;
    s.vb_tau_sq = Vector::Ones(n_coeffs);
    s.inv_local = Vector::Ones(n_coeffs);
    s.inv_local_aux = Vector::Ones(n_coeffs);
    s.inv_tau = Vector::Ones(n_coeffs);
    return s;
  }

  int size() const { return static_cast<int>(local_scales.size()); }

  // Prior variance of coefficient k implied by the current Gibbs state.
  double prior_variance(int k) const { return clamp_scale(local_scales[k] * global_scale); }
};

// One Gibbs sweep over the horseshoe hierarchy given the current
// coefficients theta:
//   lambda_bar^2_k ~ IG(1, theta_k^2/(2 tau^2) + 1/upsilon_k)
//   upsilon_k      ~ IG(1, 1 + 1/lambda_bar^2_k)
//   tau^2          ~ IG((l+1)/2, 1/xi + sum_k theta_k^2/(2 lambda_bar^2_k))
//   xi             ~ IG(1, 1 + 1/tau^2)
inline void horseshoe_gibbs_update(const Vector& theta, HorseshoeState& state, Rng& rng) {
  const int l = state.size();
  if (theta.size() != l) throw std::invalid_argument("horseshoe_gibbs_update: dimension mismatch");
  for (int k = 0; k < l; ++k) {
    const double rate_l = theta[k] * theta[k] / (2.0 * state.global_scale) + 1.0 / state.local_aux[k];
    state.local_scales[k] = clamp_scale(rng.inverse_gamma(1.0, rate_l));
    state.local_aux[k] = clamp_scale(rng.inverse_gamma(1.0, 1.0 + 1.0 / state.local_scales[k]));
  }
  double rate_t = 1.0 / state.global_aux;
  for (int k = 0; k < l; ++k) rate_t += theta[k] * theta[k] / (2.0 * state.local_scales[k]);
  state.global_scale = clamp_scale(rng.inverse_gamma(0.5 * (l + 1.0), rate_t));
  state.global_aux = clamp_scale(rng.inverse_gamma(1.0, 1.0 + 1.0 / state.global_scale));
}

// Deterministic CAVI update of the b-scaled VB horseshoe given E[theta_k^2].
// Rate-parameterized IG(a, b) has E[1/x] = a/b. The VB hierarchy carries a
// per-coefficient tau^2_k:
//   q(lambda_bar^2_k) = IG(1, E[theta_k^2]/2 + E[1/upsilon_k])
//   q(upsilon_k)      = IG(1, E[1/lambda_bar^2_k] + b^-2 E[1/tau^2_k])
//   q(tau^2_k)        = IG(1, b^-2 E[1/upsilon_k] + E[1/xi])
//   q(xi)             = IG((l+1)/2, 1 + sum_k E[1/tau^2_k])
inline void horseshoe_vb_update(const Vector& e_theta_sq, HorseshoeState& state) {
  const int l = state.size();
  if (e_theta_sq.size() != l) throw std::invalid_argument("horseshoe_vb_update: dimension mismatch");
  if ((e_theta_sq.array() < 0.0).any())
    throw std::invalid_argument("horseshoe_vb_update: E[theta^2] must be nonnegative");
  const double binv2 = 1.0 / (state.b * state.b);
  for (int k = 0; k < l; ++k) {
    state.inv_local[k] = clamp_scale(1.0 / (0.5 * e_theta_sq[k] + state.inv_local_aux[k]));
    state.inv_local_aux[k] = clamp_scale(1.0 / (state.inv_local[k] + binv2 * state.inv_tau[k]));
    state.inv_tau[k] = clamp_scale(1.0 / (binv2 * state.inv_local_aux[k] + state.inv_xi));
  }
  state.inv_xi = clamp_scale(0.5 * (l + 1.0) / (1.0 + state.inv_tau.sum()));
  state.local_scales = state.inv_local.cwiseInverse();
  state.vb_tau_sq = state.inv_tau.cwiseInverse();
}

// Prior precision of coefficient k implied by the VB expectations.
inline double vb_prior_precision(const HorseshoeState& s, int k) {
  return clamp_scale(s.inv_local[k] * s.inv_tau[k]);
}

}  // namespace qfavar
