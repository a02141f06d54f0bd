#pragma once

// Asymmetric Laplace density and its normal-exponential mixture
// representation, plus the order-1/2 generalized inverse Gaussian
// draws and moments used by the quantile updates.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "qfavar/rng.hpp"

namespace qfavar {

struct ALParams {
  double q;      // quantile level in (0,1); the q-th quantile of the law is 0
  double scale;  // sigma > 0 (supplement parameterization, appears linearly)

  void validate() const {
    if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("ALParams: q must be in (0,1)");
    if (!(scale > 0.0)) throw std::invalid_argument("ALParams: scale must be > 0");
  }
};

struct MixtureConstants {
  double kappa1;     // (1-2q)/(q(1-q))
  double kappa2_sq;  // 2/(q(1-q))
};

inline MixtureConstants mixture_constants(double q) {
  if (!(q > 0.0 && q < 1.0)) throw std::invalid_argument("mixture_constants: q must be in (0,1)");
  const double qq = q * (1.0 - q);
  return {(1.0 - 2.0 * q) / qq, 2.0 / qq};
}

// AL(0, scale, q) density at u.
inline double al_density(double u, const ALParams& p) {
  p.validate();
  const double c = p.q * (1.0 - p.q) / p.scale;
  if (u <= 0.0) return c * std::exp((1.0 - p.q) * u / p.scale);
  return c * std::exp(-p.q * u / p.scale);
}

// alpha-quantile of AL(0, scale, q); the q-quantile is 0 by construction.
inline double al_quantile(const ALParams& p, double alpha) {
  p.validate();
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("al_quantile: alpha must lie in (0,1)");
  if (alpha < p.q) return p.scale / (1.0 - p.q) * std::log(alpha / p.q);
  return -p.scale / p.q * std::log((1.0 - alpha) / (1.0 - p.q));
}

// One draw from the normal-exponential mixture:
//   z ~ Exp(scale),  u | z ~ N(kappa1 z, kappa2^2 scale z).
// Marginally u ~ AL(0, scale, q). Returns (u, z); z is kept for data
// augmentation.
inline std::pair<double, double> al_mixture_draw(const ALParams& p, Rng& rng) {
  p.validate();
  const auto mc = mixture_constants(p.q);
  const double z = rng.exponential(p.scale);
  const double u = rng.normal(mc.kappa1 * z, std::sqrt(mc.kappa2_sq * p.scale * z));
  return {u, z};
}

// GIG(1/2, delta, rho) in the convention used by the variational updates:
// density proportional to z^{-1/2} exp(-(delta*z + rho/z)/2), i.e. delta
// multiplies z and rho multiplies 1/z.
//
// With x = sqrt(delta*rho) the half-integer Bessel ratio
// K_{3/2}(x)/K_{1/2}(x) = 1 + 1/x gives closed forms:
//   E[z]   = sqrt(rho/delta) * (1 + 1/x)
//   E[1/z] = sqrt(delta/rho) * (1 + 1/x) - 1/rho
struct GigMoments {
  double mean;      // E[z]
  double mean_inv;  // E[1/z]
};

inline GigMoments gig_moments(double delta, double rho) {
  if (!(delta > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("gig_moments: parameters must be > 0");
  const double x = std::sqrt(delta * rho);
  const double ratio = 1.0 + 1.0 / x;
  return {std::sqrt(rho / delta) * ratio, std::sqrt(delta / rho) * ratio - 1.0 / rho};
}

// Draw z ~ GIG(1/2, delta, rho). Order 1/2 reduces exactly to the
// reciprocal of an inverse Gaussian: 1/z ~ IG(mu = sqrt(delta/rho),
// lambda = delta), sampled with the Michael-Schucany-Haas transform.
inline double gig_draw(double delta, double rho, Rng& rng) {
  if (!(delta > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("gig_draw: parameters must be > 0");
  const double mu = std::sqrt(delta / rho);
  const double lambda = delta;
  const double v = rng.normal();
  const double y = v * v;
  double w = mu + mu * mu * y / (2.0 * lambda) -
             (mu / (2.0 * lambda)) * std::sqrt(4.0 * mu * lambda * y + mu * mu * y * y);
  if (w <= 0.0) w = std::numeric_limits<double>::min();  // extreme tail underflow
  const double u = rng.uniform();
  const double ig = (u <= mu / (mu + w)) ? w : mu * mu / w;
  return 1.0 / ig;
}

// Standard normal quantile, Acklam's rational approximation refined with
// one Halley step (absolute error well below 1e-12).
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0))
    throw std::invalid_argument("normal_quantile: p must lie in (0,1)");
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5, r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double e = 0.5 * std::erfc(-x / std::sqrt(2.0)) - p;
  const double u = e * std::sqrt(2.0 * M_PI) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace qfavar
