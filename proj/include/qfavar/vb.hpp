#pragma once

// Two-step variational estimator. Step 1 extracts one static quantile
// factor per (indicator, quantile) block by alternating per-series
// variational quantile-regression updates with a Gaussian factor update.
// Step 2 holds the factor paths fixed and runs deterministic
// coordinate-ascent updates of the measurement coefficients, mixture
// variables, scales, and the state VAR, matching the Gibbs blocks.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfavar/config.hpp"
#include "qfavar/distributions.hpp"
#include "qfavar/draws.hpp"
#include "qfavar/gibbs.hpp"
#include "qfavar/layout.hpp"
#include "qfavar/panel.hpp"
#include "qfavar/shrinkage.hpp"

namespace qfavar {

namespace detail {

inline Matrix psd_inverse(Matrix P, const std::string& what) {
  Eigen::LLT<Matrix> llt(P);
  if (llt.info() != Eigen::Success) {
    P.diagonal().array() += 1e-10 * (1.0 + P.diagonal().maxCoeff());
    llt.compute(P);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("vb: precision not positive definite at " + what);
  }
  return llt.solve(Matrix::Identity(P.rows(), P.cols()));
}

// Floor on horseshoe prior precisions in the deterministic updates. Along a
// flat (near-collinear) direction of the design the horseshoe precision
// scales like 1/theta^2, which lets the coefficient drift without bound from
// sweep to sweep; a weak N(0, 100) envelope pins such directions while being
// negligible for coefficients of realistic size.
inline constexpr double kRidge = 0.01;

}  // namespace detail

// Variational state of one regression with an asymmetric-Laplace (or
// Gaussian) error: Gaussian q(phi), GIG q(z_t), inverse-gamma q(scale).
struct VbRegression {
  Vector mu;         // posterior mean of the coefficients
  Matrix cov;        // posterior covariance
  Vector ez;         // E[z_t]
  Vector einv_z;     // E[1/z_t]
  double sig_shape = 1.0, sig_rate = 1.0;  // q(scale) = IG(shape, rate)
  double einv_sigma = 1.0;                 // E[1/scale]

  static VbRegression init(int d, int T) {
    VbRegression s;
    s.mu = Vector::Zero(d);
    s.cov = Matrix::Identity(d, d);
    s.ez = Vector::Ones(T);
    s.einv_z = Vector::Ones(T);
    return s;
  }

  double e_sigma() const { return sig_rate / std::max(sig_shape - 1.0, 0.5); }
  double var_sigma() const {
    if (sig_shape <= 2.0) return e_sigma() * e_sigma();
    return sig_rate * sig_rate / ((sig_shape - 1.0) * (sig_shape - 1.0) * (sig_shape - 2.0));
  }
};

// One CAVI pass over (phi, z, scale) for y = X phi + AL_q error, given the
// coefficient prior precisions. With `gaussian` the error is N(0, scale)
// and z is unused. `what` names the equation in error messages.
inline void vb_regression_update(const Matrix& X, const Vector& y, const MixtureConstants& mc,
                                 bool gaussian, double r0, double s0, const Vector& prior_prec,
                                 const Vector& prior_mean, VbRegression& s,
                                 const std::string& what) {
  const int T = static_cast<int>(X.rows());
  const int d = static_cast<int>(X.cols());

  Vector res = y;
  Vector quad = Vector::Zero(T);
  if (d > 0) {
    // Gaussian coefficient update with weights E[1/nu_t]
    Vector w(T);
    for (int t = 0; t < T; ++t)
      w[t] = gaussian ? s.einv_sigma : s.einv_sigma * s.einv_z[t] / mc.kappa2_sq;
    Matrix P = X.transpose() * w.asDiagonal() * X;
    P.diagonal() += prior_prec;
    Vector b = X.transpose() * w.cwiseProduct(y);
    if (!gaussian) b -= (mc.kappa1 * s.einv_sigma / mc.kappa2_sq) * X.colwise().sum().transpose();
    b += prior_prec.cwiseProduct(prior_mean);
    s.cov = detail::psd_inverse(P, what);
    s.mu = s.cov * b;

    // residual moments with the coefficient-uncertainty correction
    res -= X * s.mu;
    for (int t = 0; t < T; ++t) quad[t] = X.row(t) * s.cov * X.row(t).transpose();
  }

  if (gaussian) {
    double m = 0.0;
    for (int t = 0; t < T; ++t) m += res[t] * res[t] + quad[t];
    s.sig_shape = r0 + 0.5 * T;
    s.sig_rate = s0 + 0.5 * m;
    s.einv_sigma = s.sig_shape / s.sig_rate;
    return;
  }

  // GIG update of the mixture variables
  const double delta_z = s.einv_sigma * (mc.kappa1 * mc.kappa1 + 2.0 * mc.kappa2_sq) / mc.kappa2_sq;
  for (int t = 0; t < T; ++t) {
    const double m2 = res[t] * res[t] + quad[t];
    const double rho = std::max(s.einv_sigma * m2 / mc.kappa2_sq, 1e-14);
    const GigMoments g = gig_moments(delta_z, rho);
    s.ez[t] = clamp_scale(g.mean);
    s.einv_z[t] = clamp_scale(g.mean_inv);
  }

  // inverse-gamma update of the AL scale
  double rate = s0;
  for (int t = 0; t < T; ++t) {
    const double m2 = res[t] * res[t] + quad[t];
    rate += (m2 * s.einv_z[t] - 2.0 * mc.kappa1 * res[t] + mc.kappa1 * mc.kappa1 * s.ez[t]) /
                (2.0 * mc.kappa2_sq) +
            s.ez[t];
  }
  s.sig_shape = r0 + 1.5 * T;
  s.sig_rate = rate;
  s.einv_sigma = s.sig_shape / s.sig_rate;
}

// --- step 1: static quantile factor per indicator block ------------------

namespace detail {

// Enforce the step-1 identification conditions on a candidate factor
// path: unit slope of the reference series on the factor, and zero
// empirical q-quantile of the reference residual (the factor carries the
// quantile level). Returns the applied scale so variances can follow.
inline double anchor_factor(Vector& f, const Vector& y_ref, double q) {
  const int T = static_cast<int>(f.size());
  const Vector df = f.array() - f.mean();
  const Vector dy = y_ref.array() - y_ref.mean();
  const double slope = df.dot(dy) / std::max(df.squaredNorm(), 1e-12);
  double scale = 1.0;
  if (std::abs(slope) > 1e-8) {
    f *= slope;
    scale = slope;
  }
  std::vector<double> resid(static_cast<std::size_t>(T));
  for (int t = 0; t < T; ++t) resid[static_cast<std::size_t>(t)] = y_ref[t] - f[t];
  std::sort(resid.begin(), resid.end());
  const double pos = q * (T - 1);
  const int i0 = static_cast<int>(pos);
  const double frac = pos - i0;
  f.array() += resid[static_cast<std::size_t>(i0)] * (1.0 - frac) +
               resid[static_cast<std::size_t>(std::min(i0 + 1, T - 1))] * frac;
  return scale;
}

}  // namespace detail

struct VbqfaResult {
  Vector factor;      // T, posterior mean
  Vector factor_var;  // T, posterior variance
  Vector loadings;    // n (first entry pinned to 1)
  bool converged = true;
  int iterations = 0;
};

// Extract one static quantile factor from an n-series block: alternate
// per-series regression updates (intercept + loading, reference loading
// pinned at 1) with a Gaussian factor update under an N(0,1) prior. The
// factor starts at the first principal component of the standardized
// block, oriented so the reference series loads positively.
inline VbqfaResult vbqfa_extract(const Matrix& y_block, double q, const VbSettings& settings,
                                 double r0 = 0.01, double s0 = 0.01, double b_phi = 1e-4,
                                 bool gaussian = false) {
  const int T = static_cast<int>(y_block.rows());
  const int n = static_cast<int>(y_block.cols());
  if (T < 3 || n < 1) throw std::invalid_argument("vbqfa_extract: block too small");
  const MixtureConstants mc = mixture_constants(q);

  // standardized block -> first principal component
  Matrix Z = y_block;
  for (int j = 0; j < n; ++j) {
    const double m = Z.col(j).mean();
    Z.col(j).array() -= m;
    const double sd = std::sqrt(Z.col(j).squaredNorm() / std::max(T - 1, 1));
    if (sd > 0.0) Z.col(j) /= sd;
  }
  Vector f;
  if (n == 1) {
    f = Z.col(0);
  } else {
    Eigen::SelfAdjointEigenSolver<Matrix> eig(Z.transpose() * Z);
    const Vector v = eig.eigenvectors().col(n - 1);
    f = Z * v;
    f /= std::sqrt(f.squaredNorm() / T);
  }
  if (f.dot(Z.col(0)) < 0.0) f = -f;  // orient on the reference series

  // The reference-anchored scale/level direction is only weakly
  // identified inside the updates, so start on it exactly.
  detail::anchor_factor(f, y_block.col(0), q);
  Vector fvar = Vector::Zero(T);

  // The static factor model carries no per-series intercepts: the factor
  // itself absorbs the common quantile level, matching the reference
  // estimator. Series 0 keeps the unit loading, so it has no free
  // coefficients at all and only its mixture/scale blocks update.
  std::vector<VbRegression> series;
  std::vector<HorseshoeState> hs;
  for (int j = 0; j < n; ++j) {
    series.push_back(VbRegression::init(j == 0 ? 0 : 1, T));
    hs.push_back(HorseshoeState::init(1, b_phi));
  }

  VbqfaResult out;
  // (a) per-series coefficient/mixture/scale updates given the factor
  auto series_pass = [&](const Vector& fcur) {
    for (int j = 0; j < n; ++j) {
      auto& s = series[static_cast<std::size_t>(j)];
      const int d = j == 0 ? 0 : 1;
      Matrix X(T, d);
      Vector dep = y_block.col(j);
      if (j == 0)
        dep -= fcur;  // pinned unit loading
      else
        X.col(0) = fcur;
      Vector prior_prec(d);
      for (int k = 0; k < d; ++k)
        prior_prec[k] =
            std::max(vb_prior_precision(hs[static_cast<std::size_t>(j)], k), detail::kRidge);
      vb_regression_update(X, dep, mc, gaussian, r0, s0, prior_prec, Vector::Zero(d), s,
                           "vbqfa series " + std::to_string(j));
      if (d > 0) {
        Vector ets = s.mu.cwiseAbs2() + s.cov.diagonal();
        horseshoe_vb_update(ets, hs[static_cast<std::size_t>(j)]);
      }
    }
  };

  out.converged = false;
  for (int it = 0; it < settings.max_iters; ++it) {
    series_pass(f);

    // (b) Gaussian factor update given loadings and mixture variances
    Vector f_new(T);
    for (int t = 0; t < T; ++t) {
      // weak N(0,100) prior: the scale is identified by the pinned
      // reference loading, and a tight prior would shrink the common
      // quantile level the factor has to carry
      double prec = 0.01, b = 0.0;
      for (int j = 0; j < n; ++j) {
        const auto& s = series[static_cast<std::size_t>(j)];
        const double wt =
            gaussian ? s.einv_sigma : s.einv_sigma * s.einv_z[t] / mc.kappa2_sq;
        const double mu_l = j == 0 ? 1.0 : s.mu[0];
        const double e_l2 = j == 0 ? 1.0 : mu_l * mu_l + s.cov(0, 0);
        prec += e_l2 * wt;
        b += wt * mu_l * y_block(t, j);
        if (!gaussian) b -= mc.kappa1 * s.einv_sigma * mu_l / mc.kappa2_sq;
      }
      f_new[t] = b / prec;
      fvar[t] = 1.0 / prec;
    }
    double change = 0.0;
    for (int t = 0; t < T; ++t)
      change = std::max(change, std::abs(f_new[t] - f[t]) / (1.0 + std::abs(f[t])));
    f = f_new;
    out.iterations = it + 1;
    if (change < settings.tolerance) {
      out.converged = true;
      break;
    }
  }

  // The updates can drift slowly along the weakly identified scale/level
  // direction; restore the identification conditions exactly and refresh
  // the per-series blocks against the anchored path.
  const double scale = detail::anchor_factor(f, y_block.col(0), q);
  fvar *= scale * scale;
  series_pass(f);

  out.factor = f;
  out.factor_var = fvar;
  out.loadings = Vector::Ones(n);
  for (int j = 1; j < n; ++j) out.loadings[j] = series[static_cast<std::size_t>(j)].mu[0];
  return out;
}

// --- step 2: coordinate ascent over the full model ------------------------

struct VbResult {
  PosteriorDraws draws;            // draws[0] = means, variances[0] = variances
  std::vector<double> trace;       // max relative parameter change per sweep
  bool converged = false;          // step-2 stop rule met before max_iters
  bool step1_converged = true;     // every vbqfa block converged
  int iterations = 0;
  double quantile_order_fraction = 1.0;  // f_(q1) <= ... <= f_(qR) frequency
};

class VbEstimator {
 public:
  VbEstimator(Matrix Y_stack, Matrix G, ModelLayout lo, ModelConfig cfg)
      : Y_(std::move(Y_stack)), G_(std::move(G)), lo_(std::move(lo)), cfg_(std::move(cfg)) {
    T_ = static_cast<int>(Y_.rows());
    if (Y_.cols() != lo_.n_meas())
      throw std::invalid_argument("VbEstimator: stacked panel width mismatch");
    if (lo_.k > 0 && (G_.rows() != T_ || G_.cols() != lo_.k))
      throw std::invalid_argument("VbEstimator: globals dimension mismatch");
    for (double q : lo_.quantiles) mix_.push_back(mixture_constants(q));
    F_ = Matrix::Zero(T_, lo_.state_dim());
    Fvar_ = Matrix::Zero(T_, lo_.state_dim());
    for (int g = 0; g < lo_.k; ++g) F_.col(lo_.global_state_index(g)) = G_.col(g);
    const int t0 = lo_.own_lag ? 1 : 0;
    for (int r = 0; r < lo_.n_meas(); ++r) {
      const int d = std::max(lo_.n_free_coeffs(meas_country(r)), 1);
      meas_.push_back(VbRegression::init(d, T_ - t0));
      hs_meas_.push_back(HorseshoeState::init(d, cfg_.b_phi));
    }
    const int l = lo_.state_dim();
    for (int r = 0; r < l; ++r) {
      state_.push_back(VbRegression::init(l * lo_.p + 1 + r, T_ - lo_.p));
      hs_state_.push_back(HorseshoeState::init(l * lo_.p, cfg_.b_psi));
    }
  }

  int meas_quantile(int r) const { return r / (lo_.m * lo_.n); }
  int meas_indicator(int r) const { return (r % (lo_.m * lo_.n)) / lo_.n; }
  int meas_country(int r) const { return r % lo_.n; }

  Matrix& factors() { return F_; }
  Matrix& factor_vars() { return Fvar_; }
  const std::vector<VbRegression>& measurement() const { return meas_; }
  const std::vector<VbRegression>& state_rows() const { return state_; }

  // step 1: fill the factor columns via per-block static extraction
  bool extract_factors() {
    bool ok = true;
    for (int q = 0; q < lo_.R; ++q)
      for (int i = 0; i < lo_.m; ++i) {
        Matrix block(T_, lo_.n);
        for (int j = 0; j < lo_.n; ++j) block.col(j) = Y_.col(lo_.meas_row(q, i, j));
        const VbqfaResult r = vbqfa_extract(block, lo_.quantiles[static_cast<std::size_t>(q)],
                                            cfg_.vb, cfg_.r0, cfg_.s0, cfg_.b_phi, lo_.gaussian);
        F_.col(lo_.factor_index(q, i)) = r.factor;
        Fvar_.col(lo_.factor_index(q, i)) = r.factor_var;
        ok = ok && r.converged;
      }
    return ok;
  }

  // one CAVI pass over every measurement equation; returns the max
  // relative change of the coefficient means
  double update_measurement() {
    const int t0 = lo_.own_lag ? 1 : 0;
    const int Ts = T_ - t0;
    double change = 0.0;
    for (int r = 0; r < lo_.n_meas(); ++r) {
      const int q = meas_quantile(r);
      const int j = meas_country(r);
      const int d = lo_.n_free_coeffs(j);
      if (d == 0) continue;
      auto& s = meas_[static_cast<std::size_t>(r)];
      Matrix X(Ts, d);
      Vector dep(Ts);
      for (int t = t0; t < T_; ++t) {
        double y = Y_(t, r);
        if (lo_.has_factors && lo_.is_reference(j))
          y -= F_(t, lo_.factor_index(q, meas_indicator(r)));
        dep[t - t0] = y;
        int c = 0;
        if (lo_.intercepts) X(t - t0, c++) = 1.0;
        if (lo_.own_lag) X(t - t0, c++) = Y_(t - 1, r);
        if (lo_.has_factors && !lo_.is_reference(j))
          X(t - t0, c++) = F_(t, lo_.factor_index(q, meas_indicator(r)));
        for (int g = 0; g < lo_.k; ++g) X(t - t0, c++) = G_(t, g);
      }
      Vector prior_prec(d);
      auto& hs = hs_meas_[static_cast<std::size_t>(r)];
      for (int k = 0; k < d; ++k)
        prior_prec[k] = std::max(vb_prior_precision(hs, k), detail::kRidge);
      const Vector old = s.mu;
      vb_regression_update(X, dep, mix_[static_cast<std::size_t>(q)], lo_.gaussian, cfg_.r0,
                           cfg_.s0, prior_prec, Vector::Zero(d), s,
                           "measurement (i=" + std::to_string(meas_indicator(r)) +
                               ", j=" + std::to_string(j) + ", q=" + std::to_string(q) + ")");
      horseshoe_vb_update(s.mu.cwiseAbs2() + s.cov.diagonal(), hs);
      for (int k = 0; k < d; ++k)
        change = std::max(change, std::abs(s.mu[k] - old[k]) / (1.0 + std::abs(old[k])));
    }
    return change;
  }

  // one CAVI pass over the state VAR rows (triangular recursion); returns
  // the max relative change of the coefficient means
  double update_state() {
    const int l = lo_.state_dim();
    if (l == 0 || !lo_.has_factors) return 0.0;
    const int p = lo_.p;
    const int Ts = T_ - p;
    if (Ts < l * p + l + 2) throw std::runtime_error("update_state: sample too short");
    Matrix lags(Ts, l * p + 1);
    for (int t = p; t < T_; ++t) {
      for (int li = 0; li < p; ++li) lags.block(t - p, li * l, 1, l) = F_.row(t - 1 - li);
      lags(t - p, l * p) = 1.0;
    }
    Matrix eps(Ts, l);
    double change = 0.0;
    for (int r = 0; r < l; ++r) {
      const int d = l * p + 1 + r;
      Matrix X(Ts, d);
      X.leftCols(l * p + 1) = lags;
      if (r > 0) X.rightCols(r) = eps.leftCols(r);
      const Vector dep = F_.col(r).tail(Ts);
      auto& s = state_[static_cast<std::size_t>(r)];
      auto& hs = hs_state_[static_cast<std::size_t>(r)];
      Vector prior_prec(d), prior_mean = Vector::Zero(d);
      for (int k = 0; k < l * p; ++k)
        prior_prec[k] = std::max(vb_prior_precision(hs, k), detail::kRidge);
      prior_prec[l * p] = 1.0 / cfg_.intercept_prior_var;
      for (int k = 0; k < r; ++k) {
        prior_prec[l * p + 1 + k] = 1.0 / cfg_.sigma_a;
        prior_mean[l * p + 1 + k] = cfg_.mu_a;
      }

      // Gaussian (psi_r, v_r, a_r) update with weight E[1/omega_r]
      Matrix P = s.einv_sigma * (X.transpose() * X);
      P.diagonal() += prior_prec;
      Vector b = s.einv_sigma * (X.transpose() * dep) + prior_prec.cwiseProduct(prior_mean);
      const Vector old = s.mu;
      s.cov = detail::psd_inverse(P, "state row " + std::to_string(r));
      s.mu = s.cov * b;
      horseshoe_vb_update(s.mu.head(l * p).cwiseAbs2() + s.cov.diagonal().head(l * p), hs);

      // inverse-gamma update of omega_r with the quadratic correction
      const Vector res = dep - X * s.mu;
      double m = res.squaredNorm();
      for (int t = 0; t < Ts; ++t) m += X.row(t) * s.cov * X.row(t).transpose();
      s.sig_shape = cfg_.r_h + 0.5 * Ts;
      s.sig_rate = cfg_.s_h + 0.5 * m;
      s.einv_sigma = s.sig_shape / s.sig_rate;

      eps.col(r) = res;
      for (int k = 0; k < d; ++k)
        change = std::max(change, std::abs(s.mu[k] - old[k]) / (1.0 + std::abs(old[k])));
    }
    return change;
  }

  VbResult run() {
    VbResult out;
    out.step1_converged = !lo_.has_factors || extract_factors();
    for (int it = 0; it < cfg_.vb.max_iters; ++it) {
      const double c1 = update_measurement();
      const double c2 = update_state();
      const double metric = std::max(c1, c2);
      out.trace.push_back(metric);
      out.iterations = it + 1;
      if (metric < cfg_.vb.tolerance) {
        out.converged = true;
        break;
      }
    }
    fill_output(out);
    return out;
  }

 private:
  void fill_output(VbResult& out) {
    const int l = lo_.state_dim();
    ParameterDraw mean, var;
    mean.meas_coeffs = Matrix::Zero(lo_.n_meas(), lo_.coeff_width());
    var.meas_coeffs = Matrix::Zero(lo_.n_meas(), lo_.coeff_width());
    mean.sigma = Vector::Ones(lo_.n_meas());
    var.sigma = Vector::Zero(lo_.n_meas());
    for (int r = 0; r < lo_.n_meas(); ++r) {
      const int j = meas_country(r);
      const auto& s = meas_[static_cast<std::size_t>(r)];
      int c = 0;
      if (lo_.intercepts) {
        mean.meas_coeffs(r, lo_.c_col()) = s.mu[c];
        var.meas_coeffs(r, lo_.c_col()) = s.cov(c, c);
        ++c;
      }
      if (lo_.own_lag) {
        mean.meas_coeffs(r, lo_.beta_col()) = s.mu[c];
        var.meas_coeffs(r, lo_.beta_col()) = s.cov(c, c);
        ++c;
      }
      if (lo_.has_factors) {
        if (lo_.is_reference(j)) {
          mean.meas_coeffs(r, lo_.lambda_col()) = 1.0;
        } else {
          mean.meas_coeffs(r, lo_.lambda_col()) = s.mu[c];
          var.meas_coeffs(r, lo_.lambda_col()) = s.cov(c, c);
          ++c;
        }
      }
      for (int g = 0; g < lo_.k; ++g) {
        mean.meas_coeffs(r, lo_.gamma_col(g)) = s.mu[c];
        var.meas_coeffs(r, lo_.gamma_col(g)) = s.cov(c, c);
        ++c;
      }
      mean.sigma[r] = s.e_sigma();
      var.sigma[r] = s.var_sigma();
    }

    mean.psi = Matrix::Zero(l, l * lo_.p);
    var.psi = Matrix::Zero(l, l * lo_.p);
    mean.v = Vector::Zero(l);
    var.v = Vector::Zero(l);
    mean.A = Matrix::Identity(l, l);
    var.A = Matrix::Zero(l, l);
    mean.h = Matrix::Zero(T_, l);
    var.h = Matrix::Zero(T_, l);
    for (int r = 0; r < l; ++r) {
      const auto& s = state_[static_cast<std::size_t>(r)];
      if (s.mu.size() == 0) continue;
      for (int k = 0; k < l * lo_.p; ++k) {
        mean.psi(r, k) = s.mu[k];
        var.psi(r, k) = s.cov(k, k);
      }
      mean.v[r] = s.mu[l * lo_.p];
      var.v[r] = s.cov(l * lo_.p, l * lo_.p);
      for (int k = 0; k < r; ++k) {
        mean.A(r, k) = s.mu[l * lo_.p + 1 + k];
        var.A(r, k) = s.cov(l * lo_.p + 1 + k, l * lo_.p + 1 + k);
      }
      const double e_om = s.e_sigma();
      mean.h.col(r).setConstant(std::log(clamp_scale(e_om)));
      var.h.col(r).setConstant(s.var_sigma() / (e_om * e_om));  // delta method
    }
    mean.F = F_;
    var.F = Fvar_;

    out.draws.draws = {std::move(mean)};
    out.draws.variances = {std::move(var)};
    out.draws.layout = lo_;
    out.draws.config = cfg_;
    out.draws.method = "vb";
    out.draws.T = T_;

    // ordering diagnostic: how often the quantile factors are monotone
    if (lo_.has_factors && lo_.R > 1) {
      int ok = 0, total = 0;
      for (int i = 0; i < lo_.m; ++i)
        for (int t = 0; t < T_; ++t) {
          bool mono = true;
          for (int q = 1; q < lo_.R; ++q)
            if (F_(t, lo_.factor_index(q, i)) < F_(t, lo_.factor_index(q - 1, i))) mono = false;
          ok += mono ? 1 : 0;
          ++total;
        }
      out.quantile_order_fraction = total > 0 ? static_cast<double>(ok) / total : 1.0;
    }
  }

  Matrix Y_;  // T x n_meas stacked observations
  Matrix G_;  // T x k globals
  ModelLayout lo_;
  ModelConfig cfg_;
  std::vector<MixtureConstants> mix_;
  Matrix F_, Fvar_;  // fixed factor paths (step 1) and their variances
  std::vector<VbRegression> meas_;
  std::vector<HorseshoeState> hs_meas_;
  std::vector<VbRegression> state_;
  std::vector<HorseshoeState> hs_state_;
  int T_ = 0;
};

inline VbResult run_vb(const PanelData& panel, const ModelConfig& cfg) {
  const ModelLayout lo = ModelLayout::from(panel, cfg);
  Matrix G = panel.globals;
  if (lo.k == 0) G = Matrix(panel.T(), 0);
  VbEstimator est(stack_panel(panel, lo), G, lo, cfg);
  VbResult res = est.run();
  res.draws.indicator_labels = panel.indicator_labels;
  res.draws.country_labels = panel.country_labels;
  res.draws.global_labels = panel.global_labels;
  res.draws.time_index = panel.time_index;
  res.draws.seed = cfg.vb.seed;
  return res;
}

}  // namespace qfavar
