#pragma once

// Linear-Gaussian state-space utilities: companion form, Kalman filter
// with sequential scalar observation updates (diagonal noise, exact
// zero-variance rows), Carter-Kohn simulation smoother, stability checks.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qfavar/rng.hpp"
#include "qfavar/shrinkage.hpp"  // Vector/Matrix aliases

namespace qfavar {

struct CompanionSystem {
  Matrix T;         // (l*p) x (l*p) companion matrix
  Vector intercept; // stacked intercept, nonzero only in top block
  int l = 0;        // dimension of the current-period block
  int p = 1;
};

inline CompanionSystem build_companion(const Vector& v, const std::vector<Matrix>& phis) {
  if (phis.empty()) throw std::invalid_argument("build_companion: need at least one lag matrix");
  const int l = static_cast<int>(phis[0].rows());
  const int p = static_cast<int>(phis.size());
  for (const auto& phi : phis)
    if (phi.rows() != l || phi.cols() != l)
      throw std::invalid_argument("build_companion: lag matrices must be square and equal-sized");
  if (v.size() != l) throw std::invalid_argument("build_companion: intercept dimension mismatch");
  CompanionSystem c;
  c.l = l;
  c.p = p;
  c.T = Matrix::Zero(l * p, l * p);
  for (int i = 0; i < p; ++i) c.T.block(0, i * l, l, l) = phis[i];
  if (p > 1) c.T.block(l, 0, l * (p - 1), l * (p - 1)).setIdentity();
  c.intercept = Vector::Zero(l * p);
  c.intercept.head(l) = v;
  return c;
}

inline double spectral_radius(const Matrix& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius: matrix must be square");
  if (m.rows() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(m, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Observation equation y_t = c + H s_t(1:l) + e_t, e_t ~ N(0, diag(R_t)),
// state s_t = v + T s_{t-1} + [eps_t', 0']', eps_t ~ N(0, Omega_t).
// Rows of R may be exactly zero (noiseless identity rows).
struct StateSpaceSystem {
  Matrix loadings;       // n_obs x l observation matrix (current block only)
  Vector obs_intercept;  // n_obs (empty -> zero)
  Matrix obs_noise_var;  // T x n_obs diagonal noise variances
  CompanionSystem companion;
  Matrix trans_cov;                  // l x l Omega (constant case)
  std::vector<Matrix> trans_cov_path;  // optional, length T; overrides trans_cov
  double init_state_var = 10.0;      // diffuse N(0, init_state_var * I)

  const Matrix& cov_at(int t) const {
    return trans_cov_path.empty() ? trans_cov : trans_cov_path[static_cast<std::size_t>(t)];
  }
};

struct FilterResult {
  std::vector<Vector> filt_mean;  // per t, companion-space
  std::vector<Matrix> filt_cov;
  double loglik = 0.0;
};

namespace detail {

inline void predict_cov(const CompanionSystem& c, const Matrix& omega, const Matrix& P, Matrix& out) {
  out.noalias() = c.T * P * c.T.transpose();
  out.topLeftCorner(c.l, c.l) += omega;
  out = 0.5 * (out + out.transpose());  // symmetrize against drift
}

}  // namespace detail

inline FilterResult kalman_filter(const StateSpaceSystem& sys, const Matrix& observations) {
  const int T = static_cast<int>(observations.rows());
  const int n_obs = static_cast<int>(observations.cols());
  const int l = sys.companion.l;
  const int s = static_cast<int>(sys.companion.T.rows());
  if (sys.loadings.rows() != n_obs || sys.loadings.cols() != l)
    throw std::invalid_argument("kalman_filter: loadings dimension mismatch");
  if (sys.obs_noise_var.rows() != T || sys.obs_noise_var.cols() != n_obs)
    throw std::invalid_argument("kalman_filter: obs_noise_var dimension mismatch");

  FilterResult res;
  res.filt_mean.resize(T);
  res.filt_cov.resize(T);

  Vector m = Vector::Zero(s);
  Matrix P = Matrix::Identity(s, s) * sys.init_state_var;
  Vector h = Vector::Zero(s);
  Vector K(s);
  Matrix Ppred(s, s);
  const double log2pi = std::log(2.0 * M_PI);

  for (int t = 0; t < T; ++t) {
    if (t > 0) {
      m = sys.companion.intercept + sys.companion.T * m;
      detail::predict_cov(sys.companion, sys.cov_at(t), P, Ppred);
      P = Ppred;
    }
    // Sequential scalar updates: valid because the noise is diagonal.
    for (int i = 0; i < n_obs; ++i) {
      h.setZero();
      h.head(l) = sys.loadings.row(i).transpose();
      const double r = sys.obs_noise_var(t, i);
      const Vector Ph = P * h;
      const double f = h.dot(Ph) + r;
      const double c0 = (sys.obs_intercept.size() > 0) ? sys.obs_intercept[i] : 0.0;
      const double v = observations(t, i) - c0 - h.dot(m);
      if (f <= 0.0) {
        if (std::abs(v) > 1e-8)
          throw std::runtime_error("kalman_filter: degenerate innovation at t=" + std::to_string(t));
        continue;  // row already determined by the state, nothing to learn
      }
      res.loglik += -0.5 * (log2pi + std::log(f) + v * v / f);
      K = Ph / f;
      m += K * v;
      P -= K * Ph.transpose();
      P = 0.5 * (P + P.transpose());
    }
    if (!P.allFinite())
      throw std::runtime_error("kalman_filter: non-finite covariance at t=" + std::to_string(t));
    res.filt_mean[t] = m;
    res.filt_cov[t] = P;
  }
  return res;
}

namespace detail {

// Draw from N(mean, cov) where cov may be positive semidefinite.
inline Vector mvn_draw_psd(const Vector& mean, const Matrix& cov, Rng& rng) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const Vector evals = es.eigenvalues().cwiseMax(0.0);
  Vector z(mean.size());
  for (int i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return mean + es.eigenvectors() * (evals.cwiseSqrt().asDiagonal() * z);
}

}  // namespace detail

// Carter-Kohn: forward filter, then sample the state path backwards,
// conditioning each step on the top-l block of the next state only
// (the lagged blocks of the companion state carry no extra shock).
// Returns a T x s matrix of companion-space states.
inline Matrix carter_kohn_draw(const StateSpaceSystem& sys, const Matrix& observations, Rng& rng) {
  const FilterResult fr = kalman_filter(sys, observations);
  const int T = static_cast<int>(observations.rows());
  const int l = sys.companion.l;
  const int s = static_cast<int>(sys.companion.T.rows());
  const Matrix F1 = sys.companion.T.topRows(l);
  const Vector v1 = sys.companion.intercept.head(l);

  Matrix path(T, s);
  path.row(T - 1) = detail::mvn_draw_psd(fr.filt_mean[T - 1], fr.filt_cov[T - 1], rng).transpose();
  for (int t = T - 2; t >= 0; --t) {
    const Matrix& P = fr.filt_cov[t];
    const Vector& m = fr.filt_mean[t];
    Matrix S = F1 * P * F1.transpose() + sys.cov_at(t + 1);
    S = 0.5 * (S + S.transpose());
    Eigen::LDLT<Matrix> ldlt(S);
    if (ldlt.info() != Eigen::Success)
      throw std::runtime_error("carter_kohn_draw: singular step covariance at t=" + std::to_string(t));
    const Vector next_top = path.row(t + 1).head(l).transpose();
    const Matrix PF = P * F1.transpose();
    const Vector mean = m + PF * ldlt.solve(next_top - v1 - F1 * m);
    Matrix cov = P - PF * ldlt.solve(PF.transpose());
    cov = 0.5 * (cov + cov.transpose());
    path.row(t) = detail::mvn_draw_psd(mean, cov, rng).transpose();
  }
  return path;
}

}  // namespace qfavar
