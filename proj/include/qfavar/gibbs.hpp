#pragma once

// Gibbs sampler for the quantile factor-augmented VAR. Latent blocks:
// per-equation asymmetric-Laplace mixture variables z, the stacked factor
// path (Carter-Kohn), measurement coefficients under horseshoe priors, the
// state VAR with triangular contemporaneous matrix A, and either constant
// innovation variances or stochastic volatility via the 7-component
// log-chi-square mixture.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfavar/config.hpp"
#include "qfavar/distributions.hpp"
#include "qfavar/draws.hpp"
#include "qfavar/layout.hpp"
#include "qfavar/panel.hpp"
#include "qfavar/rng.hpp"
#include "qfavar/shrinkage.hpp"
#include "qfavar/state_space.hpp"

namespace qfavar {

// Tile the panel once per quantile block: column meas_row(q,i,j) holds the
// observed series (i,j) for every q.
inline Matrix stack_panel(const PanelData& panel, const ModelLayout& lo) {
  Matrix Y(panel.T(), lo.n_meas());
  for (int q = 0; q < lo.R; ++q)
    for (int i = 0; i < lo.m; ++i)
      for (int j = 0; j < lo.n; ++j)
        Y.col(lo.meas_row(q, i, j)) = panel.values.col(lo.series_col(i, j));
  return Y;
}

// Flip every factor column whose correlation with the reference is
// negative. Pure version used for the factor path; the sampler mirrors the
// flips onto loadings and VAR blocks.
inline std::vector<int> sign_flip_pattern(const Matrix& F, const Matrix& F_ref, int n_factors) {
  if (F.rows() != F_ref.rows() || F_ref.cols() < n_factors)
    throw std::invalid_argument("sign_flip_pattern: dimension mismatch");
  std::vector<int> flips(static_cast<std::size_t>(n_factors), 1);
  for (int c = 0; c < n_factors; ++c) {
    const Vector a = F.col(c).array() - F.col(c).mean();
    const Vector b = F_ref.col(c).array() - F_ref.col(c).mean();
    const double denom = std::sqrt(a.squaredNorm() * b.squaredNorm());
    if (denom > 0.0 && a.dot(b) < 0.0) flips[static_cast<std::size_t>(c)] = -1;
  }
  return flips;
}

inline Matrix enforce_sign_identification(Matrix F, const Matrix& F_ref) {
  const auto flips = sign_flip_pattern(F, F_ref, static_cast<int>(F.cols()));
  for (int c = 0; c < F.cols(); ++c)
    if (flips[static_cast<std::size_t>(c)] < 0) F.col(c) = -F.col(c);
  return F;
}

// Effective sample size from the initial positive sequence of
// autocorrelations.
inline double effective_sample_size(const Vector& x) {
  const int n = static_cast<int>(x.size());
  if (n < 3) return static_cast<double>(n);
  const Vector d = x.array() - x.mean();
  const double c0 = d.squaredNorm() / n;
  if (c0 <= 0.0) return static_cast<double>(n);
  double sum = 0.0;
  for (int lag = 1; lag + 1 < n; lag += 2) {
    double r1 = 0.0, r2 = 0.0;
    for (int t = lag; t < n; ++t) r1 += d[t] * d[t - lag];
    for (int t = lag + 1; t < n; ++t) r2 += d[t] * d[t - lag - 1];
    r1 /= n * c0;
    r2 /= n * c0;
    if (r1 + r2 <= 0.0) break;
    sum += r1 + r2;
  }
  return static_cast<double>(n) / (1.0 + 2.0 * sum);
}

namespace detail {

// theta ~ N(Sigma (X'Wy + P0 mu0), Sigma), Sigma = (X'WX + P0)^{-1},
// W = diag(weights), P0 = diag(prior_prec).
inline Vector bayes_regression_draw(const Matrix& X, const Vector& y, const Vector& weights,
                                    const Vector& prior_prec, const Vector& prior_mean, Rng& rng) {
  const int d = static_cast<int>(X.cols());
  Matrix P = X.transpose() * weights.asDiagonal() * X;
  P.diagonal() += prior_prec;
  Vector b = X.transpose() * (weights.cwiseProduct(y));
  b += prior_prec.cwiseProduct(prior_mean);
  Eigen::LLT<Matrix> llt(P);
  if (llt.info() != Eigen::Success) {
    P.diagonal().array() += 1e-10 * (1.0 + P.diagonal().maxCoeff());
    llt.compute(P);
    if (llt.info() != Eigen::Success)
      throw std::runtime_error("bayes_regression_draw: precision not positive definite");
  }
  const Vector mean = llt.solve(b);
  Vector zdraw(d);
  for (int i = 0; i < d; ++i) zdraw[i] = rng.normal();
  return mean + llt.matrixU().solve(zdraw);
}

// Kim-Shephard-Chib 7-component mixture for log(eps^2) = h + log chi^2_1.
struct KscComponent {
  double prob, mean, var;
};
inline const std::array<KscComponent, 7>& ksc_mixture() {
  static const std::array<KscComponent, 7> mix = {{{0.00730, -10.12999, 5.79596},
                                                   {0.10556, -3.97281, 2.61369},
                                                   {0.00002, -8.56686, 5.17950},
                                                   {0.04395, 2.77786, 0.16735},
                                                   {0.34001, 0.61942, 0.64009},
                                                   {0.24566, 1.79518, 0.34023},
                                                   {0.25750, -1.08819, 1.26261}}};
  return mix;
}
inline constexpr double kKscOffset = 1.2704;  // so that h enters with zero-mean error

}  // namespace detail

struct GibbsState {
  Matrix F;            // T x l (globals fixed at the data)
  Matrix meas_coeffs;  // n_meas x coeff_width
  Vector sigma;        // n_meas
  Matrix z;            // T x n_meas
  std::vector<HorseshoeState> hs_meas;
  Matrix psi;  // l x (l*p)
  Vector v;    // l
  Matrix A;    // l x l unit lower triangular
  Matrix h;    // T x l log innovation variances
  Vector sv_var;  // l, random-walk innovation variances (sv only)
  std::vector<HorseshoeState> hs_state;
};

struct GibbsDiagnostics {
  std::map<std::string, double> ess;
};

struct GibbsResult {
  PosteriorDraws draws;
  GibbsDiagnostics diag;
};

class GibbsSampler {
 public:
  GibbsSampler(Matrix Y_stack, Matrix G, ModelLayout lo, ModelConfig cfg)
      : Y_(std::move(Y_stack)), G_(std::move(G)), lo_(std::move(lo)), cfg_(std::move(cfg)) {
    T_ = static_cast<int>(Y_.rows());
    if (Y_.cols() != lo_.n_meas()) throw std::invalid_argument("GibbsSampler: stacked panel width mismatch");
    if (lo_.k > 0 && (G_.rows() != T_ || G_.cols() != lo_.k))
      throw std::invalid_argument("GibbsSampler: globals dimension mismatch");
    mix_.reserve(static_cast<std::size_t>(lo_.R));
    for (double q : lo_.quantiles) mix_.push_back(mixture_constants(q));
    init_default();
  }

  const GibbsState& state() const { return st_; }
  GibbsState& state() { return st_; }
  const Matrix& data() const { return Y_; }
  const Matrix& globals() const { return G_; }
  const ModelLayout& layout() const { return lo_; }
  int T() const { return T_; }

  void set_reference(Matrix F_ref) { F_ref_ = std::move(F_ref); }

  void init_default() {
    const int l = lo_.state_dim();
    st_.F = Matrix::Zero(T_, l);
    if (lo_.has_factors) {
      for (int q = 0; q < lo_.R; ++q)
        for (int i = 0; i < lo_.m; ++i) {
          Vector mean = Vector::Zero(T_);
          for (int j = 0; j < lo_.n; ++j) mean += Y_.col(lo_.meas_row(q, i, j));
          st_.F.col(lo_.factor_index(q, i)) = mean / lo_.n;
        }
      for (int g = 0; g < lo_.k; ++g) st_.F.col(lo_.global_state_index(g)) = G_.col(g);
    }
    st_.meas_coeffs = Matrix::Zero(lo_.n_meas(), lo_.coeff_width());
    for (int q = 0; q < lo_.R; ++q)
      for (int i = 0; i < lo_.m; ++i)
        for (int j = 0; j < lo_.n; ++j)
          if (lo_.has_factors)
            st_.meas_coeffs(lo_.meas_row(q, i, j), lo_.lambda_col()) = 1.0;
    st_.sigma = Vector::Ones(lo_.n_meas());
    st_.z = Matrix::Ones(T_, lo_.n_meas());
    st_.hs_meas.clear();
    for (int r = 0; r < lo_.n_meas(); ++r) {
      const int d = lo_.n_free_coeffs(meas_country(r));
      st_.hs_meas.push_back(HorseshoeState::init(std::max(d, 1), cfg_.b_phi));
    }
    st_.psi = Matrix::Zero(l, l * lo_.p);
    st_.v = Vector::Zero(l);
    st_.A = Matrix::Identity(l, l);
    st_.h = Matrix::Zero(T_, l);
    st_.sv_var = Vector::Constant(l, 0.01);
    st_.hs_state.clear();
    for (int r = 0; r < l; ++r) st_.hs_state.push_back(HorseshoeState::init(l * lo_.p, cfg_.b_psi));
  }

  // Draw every parameter block from its prior; used by the simulator-based
  // self-checks of the sampler.
  void init_from_prior(Rng& rng) {
    init_default();
    const int l = lo_.state_dim();
    auto draw_hs = [&](HorseshoeState& hs) {
      hs.global_aux = clamp_scale(rng.inverse_gamma(0.5, 1.0));
      hs.global_scale = clamp_scale(rng.inverse_gamma(0.5, 1.0 / hs.global_aux));
      for (int k = 0; k < hs.size(); ++k) {
        hs.local_aux[k] = clamp_scale(rng.inverse_gamma(0.5, 1.0));
        hs.local_scales[k] = clamp_scale(rng.inverse_gamma(0.5, 1.0 / hs.local_aux[k]));
      }
    };
    for (int r = 0; r < lo_.n_meas(); ++r) {
      auto& hs = st_.hs_meas[static_cast<std::size_t>(r)];
      draw_hs(hs);
      const int d = lo_.n_free_coeffs(meas_country(r));
      Vector phi(d);
      for (int k = 0; k < d; ++k) phi[k] = rng.normal(0.0, std::sqrt(hs.prior_variance(k)));
      set_free_coeffs(r, phi);
      st_.sigma[r] = rng.inverse_gamma(cfg_.r0, cfg_.s0);
      for (int t = 0; t < T_; ++t)
        st_.z(t, r) = std::min(std::max(rng.exponential(st_.sigma[r]), kScaleFloor), kScaleCap);
    }
    for (int r = 0; r < l; ++r) {
      auto& hs = st_.hs_state[static_cast<std::size_t>(r)];
      draw_hs(hs);
      for (int k = 0; k < l * lo_.p; ++k)
        st_.psi(r, k) = rng.normal(0.0, std::sqrt(hs.prior_variance(k)));
      st_.v[r] = rng.normal(0.0, std::sqrt(cfg_.intercept_prior_var));
      for (int c = 0; c < r; ++c) st_.A(r, c) = rng.normal(cfg_.mu_a, std::sqrt(cfg_.sigma_a));
      if (cfg_.sv) {
        st_.sv_var[r] = rng.inverse_gamma(cfg_.r_omega, cfg_.s_omega);
        double hcur = rng.normal(0.0, std::sqrt(10.0));
        for (int t = 0; t < T_; ++t) {
          if (t > lo_.p) hcur += rng.normal(0.0, std::sqrt(st_.sv_var[r]));
          st_.h(t, r) = hcur;
        }
      } else {
        st_.h.col(r).setConstant(std::log(rng.inverse_gamma(cfg_.r_h, cfg_.s_h)));
      }
    }
  }

  // Replace the data and latent states with a forward simulation from the
  // current parameters: state path from the VAR (diffuse initial state),
  // mixture variables from their exponential prior, observations from the
  // conditional Gaussian.
  void simulate_data(Rng& rng) {
    const int l = lo_.state_dim();
    if (lo_.has_factors) {
      const CompanionSystem comp = companion();
      const int s = static_cast<int>(comp.T.rows());
      Vector state(s);
      for (int i = 0; i < s; ++i) state[i] = rng.normal(0.0, std::sqrt(cfg_.init_state_var));
      for (int t = 0; t < T_; ++t) {
        if (t > 0) {
          const Matrix om = omega_at(t);
          Eigen::LLT<Matrix> llt(om + 1e-12 * Matrix::Identity(l, l));
          Vector eps(l);
          for (int i = 0; i < l; ++i) eps[i] = rng.normal();
          Vector shock = Vector::Zero(s);
          shock.head(l) = llt.matrixL() * eps;
          state = comp.intercept + comp.T * state + shock;
        }
        st_.F.row(t) = state.head(l).transpose();
      }
      for (int g = 0; g < lo_.k; ++g) G_.col(g) = st_.F.col(lo_.global_state_index(g));
    }
    for (int r = 0; r < lo_.n_meas(); ++r) {
      const auto& mc = mix_[static_cast<std::size_t>(meas_quantile(r))];
      for (int t = 0; t < T_; ++t) {
        if (lo_.gaussian) {
          Y_(t, r) = rng.normal(meas_fitted(r, t), std::sqrt(st_.sigma[r]));
          continue;
        }
        const double z = std::min(std::max(rng.exponential(st_.sigma[r]), kScaleFloor), kScaleCap);
        st_.z(t, r) = z;
        const double mean = meas_fitted(r, t) + mc.kappa1 * z;
        Y_(t, r) = rng.normal(mean, std::sqrt(mc.kappa2_sq * st_.sigma[r] * z));
      }
    }
  }

  void sweep(Rng& rng) {
    step_measurement(rng);
    if (lo_.has_factors) {
      step_factors(rng);
      step_state_var(rng);
      step_sign();
    }
  }

  GibbsResult run(Rng& rng) {
    GibbsResult out;
    const int kept = (cfg_.mcmc.iterations - cfg_.mcmc.burn_in + cfg_.mcmc.thin - 1) / cfg_.mcmc.thin;
    const int n_trace = (lo_.has_factors ? lo_.n_factors() : 0) + 1;
    Matrix trace_vals(std::max(kept, 1), n_trace);
    int stored = 0;
    for (int it = 0; it < cfg_.mcmc.iterations; ++it) {
      sweep(rng);
      if (it >= cfg_.mcmc.burn_in && (it - cfg_.mcmc.burn_in) % cfg_.mcmc.thin == 0) {
        ParameterDraw d;
        d.meas_coeffs = st_.meas_coeffs;
        d.sigma = st_.sigma;
        d.psi = st_.psi;
        d.v = st_.v;
        d.A = st_.A;
        d.h = st_.h;
        d.F = st_.F;
        out.draws.draws.push_back(std::move(d));
        if (stored < kept) {
          for (int c = 0; c < n_trace - 1; ++c) trace_vals(stored, c) = st_.F.col(c).mean();
          trace_vals(stored, n_trace - 1) = st_.sigma.mean();
          ++stored;
        }
      }
    }
    out.draws.layout = lo_;
    out.draws.config = cfg_;
    out.draws.method = "mcmc";
    out.draws.T = T_;
    if (stored > 2) {
      for (int c = 0; c < n_trace - 1; ++c)
        out.diag.ess["factor_" + std::to_string(c)] =
            effective_sample_size(trace_vals.col(c).head(stored));
      out.diag.ess["sigma_mean"] = effective_sample_size(trace_vals.col(n_trace - 1).head(stored));
    }
    return out;
  }

  // --- individual blocks (public so targeted tests can drive them) ---

  void step_measurement(Rng& rng) {
    const int t0 = lo_.own_lag ? 1 : 0;
    const int Ts = T_ - t0;
    for (int r = 0; r < lo_.n_meas(); ++r) {
      const int q = meas_quantile(r);
      const int j = meas_country(r);
      const auto& mc = mix_[static_cast<std::size_t>(q)];
      const int d = lo_.n_free_coeffs(j);
      auto& hs = st_.hs_meas[static_cast<std::size_t>(r)];

      // dependent variable net of the pinned reference loading
      Vector dep(Ts);
      Matrix X(Ts, std::max(d, 1));
      for (int t = t0; t < T_; ++t) {
        double y = Y_(t, r);
        if (lo_.has_factors && lo_.is_reference(j)) y -= st_.F(t, lo_.factor_index(q, meas_indicator(r)));
        dep[t - t0] = y;
        int c = 0;
        if (lo_.intercepts) X(t - t0, c++) = 1.0;
        if (lo_.own_lag) X(t - t0, c++) = Y_(t - 1, r);
        if (lo_.has_factors && !lo_.is_reference(j))
          X(t - t0, c++) = st_.F(t, lo_.factor_index(q, meas_indicator(r)));
        for (int g = 0; g < lo_.k; ++g) X(t - t0, c++) = G_(t, g);
      }

      if (d > 0) {
        Vector weights(Ts), ytil(Ts);
        for (int t = t0; t < T_; ++t) {
          const double nu = lo_.gaussian ? st_.sigma[r]
                                         : st_.sigma[r] * mc.kappa2_sq * st_.z(t, r);
          weights[t - t0] = 1.0 / nu;
          ytil[t - t0] = dep[t - t0] - (lo_.gaussian ? 0.0 : mc.kappa1 * st_.z(t, r));
        }
        Vector prior_prec(d);
        for (int k = 0; k < d; ++k) prior_prec[k] = 1.0 / hs.prior_variance(k);
        const Vector phi = detail::bayes_regression_draw(X.leftCols(d), ytil, weights, prior_prec,
                                                         Vector::Zero(d), rng);
        set_free_coeffs(r, phi);
        horseshoe_gibbs_update(phi, hs, rng);
      }

      // residuals under the new coefficients
      Vector res(Ts);
      for (int t = t0; t < T_; ++t) res[t - t0] = Y_(t, r) - meas_fitted(r, t);

      if (lo_.gaussian) {  // sigma is the Gaussian error variance
        st_.sigma[r] = rng.inverse_gamma(cfg_.r0 + 0.5 * Ts, cfg_.s0 + 0.5 * res.squaredNorm());
        continue;
      }

      const double delta = (mc.kappa1 * mc.kappa1 + 2.0 * mc.kappa2_sq) / (st_.sigma[r] * mc.kappa2_sq);
      for (int t = t0; t < T_; ++t) {
        const double rho =
            std::max(res[t - t0] * res[t - t0] / (st_.sigma[r] * mc.kappa2_sq), 1e-14);
        st_.z(t, r) = std::min(std::max(gig_draw(delta, rho, rng), kScaleFloor), kScaleCap);
      }

      double rate = cfg_.s0;
      for (int t = t0; t < T_; ++t) {
        const double e = res[t - t0] - mc.kappa1 * st_.z(t, r);
        rate += e * e / (2.0 * st_.z(t, r) * mc.kappa2_sq) + st_.z(t, r);
      }
      st_.sigma[r] = rng.inverse_gamma(cfg_.r0 + 1.5 * Ts, rate);
    }
  }

  void step_factors(Rng& rng) {
    const int l = lo_.state_dim();
    StateSpaceSystem sys;
    sys.companion = companion();
    sys.init_state_var = cfg_.init_state_var;
    if (cfg_.sv) {
      sys.trans_cov_path.resize(static_cast<std::size_t>(T_));
      for (int t = 0; t < T_; ++t) sys.trans_cov_path[static_cast<std::size_t>(t)] = omega_at(t);
    } else {
      sys.trans_cov = omega_at(0);
    }
    sys.loadings = Matrix::Zero(lo_.n_obs(), l);
    Matrix obs(T_, lo_.n_obs());
    sys.obs_noise_var = Matrix::Zero(T_, lo_.n_obs());
    for (int r = 0; r < lo_.n_meas(); ++r) {
      const int q = meas_quantile(r);
      const int i = meas_indicator(r);
      const int j = meas_country(r);
      const auto& mc = mix_[static_cast<std::size_t>(q)];
      sys.loadings(r, lo_.factor_index(q, i)) =
          lo_.is_reference(j) ? 1.0 : st_.meas_coeffs(r, lo_.lambda_col());
      for (int g = 0; g < lo_.k; ++g)
        sys.loadings(r, lo_.global_state_index(g)) = st_.meas_coeffs(r, lo_.gamma_col(g));
      for (int t = 0; t < T_; ++t) {
        double adj = Y_(t, r) - st_.meas_coeffs(r, lo_.c_col());
        if (!lo_.gaussian) adj -= mc.kappa1 * st_.z(t, r);
        if (lo_.own_lag) adj -= st_.meas_coeffs(r, lo_.beta_col()) * (t > 0 ? Y_(t - 1, r) : 0.0);
        obs(t, r) = adj;
        sys.obs_noise_var(t, r) =
            lo_.gaussian ? st_.sigma[r] : st_.sigma[r] * mc.kappa2_sq * st_.z(t, r);
        if (lo_.own_lag && t == 0) sys.obs_noise_var(t, r) = 1e12;  // conditioning observation
      }
    }
    for (int g = 0; g < lo_.k; ++g) {
      const int row = lo_.n_meas() + g;
      sys.loadings(row, lo_.global_state_index(g)) = 1.0;
      obs.col(row) = G_.col(g);
      // exact zero noise: handled by the filter's degenerate-row branch
    }
    const Matrix path = carter_kohn_draw(sys, obs, rng);
    st_.F = path.leftCols(l);
    for (int g = 0; g < lo_.k; ++g) st_.F.col(lo_.global_state_index(g)) = G_.col(g);
  }

  void step_state_var(Rng& rng) {
    const int l = lo_.state_dim();
    const int p = lo_.p;
    const int Ts = T_ - p;
    if (Ts < l + p * l + 2) throw std::runtime_error("step_state_var: sample too short");
    Matrix lags(Ts, l * p + 1);
    for (int t = p; t < T_; ++t) {
      for (int li = 0; li < p; ++li) lags.block(t - p, li * l, 1, l) = st_.F.row(t - 1 - li);
      lags(t - p, l * p) = 1.0;
    }
    Matrix eps(Ts, l);
    for (int r = 0; r < l; ++r) {
      const int d = l * p + 1 + r;
      Matrix X(Ts, d);
      X.leftCols(l * p + 1) = lags;
      if (r > 0) X.rightCols(r) = eps.leftCols(r);
      Vector dep = st_.F.col(r).tail(Ts);
      Vector weights(Ts);
      for (int t = 0; t < Ts; ++t) weights[t] = std::exp(-st_.h(t + p, r));
      auto& hs = st_.hs_state[static_cast<std::size_t>(r)];
      Vector prior_prec(d), prior_mean = Vector::Zero(d);
      for (int k = 0; k < l * p; ++k) prior_prec[k] = 1.0 / hs.prior_variance(k);
      prior_prec[l * p] = 1.0 / cfg_.intercept_prior_var;
      for (int k = 0; k < r; ++k) {
        prior_prec[l * p + 1 + k] = 1.0 / cfg_.sigma_a;
        prior_mean[l * p + 1 + k] = cfg_.mu_a;
      }
      const Vector theta = detail::bayes_regression_draw(X, dep, weights, prior_prec, prior_mean, rng);
      st_.psi.row(r) = theta.head(l * p).transpose();
      st_.v[r] = theta[l * p];
      for (int k = 0; k < r; ++k) st_.A(r, k) = theta[l * p + 1 + k];
      horseshoe_gibbs_update(theta.head(l * p), hs, rng);
      eps.col(r) = dep - X * theta;
      step_volatility(r, eps.col(r), rng);
    }
  }

  void step_volatility(int r, const Vector& eps, Rng& rng) {
    const int p = lo_.p;
    const int Ts = static_cast<int>(eps.size());
    if (!cfg_.sv) {
      const double omega =
          rng.inverse_gamma(cfg_.r_h + 0.5 * Ts, cfg_.s_h + 0.5 * eps.squaredNorm());
      st_.h.col(r).setConstant(std::log(std::min(std::max(omega, kScaleFloor), kScaleCap)));
      return;
    }
    const auto& mix = detail::ksc_mixture();
    Vector ystar(Ts);
    for (int t = 0; t < Ts; ++t) ystar[t] = std::log(eps[t] * eps[t] + 1e-6);
    // sample mixture components given the current h path
    Vector mcomp(Ts), vcomp(Ts);
    for (int t = 0; t < Ts; ++t) {
      std::array<double, 7> w;
      double wsum = 0.0;
      for (std::size_t i = 0; i < 7; ++i) {
        const double mu = st_.h(t + p, r) + mix[i].mean - detail::kKscOffset;
        const double e = ystar[t] - mu;
        w[i] = mix[i].prob / std::sqrt(mix[i].var) * std::exp(-0.5 * e * e / mix[i].var);
        wsum += w[i];
      }
      double u = rng.uniform() * wsum;
      std::size_t pick = 6;
      for (std::size_t i = 0; i < 7; ++i) {
        if (u < w[i]) {
          pick = i;
          break;
        }
        u -= w[i];
      }
      mcomp[t] = mix[pick].mean - detail::kKscOffset;
      vcomp[t] = mix[pick].var;
    }
    // scalar random-walk FFBS for h
    Vector fm(Ts), fv(Ts);
    double m = 0.0, P = 10.0;
    for (int t = 0; t < Ts; ++t) {
      if (t > 0) P += st_.sv_var[r];
      const double S = P + vcomp[t];
      const double K = P / S;
      m += K * (ystar[t] - mcomp[t] - m);
      P *= (1.0 - K);
      fm[t] = m;
      fv[t] = P;
    }
    Vector hx(Ts);
    hx[Ts - 1] = rng.normal(fm[Ts - 1], std::sqrt(std::max(fv[Ts - 1], 0.0)));
    for (int t = Ts - 2; t >= 0; --t) {
      const double S = fv[t] + st_.sv_var[r];
      const double K = fv[t] / S;
      const double mean = fm[t] + K * (hx[t + 1] - fm[t]);
      const double var = fv[t] * (1.0 - K);
      hx[t] = rng.normal(mean, std::sqrt(std::max(var, 0.0)));
    }
    for (int t = 0; t < Ts; ++t) st_.h(t + p, r) = hx[t];
    for (int t = 0; t < p; ++t) st_.h(t, r) = hx[0];
    double ssq = 0.0;
    for (int t = 1; t < Ts; ++t) ssq += (hx[t] - hx[t - 1]) * (hx[t] - hx[t - 1]);
    st_.sv_var[r] = std::min(
        std::max(rng.inverse_gamma(cfg_.r_omega + 0.5 * (Ts - 1), cfg_.s_omega + 0.5 * ssq),
                 kScaleFloor),
        kScaleCap);
  }

  void step_sign() {
    if (!cfg_.sign_identification || F_ref_.size() == 0) return;
    const auto flips = sign_flip_pattern(st_.F, F_ref_, lo_.n_factors());
    for (int c = 0; c < lo_.n_factors(); ++c) {
      if (flips[static_cast<std::size_t>(c)] > 0) continue;
      st_.F.col(c) = -st_.F.col(c);
      const int q = c / lo_.m, i = c % lo_.m;
      for (int j = 0; j < lo_.n; ++j)
        if (!lo_.is_reference(j)) {
          const int r = lo_.meas_row(q, i, j);
          st_.meas_coeffs(r, lo_.lambda_col()) = -st_.meas_coeffs(r, lo_.lambda_col());
        }
      // VAR blocks: flip row and lag-columns of state c, intercept, A row/col
      st_.v[c] = -st_.v[c];
      st_.psi.row(c) = -st_.psi.row(c);
      for (int li = 0; li < lo_.p; ++li) st_.psi.col(li * lo_.state_dim() + c) =
          -st_.psi.col(li * lo_.state_dim() + c);
      st_.A.row(c) = -st_.A.row(c);
      st_.A.col(c) = -st_.A.col(c);
      st_.A(c, c) = 1.0;
    }
  }

  CompanionSystem companion() const {
    std::vector<Matrix> phis(static_cast<std::size_t>(lo_.p));
    const int l = lo_.state_dim();
    for (int li = 0; li < lo_.p; ++li) phis[static_cast<std::size_t>(li)] = st_.psi.middleCols(li * l, l);
    return build_companion(st_.v, phis);
  }

  Matrix omega_at(int t) const {
    return st_.A * st_.h.row(t).transpose().array().exp().matrix().asDiagonal() * st_.A.transpose();
  }

  int meas_quantile(int r) const { return r / (lo_.m * lo_.n); }
  int meas_indicator(int r) const { return (r % (lo_.m * lo_.n)) / lo_.n; }
  int meas_country(int r) const { return r % lo_.n; }

  double meas_fitted(int r, int t) const {
    const int q = meas_quantile(r);
    const int i = meas_indicator(r);
    double f = 0.0;
    if (lo_.intercepts) f += st_.meas_coeffs(r, lo_.c_col());
    if (lo_.own_lag) f += st_.meas_coeffs(r, lo_.beta_col()) * (t > 0 ? Y_(t - 1, r) : 0.0);
    if (lo_.has_factors)
      f += st_.meas_coeffs(r, lo_.lambda_col()) * st_.F(t, lo_.factor_index(q, i));
    for (int g = 0; g < lo_.k; ++g) f += st_.meas_coeffs(r, lo_.gamma_col(g)) * G_(t, g);
    return f;
  }

 private:
  void set_free_coeffs(int r, const Vector& phi) {
    const int j = meas_country(r);
    int c = 0;
    if (lo_.intercepts) st_.meas_coeffs(r, lo_.c_col()) = phi[c++];
    if (lo_.own_lag) st_.meas_coeffs(r, lo_.beta_col()) = phi[c++];
    if (lo_.has_factors)
      st_.meas_coeffs(r, lo_.lambda_col()) = lo_.is_reference(j) ? 1.0 : phi[c];
    if (lo_.has_factors && !lo_.is_reference(j)) ++c;
    for (int g = 0; g < lo_.k; ++g) st_.meas_coeffs(r, lo_.gamma_col(g)) = phi[c++];
  }

  Matrix Y_;   // T x n_meas stacked observations
  Matrix G_;   // T x k globals
  ModelLayout lo_;
  ModelConfig cfg_;
  std::vector<MixtureConstants> mix_;
  Matrix F_ref_;
  GibbsState st_;
  int T_ = 0;
};

// Convenience wrapper: stack the panel, run the chain, attach labels.
inline GibbsResult run_gibbs(const PanelData& panel, const ModelConfig& cfg,
                             const Matrix& F_reference = Matrix()) {
  const ModelLayout lo = ModelLayout::from(panel, cfg);
  Matrix G = panel.globals;
  if (lo.k == 0) G = Matrix(panel.T(), 0);
  GibbsSampler sampler(stack_panel(panel, lo), G, lo, cfg);
  if (F_reference.size() > 0) sampler.set_reference(F_reference);
  Rng rng(cfg.mcmc.seed);
  GibbsResult res = sampler.run(rng);
  res.draws.indicator_labels = panel.indicator_labels;
  res.draws.country_labels = panel.country_labels;
  res.draws.global_labels = panel.global_labels;
  res.draws.time_index = panel.time_index;
  res.draws.seed = cfg.mcmc.seed;
  return res;
}

}  // namespace qfavar
