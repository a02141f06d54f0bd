#pragma once

// Index bookkeeping for the stacked quantile system. State ordering is
// fixed: factors by quantile ascending (each quantile block holds the m
// indicator factors), then the k global variables. Observation rows stack
// the panel once per quantile (indicator-major within each block), then
// the globals identity block.

#include <stdexcept>
#include <string>
#include <vector>

#include "qfavar/config.hpp"
#include "qfavar/panel.hpp"

namespace qfavar {

struct ModelLayout {
  int m = 0;  // indicators
  int n = 0;  // countries
  int k = 0;  // globals
  int R = 0;  // quantile levels
  int p = 1;  // VAR lags
  std::vector<double> quantiles;
  bool intercepts = true;
  bool own_lag = false;
  bool has_factors = true;  // false for QAR/QAR-X
  bool gaussian = false;    // FAVAR: Gaussian measurement errors; sigma is a variance

  static ModelLayout from(const PanelData& panel, const ModelConfig& cfg) {
    ModelLayout lo;
    lo.m = panel.m();
    lo.n = panel.n();
    lo.k = panel.k();
    lo.quantiles = cfg.quantiles;
    lo.p = cfg.p;
    lo.intercepts = cfg.include_intercepts;
    lo.own_lag = cfg.include_own_lag;
    switch (cfg.variant) {
      case Variant::QFAVAR:
        break;
      case Variant::QDFM:
        lo.k = 0;  // globals dropped everywhere
        break;
      case Variant::FAVAR:
        lo.quantiles = {0.5};
        lo.gaussian = true;
        break;
      case Variant::QAR:
        lo.k = 0;
        [[fallthrough]];
      case Variant::QARX:
        if (lo.m * lo.n != 1)
          throw std::invalid_argument("QAR/QAR-X requires a single series (m*n == 1)");
        lo.has_factors = false;
        lo.own_lag = true;
        break;
    }
    lo.R = static_cast<int>(lo.quantiles.size());
    return lo;
  }

  int n_factors() const { return has_factors ? m * R : 0; }
  int state_dim() const { return n_factors() + (has_factors ? k : 0); }  // l = mR + k
  int n_series() const { return m * n; }
  int n_meas() const { return m * n * R; }  // measurement equations / stacked rows
  int n_obs() const { return n_meas() + (has_factors ? k : 0); }

  // state index of the factor for (quantile block, indicator)
  int factor_index(int q_idx, int i) const { return q_idx * m + i; }
  int global_state_index(int g) const { return n_factors() + g; }
  // stacked observation row of measurement equation (q, indicator, country)
  int meas_row(int q_idx, int i, int j) const { return q_idx * m * n + i * n + j; }
  int series_col(int i, int j) const { return i * n + j; }  // panel column

  // measurement coefficient layout: fixed width [c, beta, lambda, gamma_1..k]
  // (columns for disabled terms are kept and pinned at 0; reference lambda
  // pinned at 1)
  int coeff_width() const { return 3 + k; }
  int c_col() const { return 0; }
  int beta_col() const { return 1; }
  int lambda_col() const { return 2; }
  int gamma_col(int g) const { return 3 + g; }

  bool is_reference(int j) const { return j == 0; }

  // free coefficients of equation (q,i,j): intercept?, own lag?, lambda
  // (non-reference only), gammas
  int n_free_coeffs(int j) const {
    return (intercepts ? 1 : 0) + (own_lag ? 1 : 0) +
           ((has_factors && !is_reference(j)) ? 1 : 0) + k;
  }
};

}  // namespace qfavar
