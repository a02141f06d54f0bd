#pragma once

// Structural analysis of the estimated state VAR: generalized impulse
// responses (one-standard-deviation, no orthogonalization ordering),
// generalized forecast-error variance decompositions, projection of both
// to the observed variables, and connectedness networks read off the
// variance-decomposition shares.

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfavar/draws.hpp"
#include "qfavar/state_space.hpp"

namespace qfavar {

namespace detail {

// empirical quantile with linear interpolation (copies the input)
inline double percentile(std::vector<double> v, double q) {
  if (v.empty()) throw std::invalid_argument("percentile: empty sample");
  std::sort(v.begin(), v.end());
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= v.size()) return v.back();
  const double w = pos - static_cast<double>(lo);
  return (1.0 - w) * v[lo] + w * v[lo + 1];
}

}  // namespace detail

// MA coefficients Psi_0..Psi_H of the VAR with l x (l*p) lag matrix psi,
// obtained by iterating the companion matrix.
inline std::vector<Matrix> ma_coefficients(const Matrix& psi, int H) {
  const int l = static_cast<int>(psi.rows());
  if (l == 0 || psi.cols() % l != 0)
    throw std::invalid_argument("ma_coefficients: lag matrix width must be a multiple of l");
  const int p = static_cast<int>(psi.cols()) / l;
  std::vector<Matrix> phis;
  for (int i = 0; i < p; ++i) phis.push_back(psi.block(0, i * l, l, l));
  const CompanionSystem comp = build_companion(Vector::Zero(l), phis);
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(H) + 1);
  Matrix power = Matrix::Identity(l * p, l * p);
  for (int h = 0; h <= H; ++h) {
    out.push_back(power.topLeftCorner(l, l));
    power = comp.T * power;
  }
  return out;
}

// Innovation covariance used for structural analysis of one draw:
// A exp(h-bar) A' with h-bar the time-average log variance, or the
// end-of-sample h_T when requested.
inline Matrix structural_omega(const ParameterDraw& d, bool end_of_sample = false) {
  if (d.h.rows() == 0) throw std::invalid_argument("structural_omega: draw has no variance path");
  const Vector logvar =
      end_of_sample ? Vector(d.h.row(d.h.rows() - 1)) : Vector(d.h.colwise().mean());
  return d.A * logvar.array().exp().matrix().asDiagonal() * d.A.transpose();
}

// Projection of the state onto the stacked measurement rows:
// y = c + W [F', g']' with W = [Lambda, Gamma]. Own-lag terms are dynamics,
// not loadings, and are excluded.
struct Projection {
  Matrix W;  // n_meas x l
  Vector c;  // n_meas intercepts
};

inline Projection build_projection(const ParameterDraw& d, const ModelLayout& lo) {
  const int l = lo.state_dim();
  Projection pr;
  pr.W = Matrix::Zero(lo.n_meas(), l);
  pr.c = Vector::Zero(lo.n_meas());
  if (d.meas_coeffs.rows() != lo.n_meas() || d.meas_coeffs.cols() != lo.coeff_width())
    throw std::invalid_argument("build_projection: measurement coefficient shape mismatch");
  for (int q = 0; q < lo.R; ++q)
    for (int i = 0; i < lo.m; ++i)
      for (int j = 0; j < lo.n; ++j) {
        const int r = lo.meas_row(q, i, j);
        pr.c[r] = d.meas_coeffs(r, lo.c_col());
        if (lo.has_factors)
          pr.W(r, lo.factor_index(q, i)) = d.meas_coeffs(r, lo.lambda_col());
        for (int g = 0; g < lo.k; ++g)
          pr.W(r, lo.global_state_index(g)) = d.meas_coeffs(r, lo.gamma_col(g));
      }
  return pr;
}

// Project a state path (rows = steps, cols = l) to the measurement rows.
// Intercepts are added for level forecasts and omitted for responses.
inline Matrix project_to_measurement(const Matrix& states, const Matrix& W, const Vector& c) {
  if (states.cols() != W.cols())
    throw std::invalid_argument("project_to_measurement: state dimension mismatch");
  Matrix out = states * W.transpose();
  if (c.size() > 0) {
    if (c.size() != W.rows())
      throw std::invalid_argument("project_to_measurement: intercept dimension mismatch");
    out.rowwise() += c.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Generalized impulse responses
// ---------------------------------------------------------------------------

struct IrfResult {
  int shock = 0;  // state index of the shocked innovation
  int H = 0;
  // (H+1) x l state-level responses: posterior median and 16/84% band
  Matrix state_median, state_lo, state_hi;
  // (H+1) x n_meas projected variable-level responses
  Matrix var_median, var_lo, var_hi;
  int n_used = 0, n_dropped = 0;  // explosive-draw filtering
};

// Response of one draw: GIRF_h(j) = Psi_h Omega e_j / sqrt(omega_jj).
inline Matrix girf_draw(const Matrix& psi, const Matrix& omega, int shock, int H) {
  const int l = static_cast<int>(omega.rows());
  if (shock < 0 || shock >= l) throw std::invalid_argument("girf_draw: shock index out of range");
  const double wjj = omega(shock, shock);
  if (!(wjj > 0.0)) throw std::invalid_argument("girf_draw: shock variance must be positive");
  const std::vector<Matrix> ma = ma_coefficients(psi, H);
  const Vector impact = omega.col(shock) / std::sqrt(wjj);
  Matrix resp(H + 1, l);
  for (int h = 0; h <= H; ++h) resp.row(h) = (ma[static_cast<std::size_t>(h)] * impact).transpose();
  return resp;
}

namespace detail {

inline bool draw_is_explosive(const ParameterDraw& d) {
  const int l = static_cast<int>(d.psi.rows());
  if (l == 0) return false;
  const int p = static_cast<int>(d.psi.cols()) / l;
  std::vector<Matrix> phis;
  for (int i = 0; i < p; ++i) phis.push_back(d.psi.block(0, i * l, l, l));
  return spectral_radius(build_companion(Vector::Zero(l), phis).T) >= 1.0;
}

// pointwise 16/50/84 percentiles across a stack of equally-shaped matrices
inline void percentile_bands(const std::vector<Matrix>& stack, Matrix& med, Matrix& lo,
                             Matrix& hi) {
  const auto rows = stack.front().rows(), cols = stack.front().cols();
  med.resize(rows, cols);
  lo.resize(rows, cols);
  hi.resize(rows, cols);
  std::vector<double> cell(stack.size());
  for (long r = 0; r < rows; ++r)
    for (long c = 0; c < cols; ++c) {
      for (std::size_t d = 0; d < stack.size(); ++d) cell[d] = stack[d](r, c);
      med(r, c) = percentile(cell, 0.5);
      lo(r, c) = percentile(cell, 0.16);
      hi(r, c) = percentile(cell, 0.84);
    }
}

}  // namespace detail

inline IrfResult girf(const PosteriorDraws& post, int shock, int H) {
  if (H < 0) throw std::invalid_argument("girf: horizon must be nonnegative");
  if (post.draws.empty()) throw std::invalid_argument("girf: no draws");
  IrfResult out;
  out.shock = shock;
  out.H = H;
  std::vector<Matrix> state_stack, var_stack;
  for (const auto& d : post.draws) {
    if (post.config.filter_explosive && detail::draw_is_explosive(d)) {
      ++out.n_dropped;
      continue;
    }
    const Matrix omega = structural_omega(d, post.config.omega_end_of_sample);
    const Matrix resp = girf_draw(d.psi, omega, shock, H);
    const Projection pr = build_projection(d, post.layout);
    state_stack.push_back(resp);
    var_stack.push_back(project_to_measurement(resp, pr.W, Vector()));
    ++out.n_used;
  }
  if (state_stack.empty()) throw std::runtime_error("girf: every draw was filtered as explosive");
  detail::percentile_bands(state_stack, out.state_median, out.state_lo, out.state_hi);
  detail::percentile_bands(var_stack, out.var_median, out.var_lo, out.var_hi);
  return out;
}

// ---------------------------------------------------------------------------
// Generalized forecast-error variance decompositions
// ---------------------------------------------------------------------------

struct FevdResult {
  int H = 0;
  // per horizon h=0..H, cumulative shares; state: l x l, variable: n_meas x l
  std::vector<Matrix> state_raw, state_norm;
  std::vector<Matrix> var_raw, var_norm;
  int n_used = 0, n_dropped = 0;
};

// Generalized FEVD of one draw for rows given by the projection matrix P
// (identity for the state level): share of row i attributed to shock j is
//   omega_jj^{-1} sum_h (p_i' Psi_h Omega e_j)^2 / sum_h p_i' Psi_h Omega Psi_h' p_i.
// Returns the cumulative raw shares per horizon h=0..H.
inline std::vector<Matrix> gfevd_draw(const Matrix& psi, const Matrix& omega, const Matrix& P,
                                      int H) {
  const int l = static_cast<int>(omega.rows());
  const int nrow = static_cast<int>(P.rows());
  if (P.cols() != l) throw std::invalid_argument("gfevd_draw: projection width mismatch");
  for (int j = 0; j < l; ++j)
    if (!(omega(j, j) > 0.0))
      throw std::invalid_argument("gfevd_draw: innovation variances must be positive");
  const std::vector<Matrix> ma = ma_coefficients(psi, H);
  Matrix num = Matrix::Zero(nrow, l);
  Vector den = Vector::Zero(nrow);
  std::vector<Matrix> out;
  out.reserve(static_cast<std::size_t>(H) + 1);
  for (int h = 0; h <= H; ++h) {
    const Matrix B = P * ma[static_cast<std::size_t>(h)];  // nrow x l
    const Matrix BO = B * omega;
    for (int j = 0; j < l; ++j) num.col(j) += BO.col(j).cwiseAbs2() / omega(j, j);
    den += (BO.cwiseProduct(B)).rowwise().sum();
    Matrix shares = Matrix::Zero(nrow, l);
    for (int i = 0; i < nrow; ++i)
      if (den[i] > 0.0) shares.row(i) = num.row(i) / den[i];
    out.push_back(shares);
  }
  return out;
}

inline Matrix row_normalized(const Matrix& shares) {
  Matrix out = shares;
  for (long i = 0; i < out.rows(); ++i) {
    const double s = out.row(i).sum();
    if (s > 0.0) out.row(i) /= s;
  }
  return out;
}

inline FevdResult gfevd(const PosteriorDraws& post, int H) {
  if (H < 0) throw std::invalid_argument("gfevd: horizon must be nonnegative");
  if (post.draws.empty()) throw std::invalid_argument("gfevd: no draws");
  const int l = post.layout.state_dim();
  const int nm = post.layout.n_meas();
  FevdResult out;
  out.H = H;
  out.state_raw.assign(static_cast<std::size_t>(H) + 1, Matrix::Zero(l, l));
  out.var_raw.assign(static_cast<std::size_t>(H) + 1, Matrix::Zero(nm, l));
  for (const auto& d : post.draws) {
    if (post.config.filter_explosive && detail::draw_is_explosive(d)) {
      ++out.n_dropped;
      continue;
    }
    const Matrix omega = structural_omega(d, post.config.omega_end_of_sample);
    const auto st = gfevd_draw(d.psi, omega, Matrix::Identity(l, l), H);
    const Projection pr = build_projection(d, post.layout);
    const auto vr = gfevd_draw(d.psi, omega, pr.W, H);
    for (int h = 0; h <= H; ++h) {
      out.state_raw[static_cast<std::size_t>(h)] += st[static_cast<std::size_t>(h)];
      out.var_raw[static_cast<std::size_t>(h)] += vr[static_cast<std::size_t>(h)];
    }
    ++out.n_used;
  }
  if (out.n_used == 0) throw std::runtime_error("gfevd: every draw was filtered as explosive");
  for (int h = 0; h <= H; ++h) {
    out.state_raw[static_cast<std::size_t>(h)] /= out.n_used;
    out.var_raw[static_cast<std::size_t>(h)] /= out.n_used;
    out.state_norm.push_back(row_normalized(out.state_raw[static_cast<std::size_t>(h)]));
    out.var_norm.push_back(row_normalized(out.var_raw[static_cast<std::size_t>(h)]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Connectedness network
// ---------------------------------------------------------------------------

struct ConnectednessEdge {
  int from = 0, to = 0;  // node indices into `labels`; weight flows from -> to
  double weight = 0.0;
};

struct ConnectednessResult {
  // augmented adjacency [[0, D],[0, D_s]]; row i, column j holds C_{i<-j}.
  // The left (variable) columns are identically zero: observed variables
  // receive shocks but never transmit them in this model.
  Matrix adjacency;
  double threshold = 0.05;
  std::vector<ConnectednessEdge> edges;  // off-diagonal entries >= threshold
  std::vector<std::string> labels;       // variables first, then states
};

inline ConnectednessResult connectedness(const Matrix& D, const Matrix& Ds, double threshold,
                                         const std::vector<std::string>& var_labels = {},
                                         const std::vector<std::string>& state_labels = {}) {
  if (!(threshold >= 0.0 && threshold < 1.0))
    throw std::invalid_argument("connectedness: threshold must lie in [0,1)");
  const int nm = static_cast<int>(D.rows());
  const int l = static_cast<int>(Ds.rows());
  if (D.cols() != l || Ds.cols() != l)
    throw std::invalid_argument("connectedness: share matrices must have l columns");
  ConnectednessResult out;
  out.threshold = threshold;
  const int N = nm + l;
  out.adjacency = Matrix::Zero(N, N);
  out.adjacency.block(0, nm, nm, l) = D;
  out.adjacency.block(nm, nm, l, l) = Ds;
  for (int i = 0; i < nm; ++i)
    out.labels.push_back(i < static_cast<int>(var_labels.size()) ? var_labels[static_cast<std::size_t>(i)]
                                                                 : "y" + std::to_string(i));
  for (int j = 0; j < l; ++j)
    out.labels.push_back(j < static_cast<int>(state_labels.size())
                             ? state_labels[static_cast<std::size_t>(j)]
                             : "s" + std::to_string(j));
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      if (i == j) continue;
      const double w = out.adjacency(i, j);
      if (w >= threshold) out.edges.push_back({j, i, w});  // shock j drives node i
    }
  return out;
}

inline std::string connectedness_dot(const ConnectednessResult& c) {
  std::ostringstream out;
  out << "digraph connectedness {\n";
  for (std::size_t i = 0; i < c.labels.size(); ++i)
    out << "  n" << i << " [label=\"" << c.labels[i] << "\"];\n";
  for (const auto& e : c.edges)
    out << "  n" << e.from << " -> n" << e.to << " [weight=" << e.weight << ", label=\""
        << e.weight << "\"];\n";
  out << "}\n";
  return out.str();
}

inline std::string connectedness_edge_csv(const ConnectednessResult& c) {
  std::ostringstream out;
  out << "from,to,weight\n";
  for (const auto& e : c.edges)
    out << c.labels[static_cast<std::size_t>(e.from)] << ','
        << c.labels[static_cast<std::size_t>(e.to)] << ',' << e.weight << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Label helpers and tidy CSV export
// ---------------------------------------------------------------------------

inline std::vector<std::string> state_labels(const PosteriorDraws& post) {
  const auto& lo = post.layout;
  std::vector<std::string> out;
  auto ind = [&](int i) {
    return i < static_cast<int>(post.indicator_labels.size())
               ? post.indicator_labels[static_cast<std::size_t>(i)]
               : "IND" + std::to_string(i + 1);
  };
  for (int q = 0; q < lo.R; ++q)
    for (int i = 0; i < lo.m; ++i) {
      std::ostringstream s;
      s << "F." << ind(i) << ".q" << lo.quantiles[static_cast<std::size_t>(q)];
      out.push_back(s.str());
    }
  for (int g = 0; g < lo.k; ++g)
    out.push_back(g < static_cast<int>(post.global_labels.size())
                      ? post.global_labels[static_cast<std::size_t>(g)]
                      : "G" + std::to_string(g + 1));
  return out;
}

inline std::vector<std::string> measurement_labels(const PosteriorDraws& post) {
  const auto& lo = post.layout;
  std::vector<std::string> out;
  auto lbl = [&](const std::vector<std::string>& v, int i, const char* stem) {
    return i < static_cast<int>(v.size()) ? v[static_cast<std::size_t>(i)]
                                          : stem + std::to_string(i + 1);
  };
  for (int q = 0; q < lo.R; ++q)
    for (int i = 0; i < lo.m; ++i)
      for (int j = 0; j < lo.n; ++j) {
        std::ostringstream s;
        s << lbl(post.indicator_labels, i, "IND") << '.' << lbl(post.country_labels, j, "C")
          << ".q" << lo.quantiles[static_cast<std::size_t>(q)];
        out.push_back(s.str());
      }
  return out;
}

// tidy rows: shock,target,horizon,median,lo16,hi84
inline std::string irf_csv(const IrfResult& irf, const std::string& shock_label,
                           const std::vector<std::string>& state_names,
                           const std::vector<std::string>& var_names) {
  std::ostringstream out;
  out << "shock,target,level,horizon,median,lo16,hi84\n";
  for (int h = 0; h <= irf.H; ++h) {
    for (long s = 0; s < irf.state_median.cols(); ++s)
      out << shock_label << ',' << state_names[static_cast<std::size_t>(s)] << ",state," << h
          << ',' << irf.state_median(h, s) << ',' << irf.state_lo(h, s) << ','
          << irf.state_hi(h, s) << '\n';
    for (long r = 0; r < irf.var_median.cols(); ++r)
      out << shock_label << ',' << var_names[static_cast<std::size_t>(r)] << ",variable," << h
          << ',' << irf.var_median(h, r) << ',' << irf.var_lo(h, r) << ',' << irf.var_hi(h, r)
          << '\n';
  }
  return out.str();
}

// tidy rows: target,shock,horizon,share_raw,share_normalized
inline std::string fevd_csv(const FevdResult& f, const std::vector<std::string>& state_names,
                            const std::vector<std::string>& var_names) {
  std::ostringstream out;
  out << "target,shock,level,horizon,share_raw,share_normalized\n";
  for (int h = 0; h <= f.H; ++h) {
    const auto uh = static_cast<std::size_t>(h);
    for (long i = 0; i < f.state_raw[uh].rows(); ++i)
      for (long j = 0; j < f.state_raw[uh].cols(); ++j)
        out << state_names[static_cast<std::size_t>(i)] << ','
            << state_names[static_cast<std::size_t>(j)] << ",state," << h << ','
            << f.state_raw[uh](i, j) << ',' << f.state_norm[uh](i, j) << '\n';
    for (long i = 0; i < f.var_raw[uh].rows(); ++i)
      for (long j = 0; j < f.var_raw[uh].cols(); ++j)
        out << var_names[static_cast<std::size_t>(i)] << ','
            << state_names[static_cast<std::size_t>(j)] << ",variable," << h << ','
            << f.var_raw[uh](i, j) << ',' << f.var_norm[uh](i, j) << '\n';
  }
  return out.str();
}

}  // namespace qfavar
