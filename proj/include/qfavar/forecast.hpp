#pragma once

// Iterated forecasts from stored posterior draws: conditional-mean state
// paths, projection to quantile forecasts of the observed variables,
// density construction from a quantile grid, and the recursive
// pseudo-out-of-sample evaluation harness.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "qfavar/distributions.hpp"
#include "qfavar/draws.hpp"
#include "qfavar/evaluate.hpp"
#include "qfavar/gibbs.hpp"
#include "qfavar/structural.hpp"
#include "qfavar/vb.hpp"

namespace qfavar {

// ---------------------------------------------------------------------------
// State forecasts
// ---------------------------------------------------------------------------

struct StateForecasts {
  std::vector<Matrix> paths;  // per kept draw, H x l (rows are h = 1..H)
  std::vector<std::size_t> draw_index;
  int n_dropped = 0;
};

// Iterate the companion system H steps from the final smoothed state of
// each draw. Default is the conditional mean; with simulate_shocks the
// state innovations are drawn, giving fan-chart paths.
inline StateForecasts forecast_states(const PosteriorDraws& post, int H,
                                      bool simulate_shocks = false, Rng* rng = nullptr) {
  if (H < 1) throw std::invalid_argument("forecast_states: horizon must be >= 1");
  if (post.draws.empty()) throw std::invalid_argument("forecast_states: no draws");
  if (simulate_shocks && rng == nullptr)
    throw std::invalid_argument("forecast_states: shock simulation needs an rng");
  const ModelLayout& lo = post.layout;
  const int l = lo.has_factors ? lo.state_dim() : 0;
  StateForecasts out;
  for (std::size_t di = 0; di < post.draws.size(); ++di) {
    const auto& d = post.draws[di];
    if (l == 0) {
      out.paths.push_back(Matrix::Zero(H, 0));
      out.draw_index.push_back(di);
      continue;
    }
    if (post.config.filter_explosive && detail::draw_is_explosive(d)) {
      ++out.n_dropped;
      continue;
    }
    const int p = static_cast<int>(d.psi.cols()) / l;
    std::vector<Matrix> phis;
    for (int i = 0; i < p; ++i) phis.push_back(d.psi.block(0, i * l, l, l));
    const CompanionSystem comp = build_companion(d.v, phis);
    const int T = static_cast<int>(d.F.rows());
    if (T < p) throw std::invalid_argument("forecast_states: state path shorter than lag order");
    Vector s(l * p);
    for (int i = 0; i < p; ++i) s.segment(i * l, l) = d.F.row(T - 1 - i).transpose();
    Matrix chol;
    if (simulate_shocks)
      chol = Eigen::LLT<Matrix>(structural_omega(d, post.config.omega_end_of_sample)).matrixL();
    Matrix path(H, l);
    for (int h = 0; h < H; ++h) {
      s = comp.intercept + comp.T * s;
      if (simulate_shocks) {
        Vector eps(l);
        for (int i = 0; i < l; ++i) eps[i] = rng->normal();
        s.head(l) += chol * eps;
      }
      path.row(h) = s.head(l).transpose();
    }
    out.paths.push_back(path);
    out.draw_index.push_back(di);
  }
  if (out.paths.empty())
    throw std::runtime_error("forecast_states: every draw was filtered as explosive");
  return out;
}

// ---------------------------------------------------------------------------
// Quantile forecasts of the observables
// ---------------------------------------------------------------------------

struct ForecastFan {
  int H = 0;
  std::vector<double> levels;        // quantile levels, one column group each
  std::vector<std::string> series;   // m*n series labels
  std::vector<Matrix> values;        // per horizon h=1..H: n_series x levels
  int n_used = 0, n_dropped = 0;
};

namespace detail {

inline int quantile_block_index(const std::vector<double>& grid, double level) {
  for (std::size_t q = 0; q < grid.size(); ++q)
    if (std::abs(grid[q] - level) < 1e-9) return static_cast<int>(q);
  throw std::invalid_argument("forecast: requested quantile level not in the estimated grid");
}

}  // namespace detail

// Project state forecasts to per-variable conditional quantiles and average
// across draws. `y_last`/`g_last` are the final in-sample observations,
// used to seed own-lag recursions and (when the model carries no factors)
// to hold the globals at their last value.
inline ForecastFan forecast_quantiles(const PosteriorDraws& post, const Vector& y_last,
                                      const Vector& g_last, int H,
                                      std::vector<double> levels = {},
                                      bool simulate_shocks = false, Rng* rng = nullptr) {
  const ModelLayout& lo = post.layout;
  if (levels.empty()) levels = lo.quantiles;
  if (y_last.size() != lo.n_series())
    throw std::invalid_argument("forecast_quantiles: y_last must hold one value per series");
  if (lo.k > 0 && !lo.has_factors && g_last.size() != lo.k)
    throw std::invalid_argument("forecast_quantiles: g_last must hold one value per global");
  const StateForecasts sf = forecast_states(post, H, simulate_shocks, rng);

  const int L = static_cast<int>(levels.size());
  ForecastFan fan;
  fan.H = H;
  fan.levels = levels;
  fan.n_dropped = sf.n_dropped;
  fan.values.assign(static_cast<std::size_t>(H), Matrix::Zero(lo.n_series(), L));

  std::vector<Matrix> ma;  // per-draw scratch for the Gaussian branch
  for (std::size_t ki = 0; ki < sf.paths.size(); ++ki) {
    const ParameterDraw& d = post.draws[sf.draw_index[ki]];
    const Matrix& S = sf.paths[ki];
    // global-variable forecast at horizon h (1-based)
    auto g_hat = [&](int h, int g) {
      return lo.has_factors ? S(h - 1, lo.global_state_index(g)) : g_last[g];
    };

    if (!lo.gaussian) {
      for (int li = 0; li < L; ++li) {
        const int q = detail::quantile_block_index(lo.quantiles, levels[static_cast<std::size_t>(li)]);
        for (int i = 0; i < lo.m; ++i)
          for (int j = 0; j < lo.n; ++j) {
            const int r = lo.meas_row(q, i, j);
            double prev = y_last[lo.series_col(i, j)];
            for (int h = 1; h <= H; ++h) {
              double val = d.meas_coeffs(r, lo.c_col()) + d.meas_coeffs(r, lo.beta_col()) * prev;
              if (lo.has_factors)
                val += d.meas_coeffs(r, lo.lambda_col()) * S(h - 1, lo.factor_index(q, i));
              for (int g = 0; g < lo.k; ++g)
                val += d.meas_coeffs(r, lo.gamma_col(g)) * g_hat(h, g);
              fan.values[static_cast<std::size_t>(h - 1)](lo.series_col(i, j), li) += val;
              prev = val;
            }
          }
      }
    } else {
      // Gaussian measurement: predictive quantiles are mean +/- z_q * sd,
      // with the variance combining the iterated state forecast-error
      // covariance and the measurement error variance.
      const Matrix omega = structural_omega(d, post.config.omega_end_of_sample);
      const std::vector<Matrix> psis = ma_coefficients(d.psi, H - 1);
      Matrix mse = Matrix::Zero(lo.state_dim(), lo.state_dim());
      const Projection pr = build_projection(d, lo);
      std::vector<Matrix> mses;
      for (int h = 0; h < H; ++h) {
        const Matrix& P = psis[static_cast<std::size_t>(h)];
        mse += P * omega * P.transpose();
        mses.push_back(mse);
      }
      for (int i = 0; i < lo.m; ++i)
        for (int j = 0; j < lo.n; ++j) {
          const int r = lo.meas_row(0, i, j);
          double prev = y_last[lo.series_col(i, j)];
          for (int h = 1; h <= H; ++h) {
            double mean = d.meas_coeffs(r, lo.c_col()) + d.meas_coeffs(r, lo.beta_col()) * prev;
            mean += d.meas_coeffs(r, lo.lambda_col()) * S(h - 1, lo.factor_index(0, i));
            for (int g = 0; g < lo.k; ++g)
              mean += d.meas_coeffs(r, lo.gamma_col(g)) * g_hat(h, g);
            const Vector w = pr.W.row(r).transpose();
            const double var =
                w.dot(mses[static_cast<std::size_t>(h - 1)] * w) + d.sigma[r];
            const double sd = std::sqrt(std::max(var, 0.0));
            for (int li = 0; li < L; ++li)
              fan.values[static_cast<std::size_t>(h - 1)](lo.series_col(i, j), li) +=
                  mean + normal_quantile(levels[static_cast<std::size_t>(li)]) * sd;
            prev = mean;
          }
        }
    }
    ++fan.n_used;
  }
  for (auto& v : fan.values) v /= static_cast<double>(fan.n_used);

  for (int i = 0; i < lo.m; ++i)
    for (int j = 0; j < lo.n; ++j) {
      const std::string ind = i < static_cast<int>(post.indicator_labels.size())
                                  ? post.indicator_labels[static_cast<std::size_t>(i)]
                                  : "IND" + std::to_string(i + 1);
      const std::string cty = j < static_cast<int>(post.country_labels.size())
                                  ? post.country_labels[static_cast<std::size_t>(j)]
                                  : "C" + std::to_string(j + 1);
      fan.series.push_back(ind + "." + cty);
    }
  return fan;
}

// tidy rows: series,quantile,horizon,value
inline std::string forecast_csv(const ForecastFan& fan) {
  std::ostringstream out;
  out << "series,quantile,horizon,value\n";
  for (int h = 1; h <= fan.H; ++h)
    for (std::size_t s = 0; s < fan.series.size(); ++s)
      for (std::size_t li = 0; li < fan.levels.size(); ++li)
        out << fan.series[s] << ',' << fan.levels[li] << ',' << h << ','
            << fan.values[static_cast<std::size_t>(h - 1)](static_cast<long>(s),
                                                           static_cast<long>(li))
            << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// Density from a quantile grid
// ---------------------------------------------------------------------------

struct DensityGrid {
  Vector x, pdf;           // 512-point grid, trapezoid-normalized
  bool degenerate = false; // fewer than 2 distinct quantile values
};

// Gaussian kernel smoother over the quantile points. Each point carries
// the probability mass of its level cell (midpoint partition of (0,1)):
// uniform weights would overstate the spread because tail quantiles
// represent far less mass than central ones. Bandwidth follows Silverman's
// rule on the mass-weighted spread of the quantile values.
inline DensityGrid density_from_quantiles(const std::vector<double>& levels,
                                          const Vector& values) {
  const auto n = values.size();
  if (static_cast<std::size_t>(n) != levels.size() || n < 1)
    throw std::invalid_argument("density_from_quantiles: level/value length mismatch");
  for (std::size_t i = 1; i < levels.size(); ++i)
    if (!(levels[i] > levels[i - 1]))
      throw std::invalid_argument("density_from_quantiles: levels must be strictly increasing");
  for (long i = 0; i < n; ++i)
    if (!std::isfinite(values[i]))
      throw std::invalid_argument("density_from_quantiles: values must be finite");

  // probability mass of each level cell: boundaries at level midpoints
  Vector w(n);
  for (long i = 0; i < n; ++i) {
    const double lo_edge = i == 0 ? 0.0 : 0.5 * (levels[static_cast<std::size_t>(i - 1)] +
                                                 levels[static_cast<std::size_t>(i)]);
    const double hi_edge = i == n - 1 ? 1.0 : 0.5 * (levels[static_cast<std::size_t>(i)] +
                                                     levels[static_cast<std::size_t>(i + 1)]);
    w[i] = hi_edge - lo_edge;
  }
  w /= w.sum();

  DensityGrid out;
  const int G = 512;
  const double vmin = values.minCoeff(), vmax = values.maxCoeff();
  double bw;
  if (vmax - vmin < 1e-14) {
    out.degenerate = true;  // spike density around the common value
    bw = std::max(1e-8, 1e-8 * std::abs(vmin));
  } else {
    const double wmean = w.dot(values);
    const double wsd = std::sqrt(w.dot((values.array() - wmean).square().matrix()));
    std::vector<double> sorted(values.data(), values.data() + n);
    std::sort(sorted.begin(), sorted.end());
    const double iqr = detail::percentile(sorted, 0.75) - detail::percentile(sorted, 0.25);
    const double spread = iqr > 0.0 ? std::min(wsd, iqr / 1.34) : wsd;
    bw = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  }
  const double lo = vmin - 3.0 * bw, hi = vmax + 3.0 * bw;
  out.x.resize(G);
  out.pdf.resize(G);
  const double step = (hi - lo) / (G - 1);
  for (int g = 0; g < G; ++g) {
    const double x = lo + g * step;
    double s = 0.0;
    for (long i = 0; i < n; ++i) {
      const double zi = (x - values[i]) / bw;
      s += w[i] * std::exp(-0.5 * zi * zi);
    }
    out.x[g] = x;
    out.pdf[g] = s / (bw * std::sqrt(2.0 * M_PI));
  }
  // trapezoid normalization so the discrete grid integrates to one
  double mass = 0.0;
  for (int g = 1; g < G; ++g) mass += 0.5 * (out.pdf[g] + out.pdf[g - 1]) * step;
  if (mass > 0.0) out.pdf /= mass;
  return out;
}

// ---------------------------------------------------------------------------
// Recursive pseudo-out-of-sample harness
// ---------------------------------------------------------------------------

struct PoosSettings {
  std::vector<int> horizons = {1, 6, 12, 24};
  double initial_fraction = 0.5;  // estimation starts with this share of T
  bool use_mcmc = false;          // default estimator is the two-step VB
  std::vector<Variant> models = {Variant::QFAVAR};
  std::vector<double> eval_quantiles;  // empty -> config quantiles
  std::string checkpoint_path;         // optional CSV; reruns resume from it
};

struct PoosRecord {
  std::string model, variable;
  int origin = 0, horizon = 1;
  double quantile = 0.5, forecast = 0.0, actual = 0.0, loss = 0.0;
};

struct PoosResult {
  std::vector<PoosRecord> records;

  // group records into per-(model, variable, quantile, horizon) loss tracks
  std::vector<ScoreSeries> score_series() const {
    std::vector<ScoreSeries> out;
    for (const auto& r : records) {
      ScoreSeries* hit = nullptr;
      for (auto& s : out)
        if (s.model == r.model && s.variable == r.variable && s.horizon == r.horizon &&
            std::abs(s.quantile - r.quantile) < 1e-12) {
          hit = &s;
          break;
        }
      if (hit == nullptr) {
        out.push_back({r.model, r.variable, r.quantile, r.horizon, {}});
        hit = &out.back();
      }
      hit->losses.push_back(r.loss);
    }
    return out;
  }
};

namespace detail {

inline PanelData panel_head(const PanelData& p, int t) {
  PanelData out = p;
  out.values = p.values.topRows(t);
  out.globals = p.globals.rows() > 0 ? Matrix(p.globals.topRows(t)) : Matrix(t, 0);
  out.time_index.assign(p.time_index.begin(), p.time_index.begin() + t);
  return out;
}

inline PanelData single_series_panel(const PanelData& p, int i, int j, bool keep_globals) {
  PanelData out;
  out.values = p.values.col(p.col(i, j));
  out.globals = keep_globals && p.globals.cols() > 0 ? p.globals : Matrix(p.T(), 0);
  out.indicator_labels = {p.indicator_labels[static_cast<std::size_t>(i)]};
  out.country_labels = {p.country_labels[static_cast<std::size_t>(j)]};
  if (keep_globals) out.global_labels = p.global_labels;
  out.time_index = p.time_index;
  return out;
}

inline std::string poos_csv_line(const PoosRecord& r) {
  std::ostringstream s;
  s.precision(17);
  s << r.model << ',' << r.variable << ',' << r.origin << ',' << r.horizon << ',' << r.quantile
    << ',' << r.forecast << ',' << r.actual << ',' << r.loss;
  return s.str();
}

}  // namespace detail

inline std::string poos_csv(const PoosResult& res) {
  std::ostringstream out;
  out << "model,variable,origin,horizon,quantile,forecast,actual,loss\n";
  for (const auto& r : res.records) out << detail::poos_csv_line(r) << '\n';
  return out.str();
}

// Expanding-window evaluation: estimate on the first half, forecast the
// requested horizons, score against the realized values, append one
// observation, repeat. Completed (model, origin) pairs are checkpointed so
// an interrupted run resumes with identical results.
inline PoosResult recursive_poos(const PanelData& panel, const ModelConfig& cfg,
                                 const PoosSettings& ps) {
  const int T = panel.T();
  const int t_first = static_cast<int>(std::floor(ps.initial_fraction * T));
  if (t_first < cfg.p + 13)
    throw std::invalid_argument("recursive_poos: first estimation window is too short");
  const int h_min = *std::min_element(ps.horizons.begin(), ps.horizons.end());
  if (h_min < 1) throw std::invalid_argument("recursive_poos: horizons must be >= 1");
  const int h_max = *std::max_element(ps.horizons.begin(), ps.horizons.end());
  std::vector<double> levels = ps.eval_quantiles.empty() ? cfg.quantiles : ps.eval_quantiles;

  PoosResult out;
  std::set<std::string> done;  // "model|origin" keys already scored
  if (!ps.checkpoint_path.empty()) {
    std::ifstream in(ps.checkpoint_path);
    std::string line;
    if (in && std::getline(in, line)) {  // skip header
      while (std::getline(in, line)) {
        std::istringstream ls(line);
        PoosRecord r;
        std::string tok;
        std::getline(ls, r.model, ',');
        std::getline(ls, r.variable, ',');
        std::getline(ls, tok, ','); r.origin = std::stoi(tok);
        std::getline(ls, tok, ','); r.horizon = std::stoi(tok);
        std::getline(ls, tok, ','); r.quantile = std::stod(tok);
        std::getline(ls, tok, ','); r.forecast = std::stod(tok);
        std::getline(ls, tok, ','); r.actual = std::stod(tok);
        std::getline(ls, tok, ','); r.loss = std::stod(tok);
        out.records.push_back(r);
        done.insert(r.model + "|" + std::to_string(r.origin));
      }
    }
  }
  std::ofstream ckpt;
  if (!ps.checkpoint_path.empty()) {
    const bool fresh = done.empty();
    ckpt.open(ps.checkpoint_path, fresh ? std::ios::trunc : std::ios::app);
    if (fresh) ckpt << "model,variable,origin,horizon,quantile,forecast,actual,loss\n";
  }

  auto run_one = [&](const PanelData& window, const ModelConfig& mcfg) {
    if (ps.use_mcmc) return run_gibbs(window, mcfg).draws;
    return run_vb(window, mcfg).draws;
  };

  for (int t0 = t_first; t0 + h_min <= T; ++t0) {
    for (Variant model : ps.models) {
      const std::string mname = to_string(model);
      if (done.count(mname + "|" + std::to_string(t0))) continue;
      ModelConfig mcfg = cfg;
      mcfg.variant = model;
      std::vector<PoosRecord> fresh;

      auto score_panel = [&](const PanelData& sub) {
        const PanelData window = detail::panel_head(sub, t0);
        const PosteriorDraws post = run_one(window, mcfg);
        const ModelLayout& lo = post.layout;
        Vector y_last = window.values.row(t0 - 1).transpose();
        Vector g_last = lo.k > 0 ? Vector(window.globals.row(t0 - 1).transpose()) : Vector();
        const ForecastFan fan = forecast_quantiles(post, y_last, g_last,
                                                   std::min(h_max, T - t0), levels);
        for (int h : ps.horizons) {
          if (t0 + h > T) continue;
          for (int s = 0; s < lo.n_series(); ++s) {
            const double actual = sub.values(t0 + h - 1, s);
            for (std::size_t li = 0; li < levels.size(); ++li) {
              PoosRecord r;
              r.model = mname;
              r.variable = fan.series[static_cast<std::size_t>(s)];
              r.origin = t0;
              r.horizon = h;
              r.quantile = levels[li];
              r.forecast = fan.values[static_cast<std::size_t>(h - 1)](s, static_cast<long>(li));
              r.actual = actual;
              r.loss = quantile_score(actual, r.forecast, r.quantile);
              fresh.push_back(r);
            }
          }
        }
      };

      if ((model == Variant::QAR || model == Variant::QARX) && panel.m() * panel.n() > 1) {
        // univariate benchmarks run once per series
        for (int i = 0; i < panel.m(); ++i)
          for (int j = 0; j < panel.n(); ++j)
            score_panel(detail::single_series_panel(panel, i, j, model == Variant::QARX));
      } else {
        score_panel(panel);
      }

      for (const auto& r : fresh) {
        out.records.push_back(r);
        if (ckpt.is_open()) ckpt << detail::poos_csv_line(r) << '\n';
      }
      if (ckpt.is_open()) ckpt.flush();
    }
  }
  return out;
}

}  // namespace qfavar
