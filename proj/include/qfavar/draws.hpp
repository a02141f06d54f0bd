#pragma once

// Posterior output container shared by the Gibbs sampler and the
// variational estimator, with a binary draw file ("QFPD" magic) and a JSON
// sidecar carrying dimensions, labels, configuration and provenance of the
// run (seed, estimation method).

#include <Eigen/Dense>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qfavar/config.hpp"
#include "qfavar/layout.hpp"
#include "qfavar/shrinkage.hpp"

namespace qfavar {

struct ParameterDraw {
  Matrix meas_coeffs;  // n_meas x coeff_width: [c, beta, lambda, gamma...]
  Vector sigma;        // n_meas AL scales
  Matrix psi;          // l x (l*p) state VAR lag coefficients
  Vector v;            // l state VAR intercept
  Matrix A;            // l x l unit lower triangular contemporaneous matrix
  Matrix h;            // T x l log innovation variances
  Matrix F;            // T x l state path
};

struct PosteriorDraws {
  ModelLayout layout;
  ModelConfig config;
  std::vector<std::string> indicator_labels, country_labels, global_labels, time_index;
  std::string method;  // "mcmc" or "vb"
  std::uint64_t seed = 0;
  int T = 0;
  std::vector<ParameterDraw> draws;
  // VB only: posterior variances aligned with draws[0]
  std::vector<ParameterDraw> variances;

  int n_draws() const { return static_cast<int>(draws.size()); }

  // time-t innovation covariance Omega_t = A H_t A' of draw d
  Matrix omega_at(const ParameterDraw& d, int t) const {
    return d.A * d.h.row(t).transpose().array().exp().matrix().asDiagonal() * d.A.transpose();
  }
};

namespace detail {

inline void write_matrix(std::ofstream& out, const Matrix& m) {
  const std::int64_t r = m.rows(), c = m.cols();
  out.write(reinterpret_cast<const char*>(&r), sizeof(r));
  out.write(reinterpret_cast<const char*>(&c), sizeof(c));
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j) {
      const double x = m(i, j);
      out.write(reinterpret_cast<const char*>(&x), sizeof(x));
    }
}

inline Matrix read_matrix(std::ifstream& in) {
  std::int64_t r = 0, c = 0;
  in.read(reinterpret_cast<char*>(&r), sizeof(r));
  in.read(reinterpret_cast<char*>(&c), sizeof(c));
  if (!in || r < 0 || c < 0 || r > (1 << 28) || c > (1 << 28))
    throw std::runtime_error("draw file: corrupt matrix header");
  Matrix m(r, c);
  for (std::int64_t i = 0; i < r; ++i)
    for (std::int64_t j = 0; j < c; ++j) {
      double x;
      in.read(reinterpret_cast<char*>(&x), sizeof(x));
      m(i, j) = x;
    }
  if (!in) throw std::runtime_error("draw file: truncated matrix payload");
  return m;
}

inline void write_draw(std::ofstream& out, const ParameterDraw& d) {
  write_matrix(out, d.meas_coeffs);
  write_matrix(out, d.sigma);
  write_matrix(out, d.psi);
  write_matrix(out, d.v);
  write_matrix(out, d.A);
  write_matrix(out, d.h);
  write_matrix(out, d.F);
}

inline ParameterDraw read_draw(std::ifstream& in) {
  ParameterDraw d;
  d.meas_coeffs = read_matrix(in);
  d.sigma = read_matrix(in);
  d.psi = read_matrix(in);
  d.v = read_matrix(in);
  d.A = read_matrix(in);
  d.h = read_matrix(in);
  d.F = read_matrix(in);
  return d;
}

inline nlohmann::json layout_to_json(const ModelLayout& lo) {
  return {{"m", lo.m},   {"n", lo.n},   {"k", lo.k},
          {"R", lo.R},   {"p", lo.p},   {"quantiles", lo.quantiles},
          {"intercepts", lo.intercepts}, {"own_lag", lo.own_lag},
          {"has_factors", lo.has_factors}, {"gaussian", lo.gaussian}};
}

inline ModelLayout layout_from_json(const nlohmann::json& j) {
  ModelLayout lo;
  lo.m = j.at("m").get<int>();
  lo.n = j.at("n").get<int>();
  lo.k = j.at("k").get<int>();
  lo.R = j.at("R").get<int>();
  lo.p = j.at("p").get<int>();
  lo.quantiles = j.at("quantiles").get<std::vector<double>>();
  lo.intercepts = j.at("intercepts").get<bool>();
  lo.own_lag = j.at("own_lag").get<bool>();
  lo.has_factors = j.at("has_factors").get<bool>();
  lo.gaussian = j.value("gaussian", false);
  return lo;
}

}  // namespace detail

inline void save_draws(const PosteriorDraws& pd, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("save_draws: cannot write " + path);
  out.write("QFPD", 4);
  const std::int64_t version = 1, n = pd.n_draws(), nv = static_cast<std::int64_t>(pd.variances.size());
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&n), sizeof(n));
  out.write(reinterpret_cast<const char*>(&nv), sizeof(nv));
  for (const auto& d : pd.draws) detail::write_draw(out, d);
  for (const auto& d : pd.variances) detail::write_draw(out, d);
  if (!out) throw std::runtime_error("save_draws: write failure on " + path);

  nlohmann::json j;
  j["layout"] = detail::layout_to_json(pd.layout);
  j["config"] = config_to_json(pd.config);
  j["indicator_labels"] = pd.indicator_labels;
  j["country_labels"] = pd.country_labels;
  j["global_labels"] = pd.global_labels;
  j["time_index"] = pd.time_index;
  j["method"] = pd.method;
  j["seed"] = pd.seed;
  j["T"] = pd.T;
  j["n_draws"] = pd.n_draws();
  std::ofstream side(path + ".json");
  if (!side) throw std::runtime_error("save_draws: cannot write " + path + ".json");
  side << j.dump(2) << "\n";
}

inline PosteriorDraws load_draws(const std::string& path) {
  std::ifstream side(path + ".json");
  if (!side) throw std::runtime_error("load_draws: cannot open " + path + ".json");
  nlohmann::json j;
  side >> j;

  PosteriorDraws pd;
  pd.layout = detail::layout_from_json(j.at("layout"));
  pd.config = config_from_json(j.at("config"));
  pd.indicator_labels = j.at("indicator_labels").get<std::vector<std::string>>();
  pd.country_labels = j.at("country_labels").get<std::vector<std::string>>();
  pd.global_labels = j.at("global_labels").get<std::vector<std::string>>();
  pd.time_index = j.at("time_index").get<std::vector<std::string>>();
  pd.method = j.at("method").get<std::string>();
  pd.seed = j.at("seed").get<std::uint64_t>();
  pd.T = j.at("T").get<int>();

  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("load_draws: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != "QFPD")
    throw std::runtime_error("load_draws: bad magic in " + path);
  std::int64_t version = 0, n = 0, nv = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&n), sizeof(n));
  in.read(reinterpret_cast<char*>(&nv), sizeof(nv));
  if (!in || version != 1 || n < 0 || nv < 0)
    throw std::runtime_error("load_draws: bad header in " + path);
  pd.draws.reserve(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i) pd.draws.push_back(detail::read_draw(in));
  for (std::int64_t i = 0; i < nv; ++i) pd.variances.push_back(detail::read_draw(in));
  return pd;
}

}  // namespace qfavar
