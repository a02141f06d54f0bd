#pragma once

// Model configuration: quantile grid, lag order, variant flags, prior
// hyperparameters, sampler/VB settings. JSON on disk, defaults applied
// for anything unspecified.

#include <cstdint>
#include <fstream>
#include <json.hpp>
#include <stdexcept>
#include <string>
#include <vector>

namespace qfavar {

enum class Variant { QFAVAR, QDFM, FAVAR, QAR, QARX };

inline std::string to_string(Variant v) {
  switch (v) {
    case Variant::QFAVAR: return "QFAVAR";
    case Variant::QDFM: return "QDFM";
    case Variant::FAVAR: return "FAVAR";
    case Variant::QAR: return "QAR";
    case Variant::QARX: return "QAR-X";
  }
  return "?";
}

inline Variant variant_from_string(const std::string& s) {
  if (s == "QFAVAR") return Variant::QFAVAR;
  if (s == "QDFM") return Variant::QDFM;
  if (s == "FAVAR") return Variant::FAVAR;
  if (s == "QAR") return Variant::QAR;
  if (s == "QAR-X" || s == "QARX") return Variant::QARX;
  throw std::invalid_argument("unknown variant: " + s);
}

struct McmcSettings {
  int iterations = 20000;
  int burn_in = 5000;
  int thin = 10;
  std::uint64_t seed = 1;
};

struct VbSettings {
  int max_iters = 500;
  double tolerance = 1e-6;
  std::uint64_t seed = 1;
};

struct ModelConfig {
  std::vector<double> quantiles = {0.1, 0.5, 0.9};
  int p = 6;                    // state VAR lag order
  Variant variant = Variant::QFAVAR;
  bool include_intercepts = true;
  bool include_own_lag = false;  // beta_ij(q) of the measurement equation
  bool sv = false;               // stochastic volatility in the state VAR

  // prior hyperparameters; weakly informative defaults
  double r0 = 0.01, s0 = 0.01;      // measurement scale IG
  double r_h = 0.01, s_h = 0.01;    // state variance IG
  double r_omega = 0.01, s_omega = 0.01;  // SV innovation IG
  double b_phi = 1e-4, b_psi = 1e-4;      // VB horseshoe scale
  double mu_a = 0.0, sigma_a = 10.0;      // A-matrix normal prior (mean, variance)
  double intercept_prior_var = 10.0;      // state VAR intercept
  double init_state_var = 10.0;           // diffuse smoother initialization

  McmcSettings mcmc;
  VbSettings vb;
  int horizon = 24;             // H for IRF/FEVD/forecast
  bool filter_explosive = false;  // drop spectral radius >= 1 draws downstream
  bool sign_identification = true;
  // Under SV the structural Omega uses A exp(h-bar) A' with h-bar the
  // time-average log variance; set true for the end-of-sample h_T instead.
  bool omega_end_of_sample = false;

  void validate() const {
    if (quantiles.empty()) throw std::invalid_argument("config: need at least one quantile");
    for (std::size_t i = 0; i < quantiles.size(); ++i) {
      if (!(quantiles[i] > 0.0 && quantiles[i] < 1.0))
        throw std::invalid_argument("config: quantile outside (0,1)");
      if (i > 0 && !(quantiles[i - 1] < quantiles[i]))
        throw std::invalid_argument("config: quantiles must be strictly increasing");
    }
    if (p < 1) throw std::invalid_argument("config: p must be >= 1");
    if (mcmc.burn_in >= mcmc.iterations)
      throw std::invalid_argument("config: burn_in must be < iterations");
    if (mcmc.thin < 1) throw std::invalid_argument("config: thin must be >= 1");
    if (horizon < 1) throw std::invalid_argument("config: horizon must be >= 1");
  }

  int n_quantiles() const { return static_cast<int>(quantiles.size()); }
};

inline ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  auto get = [&](const char* key, auto& target) {
    if (j.contains(key)) target = j.at(key).template get<std::decay_t<decltype(target)>>();
  };
  get("quantiles", c.quantiles);
  get("p", c.p);
  if (j.contains("variant")) c.variant = variant_from_string(j.at("variant").get<std::string>());
  get("include_intercepts", c.include_intercepts);
  get("include_own_lag", c.include_own_lag);
  get("sv", c.sv);
  get("r0", c.r0); get("s0", c.s0);
  get("r_h", c.r_h); get("s_h", c.s_h);
  get("r_omega", c.r_omega); get("s_omega", c.s_omega);
  get("b_phi", c.b_phi); get("b_psi", c.b_psi);
  get("mu_a", c.mu_a); get("sigma_a", c.sigma_a);
  get("init_state_var", c.init_state_var);
  get("horizon", c.horizon);
  get("filter_explosive", c.filter_explosive);
  get("sign_identification", c.sign_identification);
  get("omega_end_of_sample", c.omega_end_of_sample);
  get("intercept_prior_var", c.intercept_prior_var);
  if (j.contains("mcmc")) {
    const auto& m = j.at("mcmc");
    if (m.contains("iterations")) c.mcmc.iterations = m.at("iterations").get<int>();
    if (m.contains("burn_in")) c.mcmc.burn_in = m.at("burn_in").get<int>();
    if (m.contains("thin")) c.mcmc.thin = m.at("thin").get<int>();
    if (m.contains("seed")) c.mcmc.seed = m.at("seed").get<std::uint64_t>();
  }
  if (j.contains("vb")) {
    const auto& v = j.at("vb");
    if (v.contains("max_iters")) c.vb.max_iters = v.at("max_iters").get<int>();
    if (v.contains("tolerance")) c.vb.tolerance = v.at("tolerance").get<double>();
    if (v.contains("seed")) c.vb.seed = v.at("seed").get<std::uint64_t>();
  }
  c.validate();
  return c;
}

inline nlohmann::json config_to_json(const ModelConfig& c) {
  nlohmann::json j;
  j["quantiles"] = c.quantiles;
  j["p"] = c.p;
  j["variant"] = to_string(c.variant);
  j["include_intercepts"] = c.include_intercepts;
  j["include_own_lag"] = c.include_own_lag;
  j["sv"] = c.sv;
  j["r0"] = c.r0; j["s0"] = c.s0;
  j["r_h"] = c.r_h; j["s_h"] = c.s_h;
  j["r_omega"] = c.r_omega; j["s_omega"] = c.s_omega;
  j["b_phi"] = c.b_phi; j["b_psi"] = c.b_psi;
  j["mu_a"] = c.mu_a; j["sigma_a"] = c.sigma_a;
  j["init_state_var"] = c.init_state_var;
  j["horizon"] = c.horizon;
  j["filter_explosive"] = c.filter_explosive;
  j["sign_identification"] = c.sign_identification;
  j["omega_end_of_sample"] = c.omega_end_of_sample;
  j["intercept_prior_var"] = c.intercept_prior_var;
  j["mcmc"] = {{"iterations", c.mcmc.iterations}, {"burn_in", c.mcmc.burn_in},
               {"thin", c.mcmc.thin}, {"seed", c.mcmc.seed}};
  j["vb"] = {{"max_iters", c.vb.max_iters}, {"tolerance", c.vb.tolerance}, {"seed", c.vb.seed}};
  return j;
}

inline ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_config: cannot open " + path);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (content.find_first_not_of(" \t\r\n") == std::string::npos) {
    ModelConfig c;  // empty file -> benchmark defaults
    c.validate();
    return c;
  }
  return config_from_json(nlohmann::json::parse(content));
}

}  // namespace qfavar
