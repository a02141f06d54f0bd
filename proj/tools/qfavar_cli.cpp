// Command-line front end: simulate synthetic panels, estimate the model by
// MCMC or two-step VB, and turn stored posterior draws into forecasts,
// impulse responses, variance decompositions, connectedness networks, and
// out-of-sample score reports. Every run writes a manifest.json next to its
// outputs so it can be reproduced exactly.

#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qfavar/evaluate.hpp"
#include "qfavar/forecast.hpp"
#include "qfavar/gibbs.hpp"
#include "qfavar/simulate.hpp"
#include "qfavar/structural.hpp"
#include "qfavar/vb.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace qfavar;

namespace {

constexpr const char* kVersion = "0.1.0";

struct CommonArgs {
  std::string out_dir;
  std::string config_path;
  int threads = 0;  // 0 -> resolve from QFAVAR_THREADS, else 1
};

int resolve_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("QFAVAR_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return 1;
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (long i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (long j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

// manifest: everything needed to reproduce the run byte-for-byte
void write_manifest(const fs::path& out_dir, const std::string& subcommand,
                    const ModelConfig& cfg, int threads, std::uint64_t seed,
                    const std::vector<std::string>& inputs,
                    const std::vector<std::string>& outputs, const json& extra = json::object()) {
  json m;
  m["tool"] = "qfavar";
  m["version"] = kVersion;
  m["subcommand"] = subcommand;
  m["config"] = config_to_json(cfg);
  m["config_hash"] = std::hash<std::string>{}(config_to_json(cfg).dump());
  m["threads"] = threads;
  m["seed"] = seed;
  m["inputs"] = inputs;
  m["outputs"] = outputs;
  m["extra"] = extra;
  write_text(out_dir / "manifest.json", m.dump(2) + "\n");
}

ModelConfig load_config_or_default(const std::string& path) {
  if (path.empty()) return ModelConfig{};
  return load_config(path);
}

fs::path make_out_dir(const std::string& dir) {
  fs::path p = dir.empty() ? fs::path(".") : fs::path(dir);
  fs::create_directories(p);
  return p;
}

int run_simulate(const CommonArgs& common, SimSettings& sim) {
  const fs::path out = make_out_dir(common.out_dir);
  Rng rng(sim.seed);
  const SimResult res = simulate_qfavar(sim, rng);
  save_panel(res.panel, (out / "panel.csv").string());

  json truth;
  truth["seed"] = sim.seed;
  truth["quantiles"] = sim.quantiles;
  truth["factors"] = matrix_to_json(res.truth.factors);
  truth["base_factors"] = matrix_to_json(res.truth.base_factors);
  truth["meas_coeffs"] = matrix_to_json(res.truth.meas_coeffs);
  truth["sigma"] = std::vector<double>(res.truth.sigma.data(),
                                       res.truth.sigma.data() + res.truth.sigma.size());
  truth["phi_base"] = matrix_to_json(res.truth.phi_base);
  truth["v_base"] = std::vector<double>(res.truth.v_base.data(),
                                        res.truth.v_base.data() + res.truth.v_base.size());
  truth["cov_base"] = matrix_to_json(res.truth.cov_base);
  truth["delta"] = res.truth.delta;
  write_text(out / "truth.json", truth.dump(2) + "\n");

  ModelConfig cfg;
  cfg.quantiles = sim.quantiles;
  cfg.p = sim.p;
  json extra;
  extra["sim"] = {{"m", sim.m}, {"n", sim.n}, {"k", sim.k}, {"T", sim.T},
                  {"sigma_meas", sim.sigma_meas}, {"noise_skew_q", sim.noise_skew_q}};
  write_manifest(out, "simulate", cfg, resolve_threads(common.threads), sim.seed, {},
                 {"panel.csv", "truth.json"}, extra);
  std::cout << "wrote " << (out / "panel.csv").string() << " (" << sim.T << " x "
            << sim.m * sim.n << " panel, " << sim.k << " globals)\n";
  return 0;
}

int run_estimate(const CommonArgs& common, const std::string& data_path,
                 const std::string& method, const std::string& variant,
                 const std::vector<double>& quantiles, std::uint64_t seed_override) {
  const fs::path out = make_out_dir(common.out_dir);
  ModelConfig cfg = load_config_or_default(common.config_path);
  if (!variant.empty()) cfg.variant = variant_from_string(variant);
  if (!quantiles.empty()) cfg.quantiles = quantiles;
  if (seed_override != 0) {
    cfg.mcmc.seed = seed_override;
    cfg.vb.seed = seed_override;
  }
  cfg.validate();
  const PanelData panel = load_panel(data_path);

  PosteriorDraws draws;
  if (method == "vb") {
    const VbResult res = run_vb(panel, cfg);
    draws = res.draws;
    std::cout << "vb: " << res.iterations << " sweeps, converged=" << res.converged
              << ", quantile-order fraction=" << res.quantile_order_fraction << "\n";
  } else if (method == "mcmc") {
    const GibbsResult res = run_gibbs(panel, cfg);
    draws = res.draws;
    std::cout << "mcmc: kept " << draws.n_draws() << " draws\n";
  } else {
    throw std::invalid_argument("estimate: method must be vb or mcmc");
  }
  save_draws(draws, (out / "posterior.bin").string());
  write_manifest(out, "estimate", cfg, resolve_threads(common.threads),
                 method == "vb" ? cfg.vb.seed : cfg.mcmc.seed, {data_path},
                 {"posterior.bin"}, json{{"method", method}});
  std::cout << "wrote " << (out / "posterior.bin").string() << "\n";
  return 0;
}

int run_forecast(const CommonArgs& common, const std::string& posterior_path,
                 const std::string& data_path, int horizon, bool densities) {
  const fs::path out = make_out_dir(common.out_dir);
  const PosteriorDraws post = load_draws(posterior_path);
  const PanelData panel = load_panel(data_path);
  const int H = horizon > 0 ? horizon : post.config.horizon;
  const Vector y_last = panel.values.row(panel.T() - 1).transpose();
  const Vector g_last =
      panel.globals.cols() > 0 ? Vector(panel.globals.row(panel.T() - 1).transpose()) : Vector();
  const ForecastFan fan = forecast_quantiles(post, y_last, g_last, H);
  write_text(out / "forecast.csv", forecast_csv(fan));
  std::vector<std::string> outputs = {"forecast.csv"};

  if (densities && fan.levels.size() >= 2) {
    std::ostringstream dens;
    dens << "series,horizon,x,pdf\n";
    for (int h = 1; h <= fan.H; ++h)
      for (std::size_t s = 0; s < fan.series.size(); ++s) {
        const Vector vals = fan.values[static_cast<std::size_t>(h - 1)]
                                .row(static_cast<long>(s)).transpose();
        const DensityGrid g = density_from_quantiles(fan.levels, vals);
        for (long i = 0; i < g.x.size(); ++i)
          dens << fan.series[s] << ',' << h << ',' << g.x[i] << ',' << g.pdf[i] << '\n';
      }
    write_text(out / "density.csv", dens.str());
    outputs.push_back("density.csv");
  }
  write_manifest(out, "forecast", post.config, resolve_threads(common.threads), post.seed,
                 {posterior_path, data_path}, outputs, json{{"horizon", H}});
  std::cout << "wrote " << (out / "forecast.csv").string() << " (H=" << H << ")\n";
  return 0;
}

int run_irf(const CommonArgs& common, const std::string& posterior_path,
            const std::string& shock, int horizon) {
  const fs::path out = make_out_dir(common.out_dir);
  const PosteriorDraws post = load_draws(posterior_path);
  const int H = horizon > 0 ? horizon : post.config.horizon;
  const auto snames = state_labels(post);
  const auto vnames = measurement_labels(post);

  std::vector<int> shocks;
  if (shock.empty()) {
    for (int j = 0; j < post.layout.state_dim(); ++j) shocks.push_back(j);
  } else {
    int idx = -1;
    for (std::size_t j = 0; j < snames.size(); ++j)
      if (snames[j] == shock) idx = static_cast<int>(j);
    if (idx < 0) {
      try {
        idx = std::stoi(shock);
      } catch (...) {
        throw std::invalid_argument("irf: unknown shock '" + shock + "'");
      }
    }
    shocks.push_back(idx);
  }
  std::ostringstream all;
  bool first = true;
  for (int j : shocks) {
    const IrfResult r = girf(post, j, H);
    std::string csv = irf_csv(r, snames[static_cast<std::size_t>(j)], snames, vnames);
    if (!first) csv.erase(0, csv.find('\n') + 1);  // keep a single header
    all << csv;
    first = false;
  }
  write_text(out / "irf.csv", all.str());
  write_manifest(out, "irf", post.config, resolve_threads(common.threads), post.seed,
                 {posterior_path}, {"irf.csv"},
                 json{{"horizon", H}, {"shock", shock.empty() ? "all" : shock}});
  std::cout << "wrote " << (out / "irf.csv").string() << " (" << shocks.size() << " shocks, H="
            << H << ")\n";
  return 0;
}

int run_fevd(const CommonArgs& common, const std::string& posterior_path, int horizon) {
  const fs::path out = make_out_dir(common.out_dir);
  const PosteriorDraws post = load_draws(posterior_path);
  const int H = horizon > 0 ? horizon : post.config.horizon;
  const FevdResult f = gfevd(post, H);
  write_text(out / "fevd.csv", fevd_csv(f, state_labels(post), measurement_labels(post)));
  write_manifest(out, "fevd", post.config, resolve_threads(common.threads), post.seed,
                 {posterior_path}, {"fevd.csv"}, json{{"horizon", H}});
  std::cout << "wrote " << (out / "fevd.csv").string() << " (H=" << H << ")\n";
  return 0;
}

int run_connect(const CommonArgs& common, const std::string& posterior_path, int horizon,
                double threshold) {
  const fs::path out = make_out_dir(common.out_dir);
  const PosteriorDraws post = load_draws(posterior_path);
  const int H = horizon > 0 ? horizon : post.config.horizon;
  const FevdResult f = gfevd(post, H);
  const auto conn = connectedness(f.var_norm.back(), f.state_norm.back(), threshold,
                                  measurement_labels(post), state_labels(post));
  write_text(out / "edges.csv", connectedness_edge_csv(conn));
  write_text(out / "graph.dot", connectedness_dot(conn));
  std::ostringstream adj;
  adj << "node";
  for (const auto& l : conn.labels) adj << ',' << l;
  adj << '\n';
  for (long i = 0; i < conn.adjacency.rows(); ++i) {
    adj << conn.labels[static_cast<std::size_t>(i)];
    for (long j = 0; j < conn.adjacency.cols(); ++j) adj << ',' << conn.adjacency(i, j);
    adj << '\n';
  }
  write_text(out / "adjacency.csv", adj.str());
  write_manifest(out, "connect", post.config, resolve_threads(common.threads), post.seed,
                 {posterior_path}, {"edges.csv", "graph.dot", "adjacency.csv"},
                 json{{"horizon", H}, {"threshold", threshold}});
  std::cout << "wrote " << conn.edges.size() << " edges to " << (out / "edges.csv").string()
            << "\n";
  return 0;
}

std::vector<PoosRecord> read_scores_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scores file " + path);
  std::vector<PoosRecord> records;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
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
    records.push_back(r);
  }
  return records;
}

int run_evaluate(const CommonArgs& common, const std::string& scores_path,
                 const std::string& model_a, const std::string& model_b,
                 const std::string& posterior_path, const std::string& data_path) {
  const fs::path out = make_out_dir(common.out_dir);
  std::vector<std::string> outputs;
  ModelConfig cfg;

  if (!scores_path.empty()) {
    const auto records = read_scores_csv(scores_path);
    // align losses of the two models by (variable, quantile, horizon, origin)
    std::map<std::string, std::vector<DmCell>> rows;
    std::map<std::tuple<std::string, double, int>, std::map<int, std::pair<double, double>>>
        cells;
    std::map<std::tuple<std::string, double, int>, std::pair<bool, bool>> seen;
    for (const auto& r : records) {
      if (r.model != model_a && r.model != model_b) continue;
      auto& cell = cells[{r.variable, r.quantile, r.horizon}][r.origin];
      if (r.model == model_a) cell.first = r.loss;
      else cell.second = r.loss;
      auto& s = seen[{r.variable, r.quantile, r.horizon}];
      (r.model == model_a ? s.first : s.second) = true;
    }
    for (const auto& [key, origins] : cells) {
      const auto& s = seen[key];
      if (!s.first || !s.second) continue;
      Vector la(static_cast<long>(origins.size())), lb(static_cast<long>(origins.size()));
      long t = 0;
      for (const auto& [origin, losses] : origins) {
        la[t] = losses.first;
        lb[t] = losses.second;
        ++t;
      }
      const auto& [variable, q, h] = key;
      double tstat = 0.0;
      try {
        tstat = dm_tstat(la, lb, h);
      } catch (const std::exception&) {
        continue;  // too few common origins or degenerate differential
      }
      rows[variable].push_back({q, h, tstat});
    }
    write_text(out / "dm_report.csv", dm_report_csv(rows));
    outputs.push_back("dm_report.csv");
    std::cout << "wrote " << (out / "dm_report.csv").string() << " (" << model_a << " vs "
              << model_b << "; negative favors " << model_a << ")\n";
  }

  if (!posterior_path.empty() && !data_path.empty()) {
    const PosteriorDraws post = load_draws(posterior_path);
    cfg = post.config;
    const PanelData panel = load_panel(data_path);
    // posterior-mean factor paths explain this share of each series
    Matrix fbar = Matrix::Zero(post.T, post.layout.n_factors());
    for (const auto& d : post.draws) fbar += d.F.leftCols(post.layout.n_factors());
    fbar /= static_cast<double>(post.draws.size());
    std::ostringstream cr;
    cr << "series,commonality_r2\n";
    for (int s = 0; s < post.layout.n_series(); ++s)
      cr << panel.series_label(s) << ','
         << commonality_r2(panel.values.col(s), fbar) << '\n';
    write_text(out / "commonality.csv", cr.str());
    outputs.push_back("commonality.csv");
    std::cout << "wrote " << (out / "commonality.csv").string() << "\n";
  }
  if (outputs.empty())
    throw std::invalid_argument("evaluate: provide --scores and/or --posterior with --data");
  write_manifest(out, "evaluate", cfg, resolve_threads(common.threads), 0,
                 {scores_path, posterior_path, data_path}, outputs,
                 json{{"model_a", model_a}, {"model_b", model_b}});
  return 0;
}

int run_poos(const CommonArgs& common, const std::string& data_path,
             const std::vector<std::string>& models, const std::vector<int>& horizons,
             double fraction, const std::string& method) {
  const fs::path out = make_out_dir(common.out_dir);
  ModelConfig cfg = load_config_or_default(common.config_path);
  const PanelData panel = load_panel(data_path);
  PoosSettings ps;
  if (!horizons.empty()) ps.horizons = horizons;
  ps.initial_fraction = fraction;
  ps.use_mcmc = method == "mcmc";
  if (!models.empty()) {
    ps.models.clear();
    for (const auto& m : models) ps.models.push_back(variant_from_string(m));
  }
  ps.checkpoint_path = (out / "scores.csv").string();  // doubles as the output
  const PoosResult res = recursive_poos(panel, cfg, ps);
  write_manifest(out, "poos", cfg, resolve_threads(common.threads),
                 ps.use_mcmc ? cfg.mcmc.seed : cfg.vb.seed, {data_path}, {"scores.csv"},
                 json{{"models", models}, {"horizons", ps.horizons},
                      {"initial_fraction", fraction}, {"method", method}});
  std::cout << "wrote " << res.records.size() << " score records to "
            << (out / "scores.csv").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian quantile factor-augmented VAR toolkit"};
  app.require_subcommand(1);

  CommonArgs common;
  SimSettings sim;
  std::string data_path, posterior_path, method = "vb", variant, shock;
  std::string scores_path, model_a = "QFAVAR", model_b = "QAR";
  std::vector<double> quantiles;
  std::vector<std::string> models;
  std::vector<int> horizons;
  std::uint64_t seed = 0;
  int horizon = 0;
  double threshold = 0.05, fraction = 0.5;
  bool densities = false;

  auto add_common = [&](CLI::App* sub, bool with_config = true) {
    sub->add_option("-o,--out", common.out_dir, "output directory");
    sub->add_option("--threads", common.threads,
                    "worker threads (default: QFAVAR_THREADS env or 1)");
    if (with_config) sub->add_option("-c,--config", common.config_path, "model config JSON");
  };

  auto* s_sim = app.add_subcommand("simulate", "generate a synthetic panel with known truth");
  add_common(s_sim, false);
  s_sim->add_option("--m", sim.m, "indicators");
  s_sim->add_option("--n", sim.n, "countries");
  s_sim->add_option("--k", sim.k, "global variables");
  s_sim->add_option("--T", sim.T, "sample length");
  s_sim->add_option("--p", sim.p, "VAR lag order");
  s_sim->add_option("--seed", sim.seed, "rng seed");
  s_sim->add_option("--quantiles", sim.quantiles, "quantile grid");
  s_sim->add_option("--sigma-meas", sim.sigma_meas, "measurement noise scale");
  s_sim->add_option("--noise-skew-q", sim.noise_skew_q,
                    "quantile index of the generating noise (0.5 = symmetric)");

  auto* s_est = app.add_subcommand("estimate", "estimate the model on a panel CSV");
  add_common(s_est);
  s_est->add_option("data", data_path, "panel CSV")->required();
  s_est->add_option("--method", method, "vb or mcmc")->check(CLI::IsMember({"vb", "mcmc"}));
  s_est->add_option("--variant", variant, "QFAVAR, QDFM, FAVAR, QAR, QAR-X");
  s_est->add_option("--quantiles", quantiles, "quantile grid override");
  s_est->add_option("--seed", seed, "seed override");

  auto* s_fc = app.add_subcommand("forecast", "quantile forecasts from stored draws");
  add_common(s_fc, false);
  s_fc->add_option("posterior", posterior_path, "posterior.bin")->required();
  s_fc->add_option("--data", data_path, "panel CSV (for final observations)")->required();
  s_fc->add_option("--horizon", horizon, "forecast horizon");
  s_fc->add_flag("--density", densities, "also emit smoothed density grids");

  auto* s_irf = app.add_subcommand("irf", "generalized impulse responses");
  add_common(s_irf, false);
  s_irf->add_option("posterior", posterior_path, "posterior.bin")->required();
  s_irf->add_option("--shock", shock, "state label or index (default: all)");
  s_irf->add_option("--horizon", horizon, "IRF horizon");

  auto* s_fevd = app.add_subcommand("fevd", "generalized variance decompositions");
  add_common(s_fevd, false);
  s_fevd->add_option("posterior", posterior_path, "posterior.bin")->required();
  s_fevd->add_option("--horizon", horizon, "FEVD horizon");

  auto* s_conn = app.add_subcommand("connect", "connectedness network from FEVD shares");
  add_common(s_conn, false);
  s_conn->add_option("posterior", posterior_path, "posterior.bin")->required();
  s_conn->add_option("--horizon", horizon, "FEVD horizon");
  s_conn->add_option("--threshold", threshold, "minimum edge weight (default 0.05)");

  auto* s_eval = app.add_subcommand("evaluate", "score reports and commonality");
  add_common(s_eval, false);
  s_eval->add_option("--scores", scores_path, "poos scores.csv");
  s_eval->add_option("--model-a", model_a, "first model in the comparison");
  s_eval->add_option("--model-b", model_b, "second model in the comparison");
  s_eval->add_option("--posterior", posterior_path, "posterior.bin for commonality");
  s_eval->add_option("--data", data_path, "panel CSV for commonality");

  auto* s_poos = app.add_subcommand("poos", "recursive pseudo-out-of-sample evaluation");
  add_common(s_poos);
  s_poos->add_option("data", data_path, "panel CSV")->required();
  s_poos->add_option("--models", models, "model variants to run");
  s_poos->add_option("--horizons", horizons, "forecast horizons");
  s_poos->add_option("--fraction", fraction, "initial estimation share of T");
  s_poos->add_option("--method", method, "vb or mcmc")->check(CLI::IsMember({"vb", "mcmc"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (s_sim->parsed()) return run_simulate(common, sim);
    if (s_est->parsed()) return run_estimate(common, data_path, method, variant, quantiles, seed);
    if (s_fc->parsed()) return run_forecast(common, posterior_path, data_path, horizon, densities);
    if (s_irf->parsed()) return run_irf(common, posterior_path, shock, horizon);
    if (s_fevd->parsed()) return run_fevd(common, posterior_path, horizon);
    if (s_conn->parsed()) return run_connect(common, posterior_path, horizon, threshold);
    if (s_eval->parsed())
      return run_evaluate(common, scores_path, model_a, model_b, posterior_path, data_path);
    if (s_poos->parsed())
      return run_poos(common, data_path, models, horizons, fraction, method);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
