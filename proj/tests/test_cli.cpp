// End-to-end tests of the command-line tool: each subcommand is run as a
// child process against a small synthetic panel and its outputs are checked
// for shape, determinism, and sane exit codes.

#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

#ifndef QFAVAR_CLI_PATH
#error "QFAVAR_CLI_PATH must point at the built qfavar binary"
#endif

const std::string kCli = QFAVAR_CLI_PATH;

int run_cli(const std::string& args) {
  const std::string cmd = kCli + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

long count_lines(const fs::path& p) {
  const std::string s = slurp(p);
  long n = 0;
  for (char c : s)
    if (c == '\n') ++n;
  return n;
}

// one shared workspace per test run; simulate + estimate are reused
struct Workspace {
  fs::path root;
  Workspace() {
    root = fs::temp_directory_path() / "qfavar_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
    REQUIRE(run_cli("simulate -o " + (root / "sim").string() +
                    " --m 1 --n 3 --k 1 --T 80 --seed 4") == 0);
    REQUIRE(run_cli("estimate " + (root / "sim/panel.csv").string() + " -o " +
                    (root / "est").string() + " --method vb --seed 4") == 0);
  }
};

Workspace& ws() {
  static Workspace w;
  return w;
}

}  // namespace

TEST_CASE("simulate writes panel, truth, and manifest") {
  const fs::path sim = ws().root / "sim";
  REQUIRE(fs::exists(sim / "panel.csv"));
  REQUIRE(fs::exists(sim / "truth.json"));
  REQUIRE(fs::exists(sim / "manifest.json"));
  REQUIRE(count_lines(sim / "panel.csv") == 81);  // header + T rows
  const std::string manifest = slurp(sim / "manifest.json");
  REQUIRE(manifest.find("\"subcommand\": \"simulate\"") != std::string::npos);
  REQUIRE(manifest.find("\"seed\": 4") != std::string::npos);
}

TEST_CASE("simulate rerun with the same seed is bit-identical") {
  const fs::path again = ws().root / "sim_again";
  REQUIRE(run_cli("simulate -o " + again.string() + " --m 1 --n 3 --k 1 --T 80 --seed 4") == 0);
  REQUIRE(slurp(again / "panel.csv") == slurp(ws().root / "sim/panel.csv"));
  REQUIRE(slurp(again / "truth.json") == slurp(ws().root / "sim/truth.json"));
  REQUIRE(slurp(again / "manifest.json") == slurp(ws().root / "sim/manifest.json"));
}

TEST_CASE("estimate produces a loadable posterior and rerun is bit-identical") {
  const fs::path est = ws().root / "est";
  REQUIRE(fs::exists(est / "posterior.bin"));
  REQUIRE(fs::exists(est / "manifest.json"));
  const fs::path again = ws().root / "est_again";
  REQUIRE(run_cli("estimate " + (ws().root / "sim/panel.csv").string() + " -o " +
                  again.string() + " --method vb --seed 4 --threads 1") == 0);
  REQUIRE(slurp(again / "posterior.bin") == slurp(est / "posterior.bin"));
}

TEST_CASE("forecast emits the full quantile fan and densities") {
  const fs::path out = ws().root / "fc";
  REQUIRE(run_cli("forecast " + (ws().root / "est/posterior.bin").string() + " --data " +
                  (ws().root / "sim/panel.csv").string() + " --horizon 6 --density -o " +
                  out.string()) == 0);
  const std::string fan = slurp(out / "forecast.csv");
  REQUIRE(fan.rfind("series,quantile,horizon,value\n", 0) == 0);
  // 3 series x 3 quantiles x 6 horizons + header
  REQUIRE(count_lines(out / "forecast.csv") == 55);
  REQUIRE(fs::exists(out / "density.csv"));
  REQUIRE(count_lines(out / "density.csv") > 100);
}

TEST_CASE("irf covers all shocks by default and accepts a named shock") {
  const fs::path all = ws().root / "irf_all";
  REQUIRE(run_cli("irf " + (ws().root / "est/posterior.bin").string() + " --horizon 8 -o " +
                  all.string()) == 0);
  const std::string csv = slurp(all / "irf.csv");
  REQUIRE(csv.rfind("shock,target,level,horizon,median,lo16,hi84\n", 0) == 0);
  // l=4 shocks x (l state + 9 variable targets) x 9 horizons + header
  REQUIRE(count_lines(all / "irf.csv") == 1 + 4 * (4 + 9) * 9);

  const fs::path one = ws().root / "irf_one";
  REQUIRE(run_cli("irf " + (ws().root / "est/posterior.bin").string() +
                  " --shock F.IND1.q0.5 --horizon 8 -o " + one.string()) == 0);
  REQUIRE(count_lines(one / "irf.csv") == 1 + (4 + 9) * 9);
  REQUIRE(run_cli("irf " + (ws().root / "est/posterior.bin").string() +
                  " --shock NOPE -o " + (ws().root / "irf_bad").string()) == 1);
}

TEST_CASE("fevd and connect produce consistent networks") {
  const fs::path fevd = ws().root / "fevd";
  REQUIRE(run_cli("fevd " + (ws().root / "est/posterior.bin").string() + " --horizon 8 -o " +
                  fevd.string()) == 0);
  REQUIRE(slurp(fevd / "fevd.csv")
              .rfind("target,shock,level,horizon,share_raw,share_normalized\n", 0) == 0);

  const fs::path conn = ws().root / "conn";
  REQUIRE(run_cli("connect " + (ws().root / "est/posterior.bin").string() +
                  " --horizon 8 --threshold 0.05 -o " + conn.string()) == 0);
  REQUIRE(fs::exists(conn / "edges.csv"));
  REQUIRE(slurp(conn / "graph.dot").rfind("digraph", 0) == 0);
  // adjacency is (9 variables + 4 states) square plus header row/column
  REQUIRE(count_lines(conn / "adjacency.csv") == 14);

  // raising the threshold can only drop edges
  const fs::path high = ws().root / "conn_high";
  REQUIRE(run_cli("connect " + (ws().root / "est/posterior.bin").string() +
                  " --horizon 8 --threshold 0.5 -o " + high.string()) == 0);
  REQUIRE(count_lines(high / "edges.csv") <= count_lines(conn / "edges.csv"));
}

TEST_CASE("poos then evaluate round-trips scores into a report") {
  const fs::path cfg = ws().root / "cfg.json";
  {
    std::ofstream out(cfg);
    out << R"({"p":2,"quantiles":[0.1,0.5,0.9],"vb":{"max_iters":60,"tolerance":1e-5,"seed":3}})";
  }
  const fs::path poos = ws().root / "poos";
  REQUIRE(run_cli("poos " + (ws().root / "sim/panel.csv").string() + " -c " + cfg.string() +
                  " -o " + poos.string() + " --models QFAVAR QAR --fraction 0.7 --horizons 1") ==
          0);
  const std::string scores = slurp(poos / "scores.csv");
  REQUIRE(scores.rfind("model,variable,origin,horizon,quantile,forecast,actual,loss\n", 0) == 0);
  // 2 models x 24 origins x 3 series x 3 quantiles + header
  REQUIRE(count_lines(poos / "scores.csv") == 1 + 2 * 24 * 9);

  const fs::path eval = ws().root / "eval";
  REQUIRE(run_cli("evaluate --scores " + (poos / "scores.csv").string() +
                  " --model-a QFAVAR --model-b QAR --posterior " +
                  (ws().root / "est/posterior.bin").string() + " --data " +
                  (ws().root / "sim/panel.csv").string() + " -o " + eval.string()) == 0);
  const std::string report = slurp(eval / "dm_report.csv");
  REQUIRE(report.find("variable") != std::string::npos);
  REQUIRE(count_lines(eval / "dm_report.csv") >= 2);  // header + at least one variable row
  REQUIRE(count_lines(eval / "commonality.csv") == 4);
}

TEST_CASE("exit codes distinguish usage errors from module errors") {
  REQUIRE(run_cli("--definitely-not-a-flag") == 2);
  REQUIRE(run_cli("estimate") == 2);  // missing required positional
  REQUIRE(run_cli("estimate /no/such/file.csv -o " + (ws().root / "x").string()) == 1);
  REQUIRE(run_cli("evaluate -o " + (ws().root / "x").string()) == 1);  // nothing to do
  REQUIRE(run_cli("--help") == 0);
}
