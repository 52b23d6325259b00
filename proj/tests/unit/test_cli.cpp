#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "mbrl/config.hpp"

namespace fs = std::filesystem;
using mbrl::Json;
using mbrl::cli::run;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("mbrl_cli_" + name);
  fs::remove_all(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

Json manifest(const fs::path& dir) { return Json::parse(slurp(dir / "manifest.json")); }

const std::vector<std::string> kTiny{"--n-outer", "2",   "--n-inner",      "1",    "--n-model",      "5",
                                     "--n-policy", "2",  "--n-collect",    "400",  "--n-trpo",       "400",
                                     "--model-hidden", "16,16", "--policy-hidden", "8", "--value-hidden", "8",
                                     "--eval-episodes", "2"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
  head.insert(head.end(), tail.begin(), tail.end());
  return head;
}

}  // namespace

TEST_CASE("verify writes one checked row per inequality") {
  const fs::path dir = fresh_dir("verify");
  CHECK(run({"verify", "--suite", "divergence", "--seed", "7", "--instances", "20", "--out", dir.string()}) == 0);
  const auto rows = lines(dir / "verify_divergence.csv");
  REQUIRE(rows.size() > 20);
  CHECK(rows[0] == mbrl::cli::kVerifyHeader);
  CHECK(rows[1].rfind("kl<=chi2,7000000,", 0) == 0);
  const Json m = manifest(dir);
  CHECK(m["subcommand"] == "verify");
  CHECK(m["seed"] == 7);
  CHECK(m["summary"]["pass"] == true);
  CHECK(mbrl::to_json(mbrl::manifest_from_json(m)) == m);
}

TEST_CASE("failed assertions exit with one") {
  const fs::path dir = fresh_dir("verify_fail");
  CHECK(run({"verify", "--suite", "telescoping", "--instances", "3", "--tol", "-1", "--out", dir.string()}) == 1);
  CHECK(manifest(dir)["summary"]["pass"] == false);
}

TEST_CASE("meta emits a monotone trace") {
  const fs::path dir = fresh_dir("meta");
  CHECK(run({"meta", "--states", "5", "--actions", "3", "--iters", "25", "--bound", "G", "--out", dir.string()}) == 0);
  const auto rows = lines(dir / "meta_trace.csv");
  REQUIRE(rows.size() == 27);
  CHECK(rows[0] == mbrl::cli::kMetaHeader);
  double prev = -1e300;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const double v = std::stod(rows[i].substr(rows[i].find(',') + 1));
    CHECK(v >= prev - 1e-9);
    prev = v;
  }
  const Json m = manifest(dir);
  CHECK(m["config"]["bound"] == "G");
  CHECK(m["config"]["iters"] == 25);
  for (const char* bound : {"chi", "norm"})
    CHECK(run({"meta", "--bound", bound, "--iters", "5", "--out", dir.string()}) == 0);
}

TEST_CASE("slbo writes one trace per seed and is bit-identical on rerun") {
  const fs::path a = fresh_dir("slbo_a"), b = fresh_dir("slbo_b");
  CHECK(run(with({"slbo", "--env", "lqr2", "--seeds", "2", "--out", a.string()}, kTiny)) == 0);
  CHECK(run(with({"slbo", "--env", "lqr2", "--seeds", "2", "--out", b.string()}, kTiny)) == 0);
  for (const char* f : {"trace_seed0.csv", "trace_seed1.csv"}) {
    CHECK(first_line(a / f) == mbrl::cli::kTraceHeader);
    CHECK(lines(a / f).size() == 3);
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const Json m = manifest(a);
  CHECK(m["summary"]["runs"].size() == 2);
  CHECK(m["summary"]["runs"][0]["real_samples"] == 800);
  CHECK(m["config"]["n_outer"] == 2);
  CHECK(m["config"]["env"] == "lqr2");
}

TEST_CASE("flags override the config file which overrides defaults") {
  const fs::path dir = fresh_dir("precedence");
  fs::create_directories(dir);
  const fs::path cfg = dir / "cfg.json";
  std::ofstream(cfg) << R"({"H": 4, "n_outer": 1, "n_model": 3, "seed": 5})";
  CHECK(run(with({"slbo", "--config", cfg.string(), "--n-model", "4", "--out", dir.string()},
                 {"--n-inner", "1", "--n-policy", "1", "--n-collect", "200", "--n-trpo", "200", "--model-hidden", "8",
                  "--eval-episodes", "1"})) == 0);
  const Json c = manifest(dir)["config"];
  CHECK(c["H"] == 4);
  CHECK(c["n_model"] == 4);
  CHECK(c["seed"] == 5);
  CHECK(c["gamma"] == 0.99);
  CHECK(fs::exists(dir / "trace_seed5.csv"));
}

TEST_CASE("usage and config errors exit with two") {
  const fs::path dir = fresh_dir("errors");
  fs::create_directories(dir);
  CHECK(run({"slbo", "--n-polcy", "3", "--out", dir.string()}) == 2);
  CHECK(run({"launch"}) == 2);
  CHECK(run({}) == 2);
  CHECK(run({"verify", "--suite", "bogus", "--out", dir.string()}) == 2);
  CHECK(run({"slbo", "--env", "cartpole", "--n-outer", "0", "--out", dir.string()}) == 2);
  CHECK(run({"slbo", "--H", "0", "--out", dir.string()}) == 2);
  const fs::path typo = dir / "typo.json", broken = dir / "broken.json";
  std::ofstream(typo) << R"({"n_polcy": 3})";
  std::ofstream(broken) << "{\n\"H\": \n";
  CHECK(run({"slbo", "--config", typo.string(), "--out", dir.string()}) == 2);
  CHECK(run({"slbo", "--config", broken.string(), "--out", dir.string()}) == 2);
  CHECK(run({"meta", "--config", (dir / "missing.json").string()}) == 2);
}

TEST_CASE("the output directory falls back to the environment") {
  const fs::path dir = fresh_dir("env_out");
  ::setenv("SLBO_LAB_OUT", dir.string().c_str(), 1);
  CHECK(run({"meta", "--iters", "2"}) == 0);
  ::unsetenv("SLBO_LAB_OUT");
  CHECK(fs::exists(dir / "meta_trace.csv"));
}

TEST_CASE("ablate writes row and cell tables") {
  const fs::path dir = fresh_dir("ablate");
  CHECK(run(with({"ablate", "--axis", "loss_kind", "--seeds", "1", "--out", dir.string()}, kTiny)) == 0);
  CHECK(first_line(dir / "ablation_rows.csv") == mbrl::cli::kAblationRowsHeader);
  const auto cells = lines(dir / "ablation_cells.csv");
  REQUIRE(cells.size() == 3);
  CHECK(cells[0] == mbrl::cli::kAblationCellsHeader);
  CHECK(cells[1].rfind("loss_kind,l2,", 0) == 0);
  CHECK(cells[2].rfind("loss_kind,mse,", 0) == 0);
  CHECK(run({"ablate", "--axis", "depth", "--out", dir.string()}) == 2);
}
