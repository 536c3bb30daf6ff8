#include "magp/harness.hpp"

#include "doctest.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

using namespace magp;
using namespace magp::harness;
namespace fs = std::filesystem;

namespace {

std::map<std::string, std::string> read_csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    std::ifstream in(e.path());
    std::stringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  fs::remove_all(p);
  return p;
}

RunSummary toy_run(std::uint64_t seed, std::vector<double> cost, std::vector<double> g) {
  RunSummary r;
  r.seed = seed;
  r.center_truth.resize(static_cast<Eigen::Index>(cost.size()), 2);
  for (std::size_t i = 0; i < cost.size(); ++i) {
    r.center_truth(static_cast<Eigen::Index>(i), 0) = cost[i];
    r.center_truth(static_cast<Eigen::Index>(i), 1) = g[i];
  }
  return r;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("nearest-rank percentile agrees with sort and index") {
  Rng rng(21);
  for (int n = 1; n <= 25; ++n) {
    std::vector<double> v;
    for (int i = 0; i < n; ++i) v.push_back(standard_normal(rng));
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (double p : {0.0, 5.0, 50.0, 95.0, 100.0}) {
      const int rank = p == 0.0 ? 1 : static_cast<int>(std::ceil(p / 100.0 * n));
      CHECK(percentile_nearest_rank(v, p) == sorted[static_cast<std::size_t>(rank - 1)]);
    }
  }
  CHECK(percentile_nearest_rank({5, 1, 4, 2, 3}, 95.0) == 5.0);
  CHECK(percentile_nearest_rank({5, 1, 4, 2, 3}, 40.0) == 2.0);
  CHECK_THROWS(percentile_nearest_rank({}, 50.0));
}

TEST_CASE("envelope skips infeasible iterates") {
  const std::vector<RunSummary> runs = {
      toy_run(1, {3.0, 2.0, 1.0}, {-1.0, -1.0, -1.0}),
      toy_run(2, {4.0, 0.5, 0.2}, {-1.0, 0.5, -1.0}),
      toy_run(3, {5.0, 9.0, 0.1}, {0.1, -1.0, 1e-3}),
  };
  std::vector<int> n;
  const auto env = envelope(runs, 2, 100.0, 0.0, &n);
  REQUIRE(env.size() == 3);
  CHECK(n == std::vector<int>{2, 2, 2});
  CHECK(*env[0] == 4.0);
  CHECK(*env[1] == 9.0);
  CHECK(*env[2] == 1.0);
  // A tolerance admits the slightly violating iterate.
  const auto loose = envelope(runs, 2, 0.0, 1e-2, &n);
  CHECK(n[2] == 3);
  CHECK(*loose[2] == 0.1);
  const auto none = envelope({toy_run(1, {1.0}, {1.0})}, 0, 95.0, 0.0);
  CHECK_FALSE(none[0].has_value());
}

TEST_CASE("best feasible cost") {
  const RunSummary r = toy_run(1, {3.0, 0.5, 2.0}, {-1.0, 0.2, -0.1});
  CHECK(*best_feasible_cost(r, 0, 0.0) == 3.0);
  CHECK(*best_feasible_cost(r, 2, 0.0) == 2.0);
  CHECK(*best_feasible_cost(r, 2, 0.5) == 0.5);
  CHECK(feasible(Vector::Constant(2, -1.0), 0.0));
}

TEST_CASE("ablation matrix sizes") {
  ExperimentConfig base;
  base.output_dir = "out";
  CHECK(ablation_matrix(base, {"acquisition"}).size() == 3);
  const auto same = ablation_matrix(base, {});
  REQUIRE(same.size() == 1);
  CHECK(same[0].to_json_text() == base.to_json_text());
  const auto six = ablation_matrix(base, {"acquisition", "noise_known"});
  CHECK(six.size() == 6);
  std::vector<std::string> dirs;
  for (const auto& c : six) dirs.push_back(c.output_dir);
  std::sort(dirs.begin(), dirs.end());
  CHECK(std::unique(dirs.begin(), dirs.end()) == dirs.end());
  CHECK_THROWS_AS(ablation_matrix(base, {"kernel"}), ConfigError);
}

TEST_CASE("config parsing") {
  const ExperimentConfig c = ExperimentConfig::from_json_text(
      R"({"plant": "williams-otto", "acquisition": "lcb", "beta": 1.5, "budget": 7, "noise_known": true})");
  CHECK(c.plant == "williams-otto");
  CHECK(c.acquisition.kind == acquisition::Kind::lcb);
  CHECK(c.acquisition.beta == 1.5);
  CHECK(c.budget == 7);
  CHECK(c.noise_known);
  CHECK(ExperimentConfig::from_json_text(c.to_json_text()).to_json_text() == c.to_json_text());
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"budjet": 3})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"budget": "3"})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"plant": "reactor"})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"eta1": 0.9})"), ConfigError);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("{"), ConfigError);
}

TEST_CASE("quick profile") {
  ExperimentConfig c;
  c.plant = "pbr";
  apply_quick_profile(c);
  CHECK(c.pbr_stages == 3);
  CHECK(c.ensemble_size == 3);
  CHECK(c.budget == 25);
}

TEST_CASE("outputs are deterministic") {
  ExperimentConfig c;
  c.ensemble_size = 2;
  c.budget = 3;
  c.threads = 1;
  const fs::path a = fresh_dir("magp_det_a"), b = fresh_dir("magp_det_b");
  c.output_dir = a.string();
  run_experiment(c);
  c.output_dir = b.string();
  c.threads = 2;
  run_experiment(c);
  const auto fa = read_csv_files(a), fb = read_csv_files(b);
  CHECK(fa.size() == 3);
  CHECK(fa.count("ensemble.csv") == 1);
  CHECK(fa == fb);
  CHECK(fs::exists(a / "summary.json"));

  // Summaries rebuilt from the run records reproduce the ensemble table.
  fs::remove(b / "ensemble.csv");
  summarize_directory(b);
  CHECK(read_csv_files(b) == fa);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("single run with zero budget") {
  ExperimentConfig c;
  c.ensemble_size = 1;
  c.budget = 0;
  c.write_files = false;
  const EnsembleSummary s = run_experiment(c);
  REQUIRE(s.runs.size() == 1);
  CHECK(s.runs[0].center_truth.rows() == 1);
  CHECK(s.envelope.size() == 1);
  CHECK(s.failures.empty());
}

TEST_CASE("dense grid export") {
  const std::string csv = dense_grid_csv("quadratic", 7);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 49);
  CHECK(csv.rfind("u_1,u_2,G_0,G_1\n", 0) == 0);
  CHECK_THROWS_AS(dense_grid_csv("pbr", 7), ConfigError);
  CHECK_THROWS_AS(dense_grid_csv("quadratic", 1), ConfigError);
}

}
