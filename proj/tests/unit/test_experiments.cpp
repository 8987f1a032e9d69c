#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "qem/experiments.hpp"

using namespace qem;
using nlohmann::json;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path temp_dir(const std::string& tag) {
  const auto dir = std::filesystem::temp_directory_path() / ("qem_test_" + tag);
  std::filesystem::remove_all(dir);
  return dir;
}

}  // namespace

TEST_CASE("config schema violations are rejected") {
  CHECK_THROWS_AS(resolve_config(json::parse(R"({"experiment":"five-state","seeds":[]})")),
                  ConfigError);
  CHECK_THROWS_AS(resolve_config(json::parse(R"({"experiment":"bogus","seeds":[1]})")),
                  ConfigError);
  CHECK_THROWS_AS(resolve_config(json::parse(R"({"seeds":[1]})")), ConfigError);
  CHECK_THROWS_AS(resolve_config(json::parse(R"([1,2,3])")), ConfigError);
}

TEST_CASE("experiment defaults are filled and typed") {
  const auto cfg =
      resolve_config(json::parse(R"({"experiment":"frozenlake","seeds":[1,2]})"));
  CHECK(cfg.resolved.at("train").at("n_quantiles") == 128);
  CHECK(cfg.resolved.at("train").at("steps") == 150000);
  CHECK(cfg.resolved.at("train").at("mode") == "control");
  CHECK(cfg.resolved.at("train").at("epsilon_per") == "episode");
  CHECK(cfg.resolved.at("train").at("weights")[0].at("tau_lo") == 0.45);
  CHECK(cfg.resolved.at("oracle").at("n_rollouts") == 10000);

  const auto five =
      resolve_config(json::parse(R"({"experiment":"five-state","seeds":[1]})"));
  CHECK(five.resolved.at("train").at("n_quantiles") == 64);
  CHECK(five.resolved.at("train").at("steps") == 50000);
  CHECK(five.resolved.at("train").at("mode") == "evaluation");
  CHECK(five.resolved.at("train").at("epsilon_per") == "episode");
  CHECK(five.resolved.at("train").at("weights")[0].at("v") == 1.5);

  const TrainConfig tc = train_config_from_json(five.resolved, 7);
  CHECK(tc.seed == 7);
  CHECK(tc.mode == Mode::Evaluation);
  CHECK(tc.estimator.kind == EstimatorKind::Qem);
  CHECK(tc.n_quantiles == 64);
  CHECK(tc.learning_rate(0) == 0.05);
  CHECK(tc.learning_rate(40000) == 0.0125);
}

TEST_CASE("simulate-f experiment writes reproducible outputs") {
  const auto dir1 = temp_dir("simf1");
  const auto dir2 = temp_dir("simf2");
  json raw = json::parse(R"({
    "experiment": "simulate-f",
    "seeds": [3],
    "simulate_f": {"n": 8, "m": 2.0, "trials": 500, "tau": "even"}
  })");
  raw["output_dir"] = dir1.string();
  const auto outcome1 = run_experiment(resolve_config(raw));
  raw["output_dir"] = dir2.string();
  const auto outcome2 = run_experiment(resolve_config(raw));

  CHECK(outcome1.summary.at("aggregates").at("f_min").get<double>() > 0.0);
  CHECK(slurp(dir1 / "simulate-f_3.csv") == slurp(dir2 / "simulate-f_3.csv"));

  // manifest round-trip: feeding it back reproduces the run byte-for-byte
  auto manifest = json::parse(slurp(dir1 / "manifest.json"));
  const auto dir3 = temp_dir("simf3");
  manifest["output_dir"] = dir3.string();
  run_experiment(resolve_config(manifest));
  CHECK(slurp(dir1 / "simulate-f_3.csv") == slurp(dir3 / "simulate-f_3.csv"));
}

TEST_CASE("cfe-fit experiment matches the noise-free closed forms") {
  const auto dir = temp_dir("fit");
  json raw = json::parse(R"({
    "experiment": "cfe-fit",
    "seeds": [1],
    "fit": {"dist": "normal", "orders": [1, 2, 3, 4], "n_points": 64, "noise_sd": 0.0}
  })");
  raw["output_dir"] = dir.string();
  const auto outcome = run_experiment(resolve_config(raw));
  const auto& models = outcome.summary.at("per_seed")[0].at("models");
  CHECK(std::fabs(models[0].at("coefficients")[0].get<double>() - 0.0) < 1e-8);
  CHECK(std::fabs(models[0].at("coefficients")[1].get<double>() - 1.0) < 1e-8);
  // R^2 never decreases with model order
  double prev = -1.0;
  for (const auto& m : models) {
    const double r2 = m.at("r_squared").get<double>();
    CHECK(r2 >= prev - 1e-10);
    prev = r2;
  }
}

TEST_CASE("gumbel fit recovers the Euler-constant mean") {
  const auto dir = temp_dir("gumbel");
  json raw = json::parse(R"({
    "experiment": "cfe-fit",
    "seeds": [1],
    "fit": {"dist": "gumbel", "orders": [3], "n_points": 128, "noise_sd": 0.5}
  })");
  raw["output_dir"] = dir.string();
  const auto outcome = run_experiment(resolve_config(raw));
  const double m1 =
      outcome.summary.at("per_seed")[0].at("models")[0].at("coefficients")[0].get<double>();
  CHECK(std::fabs(m1 - 0.5772156649015329) < 0.1);
}

TEST_CASE("training experiment emits series files with the documented header") {
  const auto dir = temp_dir("tinytrain");
  json raw = json::parse(R"({
    "experiment": "five-state",
    "seeds": [1, 2],
    "train": {"steps": 2000, "n_quantiles": 16, "log_every": 500}
  })");
  raw["output_dir"] = dir.string();
  const auto outcome = run_experiment(resolve_config(raw));
  const std::string csv = slurp(dir / "five-state_1.csv");
  CHECK(csv.rfind("step,state,action,q_em,q_qem,q_error,w1_error\r\n", 0) == 0);
  CHECK(std::filesystem::exists(dir / "five-state_2.csv"));
  CHECK(std::filesystem::exists(dir / "summary.json"));
  CHECK(std::filesystem::exists(dir / "manifest.json"));
  CHECK(outcome.summary.at("per_seed").size() == 2);

  // byte reproducibility end to end
  const auto dir2 = temp_dir("tinytrain2");
  raw["output_dir"] = dir2.string();
  run_experiment(resolve_config(raw));
  CHECK(slurp(dir / "five-state_1.csv") == slurp(dir2 / "five-state_1.csv"));
  CHECK(slurp(dir / "five-state_2.csv") == slurp(dir2 / "five-state_2.csv"));
}

TEST_CASE("contraction and param-bound experiments run end to end") {
  const auto dir = temp_dir("diag");
  json raw = json::parse(R"({
    "experiment": "contraction",
    "seeds": [1],
    "contraction": {"n_quantiles": 64, "sweeps": 4}
  })");
  raw["output_dir"] = dir.string();
  const auto outcome = run_experiment(resolve_config(raw));
  CHECK(outcome.summary.at("per_seed")[0].at("worst_mean_rate_after_first").get<double>() <= 1.0);

  json raw2 = json::parse(R"({
    "experiment": "param-bound",
    "seeds": [1],
    "param_bound": {"n_list": [16, 32], "gamma": 0.9}
  })");
  raw2["output_dir"] = (temp_dir("pb")).string();
  const auto out2 = run_experiment(resolve_config(raw2));
  for (const auto& row : out2.summary.at("per_seed")[0].at("rows")) {
    CHECK(row.at("gap").get<double>() <= row.at("bound").get<double>());
  }
}
