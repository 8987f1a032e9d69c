#include "qem/experiments.hpp"

#include <atomic>
#include <cinttypes>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <thread>

#include "qem/diagnostics.hpp"

namespace qem {

namespace {

using nlohmann::json;

const json& require(const json& obj, const char* key) {
  if (!obj.contains(key)) throw ConfigError(std::string("config: missing key '") + key + "'");
  return obj.at(key);
}

double as_number(const json& v, const char* what) {
  if (!v.is_number()) throw ConfigError(std::string("config: '") + what + "' must be a number");
  return v.get<double>();
}

json default_train_section(const std::string& experiment) {
  json t;
  t["estimator"] = "qem";
  t["order"] = 3;
  t["weights"] = json::array({{{"tau_lo", 0.0}, {"tau_hi", 0.1}, {"v", 1.5}},
                              {{"tau_lo", 0.9}, {"tau_hi", 1.0}, {"v", 1.5}}});
  t["mode"] = "evaluation";
  t["exploration"] = "epsilon-greedy";
  t["epsilon_base"] = 0.9;
  t["epsilon_per"] = "step";
  t["dltv_c"] = 50.0;
  t["n_quantiles"] = 128;
  t["steps"] = 150000;
  t["lr_schedule"] = json::array({json::array({0, 0.05}), json::array({50000, 0.025}),
                                  json::array({100000, 0.0125})});
  t["init"] = json::array({-0.5, 0.5});
  t["log_every"] = 500;
  t["episode_cap"] = 200;
  t["probe_states"] = json::array({0});

  if (experiment == "five-state") {
    t["epsilon_per"] = "episode";
    t["n_quantiles"] = 64;
    t["steps"] = 50000;
    t["lr_schedule"] = json::array({json::array({0, 0.05}), json::array({16667, 0.025}),
                                    json::array({33333, 0.0125})});
  } else if (experiment == "chain") {
    t["n_quantiles"] = 64;
    t["steps"] = 10000;
    t["lr_schedule"] = json::array({json::array({0, 0.05}), json::array({3333, 0.025}),
                                    json::array({6667, 0.0125})});
  } else if (experiment == "two-arm") {
    t["n_quantiles"] = 32;
    t["steps"] = 20000;
    t["lr_schedule"] = json::array({json::array({0, 0.05}), json::array({6667, 0.025}),
                                    json::array({13333, 0.0125})});
  } else if (experiment == "frozenlake") {
    t["mode"] = "control";
    t["weights"] = json::array({{{"tau_lo", 0.45}, {"tau_hi", 0.55}, {"v", 1.5}}});
    t["epsilon_per"] = "episode";
  }
  return t;
}

json default_mdp_section(const std::string& experiment) {
  json m;
  if (experiment == "two-arm") {
    m["gamma"] = 0.999;
    m["n_quantiles_env"] = 32;
  } else if (experiment == "five-state") {
    m["gamma"] = 0.999;
  } else if (experiment == "chain" || experiment == "contraction") {
    m["gamma"] = 0.99;
    m["mixture"] = json::array({json::array({0.7, -2.0, 1.0}), json::array({0.3, 3.0, 1.0})});
  } else if (experiment == "frozenlake") {
    m["gamma"] = 0.999;
  }
  return m;
}

void merge_defaults(json& target, const json& defaults) {
  for (auto it = defaults.begin(); it != defaults.end(); ++it) {
    if (!target.contains(it.key())) {
      target[it.key()] = it.value();
    } else if (target.at(it.key()).is_object() && it.value().is_object()) {
      merge_defaults(target[it.key()], it.value());
    }
  }
}

const std::vector<std::string> kExperiments = {"two-arm",    "five-state", "chain",
                                               "frozenlake", "simulate-f", "cfe-fit",
                                               "contraction", "param-bound"};

bool is_training_experiment(const std::string& e) {
  return e == "two-arm" || e == "five-state" || e == "chain" || e == "frozenlake";
}

}  // namespace

ExperimentConfig resolve_config(const json& raw) {
  if (!raw.is_object()) throw ConfigError("config: top level must be a JSON object");
  json cfg = raw;
  const std::string experiment = require(cfg, "experiment").get<std::string>();
  bool known = false;
  for (const auto& e : kExperiments) known = known || (e == experiment);
  if (!known) throw ConfigError("config: unrecognized experiment '" + experiment + "'");

  const json& seeds_json = require(cfg, "seeds");
  if (!seeds_json.is_array() || seeds_json.empty()) {
    throw ConfigError("config: 'seeds' must be a non-empty array");
  }
  std::vector<std::uint64_t> seeds;
  for (const auto& s : seeds_json) {
    if (!s.is_number_integer() && !s.is_number_unsigned()) {
      throw ConfigError("config: seeds must be integers");
    }
    seeds.push_back(s.get<std::uint64_t>());
  }

  if (!cfg.contains("output_dir")) cfg["output_dir"] = "qem_out";
  if (!cfg.contains("reward_grid")) cfg["reward_grid"] = 32;

  json mdp_defaults = default_mdp_section(experiment);
  if (!mdp_defaults.empty()) {
    if (!cfg.contains("mdp")) cfg["mdp"] = json::object();
    merge_defaults(cfg["mdp"], mdp_defaults);
  }
  if (is_training_experiment(experiment)) {
    if (!cfg.contains("train")) cfg["train"] = json::object();
    merge_defaults(cfg["train"], default_train_section(experiment));
    if (!cfg.contains("oracle")) cfg["oracle"] = json::object();
    merge_defaults(cfg["oracle"], json{{"n_rollouts", 10000}, {"horizon", 0}});
  }
  if (experiment == "simulate-f") {
    if (!cfg.contains("simulate_f")) cfg["simulate_f"] = json::object();
    merge_defaults(cfg["simulate_f"],
                   json{{"n", 32}, {"m", 2.0}, {"trials", 100000}, {"tau", "uniform"}});
  }
  if (experiment == "cfe-fit") {
    if (!cfg.contains("fit")) cfg["fit"] = json::object();
    merge_defaults(cfg["fit"], json{{"dist", "mixture"},
                                    {"orders", json::array({1, 2, 3, 4})},
                                    {"n_points", 128},
                                    {"noise_sd", 0.5}});
  }
  if (experiment == "contraction") {
    if (!cfg.contains("contraction")) cfg["contraction"] = json::object();
    merge_defaults(cfg["contraction"], json{{"n_quantiles", 512}, {"sweeps", 10}});
  }
  if (experiment == "param-bound") {
    if (!cfg.contains("param_bound")) cfg["param_bound"] = json::object();
    merge_defaults(cfg["param_bound"],
                   json{{"n_list", json::array({32, 128, 512})}, {"gamma", 0.9}});
  }
  cfg["artifact"] = json{{"name", "qem"}, {"version", "0.1.0"}};

  ExperimentConfig out;
  out.experiment = experiment;
  out.seeds = std::move(seeds);
  out.output_dir = cfg.at("output_dir").get<std::string>();
  out.resolved = std::move(cfg);
  return out;
}

TabularMdp mdp_from_config(const json& resolved) {
  const std::string experiment = resolved.at("experiment").get<std::string>();
  const json mdp_cfg = resolved.value("mdp", json::object());
  if (experiment == "two-arm") {
    return build_two_arm(mdp_cfg.value("n_quantiles_env", 32), mdp_cfg.value("gamma", 0.999));
  }
  if (experiment == "five-state") {
    return build_five_state(mdp_cfg.value("gamma", 0.999));
  }
  if (experiment == "chain" || experiment == "contraction") {
    std::vector<GaussianComponent> comps;
    for (const auto& c : mdp_cfg.at("mixture")) {
      if (!c.is_array() || c.size() != 3) {
        throw ConfigError("config: mixture components are [weight, mean, stddev] triples");
      }
      comps.push_back({as_number(c[0], "mixture weight"), as_number(c[1], "mixture mean"),
                       as_number(c[2], "mixture stddev")});
    }
    return build_chain(mdp_cfg.value("gamma", 0.99), RewardDist::gaussian_mixture(comps));
  }
  if (experiment == "frozenlake") {
    TabularMdp lake = build_frozen_lake();
    lake.gamma = mdp_cfg.value("gamma", lake.gamma);
    lake.validate();
    return lake;
  }
  throw ConfigError("config: experiment '" + experiment + "' has no MDP");
}

TrainConfig train_config_from_json(const json& resolved, std::uint64_t seed) {
  const json& t = resolved.at("train");
  TrainConfig c;
  const std::string estimator = t.at("estimator").get<std::string>();
  WeightSpec weights;
  for (const auto& band : t.at("weights")) {
    weights.bands.push_back({as_number(require(band, "tau_lo"), "tau_lo"),
                             as_number(require(band, "tau_hi"), "tau_hi"),
                             as_number(require(band, "v"), "v")});
  }
  if (estimator == "em") {
    c.estimator = EstimatorSpec::em();
    c.estimator.order = t.at("order").get<int>();
    c.estimator.weights = weights;  // used by the QEM diagnostic column
  } else if (estimator == "qem") {
    c.estimator = EstimatorSpec::qem(t.at("order").get<int>(), weights);
  } else {
    throw ConfigError("config: train.estimator must be 'em' or 'qem'");
  }
  const std::string mode = t.at("mode").get<std::string>();
  if (mode == "evaluation") {
    c.mode = Mode::Evaluation;
  } else if (mode == "control") {
    c.mode = Mode::Control;
  } else {
    throw ConfigError("config: train.mode must be 'evaluation' or 'control'");
  }
  const std::string exploration = t.at("exploration").get<std::string>();
  if (exploration == "epsilon-greedy") {
    c.exploration = ExplorationSpec::epsilon_greedy(as_number(t.at("epsilon_base"), "epsilon_base"));
  } else if (exploration == "dltv") {
    c.exploration = ExplorationSpec::dltv(as_number(t.at("dltv_c"), "dltv_c"));
  } else {
    throw ConfigError("config: train.exploration must be 'epsilon-greedy' or 'dltv'");
  }
  const std::string per = t.at("epsilon_per").get<std::string>();
  if (per != "step" && per != "episode") {
    throw ConfigError("config: train.epsilon_per must be 'step' or 'episode'");
  }
  c.epsilon_per_episode = (per == "episode");
  c.n_quantiles = t.at("n_quantiles").get<int>();
  c.steps = t.at("steps").get<long long>();
  c.lr_schedule.clear();
  for (const auto& seg : t.at("lr_schedule")) {
    if (!seg.is_array() || seg.size() != 2) {
      throw ConfigError("config: lr_schedule entries are [step, rate] pairs");
    }
    c.lr_schedule.push_back({seg[0].get<long long>(), as_number(seg[1], "lr rate")});
  }
  const json& init = t.at("init");
  if (!init.is_array() || init.size() != 2) throw ConfigError("config: train.init is [lo, hi]");
  c.init_lo = as_number(init[0], "init lo");
  c.init_hi = as_number(init[1], "init hi");
  c.log_every = t.at("log_every").get<long long>();
  c.episode_cap = t.at("episode_cap").get<long long>();
  for (const auto& p : t.at("probe_states")) c.probe_states.push_back(p.get<int>());
  if (resolved.at("mdp").contains("gamma_override")) {
    c.gamma_override = as_number(resolved.at("mdp").at("gamma_override"), "gamma_override");
  }
  c.seed = seed;
  return c;
}

std::string format_csv_number(double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  return buf;
}

namespace {

constexpr const char* kCrlf = "\r\n";

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_json(const std::filesystem::path& path, const json& value) {
  write_text(path, value.dump(2) + "\n");
}

struct SeedSummary {
  std::uint64_t seed;
  json data;
  std::string csv;
};

// Oracle bundle for one training experiment: per-probe (state, action)
// targets and quantiles.
struct OracleSet {
  std::vector<ProbeOracle> probes;
};

OracleSet build_oracle(const TabularMdp& mdp, const json& resolved) {
  const std::string experiment = resolved.at("experiment").get<std::string>();
  const json& oracle_cfg = resolved.at("oracle");
  OracleSet set;
  if (experiment == "five-state") {
    const double g = mdp.gamma;
    // gamma^2 * Exp(mean m/gamma^2) = Exp(mean m)
    const double m1 = g * g * mdp.reward(3, 0).mean();
    const double m2 = g * g * mdp.reward(4, 0).mean();
    set.probes.push_back(
        {0, 0, OracleDist::from_quantile_fn([m1](double tau) { return -m1 * std::log1p(-tau); }, m1)});
    set.probes.push_back(
        {0, 1, OracleDist::from_quantile_fn([m2](double tau) { return -m2 * std::log1p(-tau); }, m2)});
    return set;
  }
  if (experiment == "chain") {
    const double scale = std::pow(mdp.gamma, 5.0);
    const RewardDist mix = mdp.reward(5, 0);
    set.probes.push_back({0, 0,
                          OracleDist::from_quantile_fn(
                              [mix, scale](double tau) { return scale * mix.quantile(tau); },
                              scale * mix.mean())});
    return set;
  }
  // two-arm and frozenlake use Monte-Carlo rollouts under the optimal policy
  const auto vi = value_iteration(mdp);
  const Policy pi = greedy_policy_matrix(mdp, vi.policy);
  Rng rng(Rng::stream(20240501, 0));
  const int n_rollouts = oracle_cfg.at("n_rollouts").get<int>();
  const long long horizon = oracle_cfg.at("horizon").get<long long>();
  const int probe = mdp.start_state;
  const int a_star = vi.policy[static_cast<std::size_t>(probe)];
  set.probes.push_back(
      {probe, a_star, mc_oracle_action(mdp, pi, probe, a_star, n_rollouts, horizon, rng)});
  return set;
}

SeedSummary run_training_seed(const TabularMdp& mdp, const json& resolved, std::uint64_t seed,
                              const OracleSet& oracle) {
  const std::string experiment = resolved.at("experiment").get<std::string>();
  TrainConfig config = train_config_from_json(resolved, seed);
  const TrainResult result = run_training(mdp, config);

  // error curves against the oracle entries
  const ErrorSeries q_err = q_error_curve(result, oracle.probes);
  const ErrorSeries w1_err = w1_error_curve(result, oracle.probes);
  const bool qem_run = config.estimator.kind == EstimatorKind::Qem;

  std::string csv = "step,state,action,q_em,q_qem,q_error,w1_error";
  csv += kCrlf;
  for (std::size_t r = 0; r < result.records.size(); ++r) {
    const auto& rec = result.records[r];
    for (std::size_t pi = 0; pi < result.probe_states.size(); ++pi) {
      for (int a = 0; a < result.n_actions; ++a) {
        const std::size_t k = pi * result.n_actions + static_cast<std::size_t>(a);
        csv += std::to_string(rec.step);
        csv += ',';
        csv += std::to_string(result.probe_states[pi]);
        csv += ',';
        csv += std::to_string(a);
        csv += ',';
        csv += format_csv_number(rec.q_em[k]);
        csv += ',';
        csv += format_csv_number(rec.q_qem[k]);
        csv += ',';
        csv += format_csv_number(qem_run ? q_err.qem[r] : q_err.em[r]);
        csv += ',';
        csv += format_csv_number(qem_run ? w1_err.qem[r] : w1_err.em[r]);
        csv += kCrlf;
      }
    }
  }

  // final summary: greedy action at the start state plus final errors
  const auto& final_rec = result.records.back();
  json final_q_em = json::array();
  json final_q_qem = json::array();
  for (std::size_t k = 0; k < final_rec.q_em.size(); ++k) {
    final_q_em.push_back(final_rec.q_em[k]);
    final_q_qem.push_back(final_rec.q_qem[k]);
  }

  // greedy policy of the final table under the run's estimator
  const EstimatorSpec greedy_spec = config.estimator;
  json final_policy = json::array();
  for (int x = 0; x < mdp.n_states; ++x) {
    int best_a = 0;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.n_actions; ++a) {
      const double q = q_value(result.final_table, mdp, x, a, greedy_spec);
      if (q > best) {
        best = q;
        best_a = a;
      }
    }
    final_policy.push_back(best_a);
  }
  const int greedy = final_policy[static_cast<std::size_t>(mdp.start_state)].get<int>();

  SeedSummary out;
  out.seed = seed;
  out.data = json{{"seed", seed},
                  {"experiment", experiment},
                  {"estimator", qem_run ? "qem" : "em"},
                  {"greedy_start_action", greedy},
                  {"final_policy", final_policy},
                  {"final_q_em", final_q_em},
                  {"final_q_qem", final_q_qem},
                  {"final_q_error", qem_run ? q_err.qem.back() : q_err.em.back()},
                  {"final_w1_error", qem_run ? w1_err.qem.back() : w1_err.em.back()}};
  out.csv = std::move(csv);
  return out;
}

SeedSummary run_simulate_f_seed(const json& resolved, std::uint64_t seed) {
  const json& cfg = resolved.at("simulate_f");
  const int n = cfg.at("n").get<int>();
  const double m = as_number(cfg.at("m"), "simulate_f.m");
  const long long trials = cfg.at("trials").get<long long>();
  const std::string tau = cfg.at("tau").get<std::string>();
  if (tau != "uniform" && tau != "even") {
    throw ConfigError("config: simulate_f.tau must be 'uniform' or 'even'");
  }
  Rng rng(seed);
  const double f_min =
      simulate_f_min(n, m, trials, tau == "uniform" ? TauMode::UniformRandom : TauMode::Even, rng);
  SeedSummary out;
  out.seed = seed;
  out.data = json{{"seed", seed}, {"n", n}, {"m", m}, {"trials", trials},
                  {"tau", tau},   {"f_min", f_min}};
  out.csv = std::string("n,m,trials,tau,seed,f_min") + kCrlf + std::to_string(n) + "," +
            format_csv_number(m) + "," + std::to_string(trials) + "," + tau + "," +
            std::to_string(seed) + "," + format_csv_number(f_min) + kCrlf;
  return out;
}

RewardDist fit_distribution(const std::string& name) {
  if (name == "normal") return RewardDist::gaussian_mixture({{1.0, 0.0, 1.0}});
  if (name == "mixture") return default_chain_mixture();
  if (name == "exponential") return RewardDist::exponential(1.0);
  if (name == "gumbel") {
    return RewardDist::dirac(0.0);  // placeholder, handled separately below
  }
  throw ConfigError("config: fit.dist must be normal|mixture|exponential|gumbel");
}

double fit_quantile(const std::string& name, const RewardDist& dist, double tau) {
  if (name == "gumbel") return -std::log(-std::log(tau));
  return dist.quantile(tau);
}

SeedSummary run_cfe_fit_seed(const json& resolved, std::uint64_t seed) {
  const json& cfg = resolved.at("fit");
  const std::string dist_name = cfg.at("dist").get<std::string>();
  const RewardDist dist = fit_distribution(dist_name);
  const int n_points = cfg.at("n_points").get<int>();
  const double noise_sd = as_number(cfg.at("noise_sd"), "fit.noise_sd");

  const auto taus = default_tau_grid(n_points);
  std::vector<double> qhat(taus.size());
  Rng rng(seed);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    qhat[i] = fit_quantile(dist_name, dist, taus[i]) + noise_sd * rng.normal();
  }

  std::string csv = "model,c0,c1,c2,c3,c4,r_squared";
  csv += kCrlf;
  json models = json::array();
  for (const auto& order_json : cfg.at("orders")) {
    const int order = order_json.get<int>();
    const MomentFit fit = wls_fit(build_design(taus, order), WeightSpec::none(), qhat);
    json coeffs = json::array();
    csv += std::to_string(order);
    for (int c = 0; c < 5; ++c) {
      csv += ',';
      if (c < fit.coefficients.size()) {
        coeffs.push_back(fit.coefficients(c));
        csv += format_csv_number(fit.coefficients(c));
      }
    }
    csv += ',';
    csv += format_csv_number(fit.r_squared);
    csv += kCrlf;
    models.push_back(json{{"model", order}, {"coefficients", coeffs}, {"r_squared", fit.r_squared}});
  }
  SeedSummary out;
  out.seed = seed;
  out.data = json{{"seed", seed}, {"dist", dist_name}, {"n_points", n_points},
                  {"noise_sd", noise_sd}, {"models", models}};
  out.csv = std::move(csv);
  return out;
}

SeedSummary run_contraction_seed(const json& resolved, std::uint64_t seed) {
  const json& cfg = resolved.at("contraction");
  const TabularMdp mdp = mdp_from_config(resolved);
  Rng rng(seed);
  const ContractionReport report = contraction_rates(mdp, cfg.at("n_quantiles").get<int>(),
                                                     cfg.at("sweeps").get<int>(), rng,
                                                     resolved.at("reward_grid").get<int>());
  std::string csv = "sweep,mean_gap,var_gap,mean_rate,var_rate";
  csv += kCrlf;
  for (std::size_t s = 0; s < report.mean_rates.size(); ++s) {
    csv += std::to_string(s + 1);
    csv += ',';
    csv += format_csv_number(report.mean_gaps[s + 1]);
    csv += ',';
    csv += format_csv_number(report.var_gaps[s + 1]);
    csv += ',';
    csv += format_csv_number(report.mean_rates[s]);
    csv += ',';
    csv += format_csv_number(report.var_rates[s]);
    csv += kCrlf;
  }
  double worst_mean = 0.0, worst_var = 0.0;
  for (std::size_t s = 1; s < report.mean_rates.size(); ++s) {
    worst_mean = std::max(worst_mean, report.mean_rates[s]);
    worst_var = std::max(worst_var, report.var_rates[s]);
  }
  SeedSummary out;
  out.seed = seed;
  out.data = json{{"seed", seed},
                  {"gamma", mdp.gamma},
                  {"worst_mean_rate_after_first", worst_mean},
                  {"worst_var_rate_after_first", worst_var}};
  out.csv = std::move(csv);
  return out;
}

SeedSummary run_param_bound_seed(const json& resolved, std::uint64_t seed) {
  const json& cfg = resolved.at("param_bound");
  const double gamma = as_number(cfg.at("gamma"), "param_bound.gamma");
  std::string csv = "n_quantiles,gap,bound";
  csv += kCrlf;
  json rows = json::array();
  for (const auto& n_json : cfg.at("n_list")) {
    const int n = n_json.get<int>();
    const TabularMdp mdp = build_two_arm(n, gamma);
    const Policy pi = uniform_policy(mdp);
    const QuantileTable table =
        projected_fixed_point(mdp, pi, n, resolved.at("reward_grid").get<int>());
    const double gap = param_error_gap(mdp, table, n);
    const double bound = 2.0 * mdp.r_max / (n * (1.0 - gamma));
    csv += std::to_string(n);
    csv += ',';
    csv += format_csv_number(gap);
    csv += ',';
    csv += format_csv_number(bound);
    csv += kCrlf;
    rows.push_back(json{{"n_quantiles", n}, {"gap", gap}, {"bound", bound}});
  }
  SeedSummary out;
  out.seed = seed;
  out.data = json{{"seed", seed}, {"gamma", gamma}, {"rows", rows}};
  out.csv = std::move(csv);
  return out;
}

}  // namespace

ExperimentOutcome run_experiment(const ExperimentConfig& config) {
  std::filesystem::create_directories(config.output_dir);

  OracleSet oracle;
  TabularMdp mdp;
  const bool training = is_training_experiment(config.experiment);
  if (training) {
    mdp = mdp_from_config(config.resolved);
    oracle = build_oracle(mdp, config.resolved);
  }

  std::vector<SeedSummary> summaries(config.seeds.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= config.seeds.size()) return;
      try {
        const std::uint64_t seed = config.seeds[i];
        if (training) {
          summaries[i] = run_training_seed(mdp, config.resolved, seed, oracle);
        } else if (config.experiment == "simulate-f") {
          summaries[i] = run_simulate_f_seed(config.resolved, seed);
        } else if (config.experiment == "cfe-fit") {
          summaries[i] = run_cfe_fit_seed(config.resolved, seed);
        } else if (config.experiment == "contraction") {
          summaries[i] = run_contraction_seed(config.resolved, seed);
        } else {
          summaries[i] = run_param_bound_seed(config.resolved, seed);
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };

  const std::size_t n_workers =
      std::min<std::size_t>(config.seeds.size(),
                            std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);

  ExperimentOutcome outcome;
  json per_seed = json::array();
  for (const auto& s : summaries) {
    const auto csv_path =
        config.output_dir / (config.experiment + "_" + std::to_string(s.seed) + ".csv");
    write_text(csv_path, s.csv);
    outcome.files.push_back(csv_path);
    per_seed.push_back(s.data);
  }

  json aggregates = json::object();
  if (training) {
    double em_sum = 0.0, qem_sum = 0.0;
    std::vector<int> greedy_hist(static_cast<std::size_t>(mdp.n_actions), 0);
    for (const auto& s : summaries) {
      em_sum += s.data.at("final_q_error").get<double>();
      qem_sum += s.data.at("final_w1_error").get<double>();
      greedy_hist[s.data.at("greedy_start_action").get<std::size_t>()]++;
    }
    aggregates["mean_final_q_error"] = em_sum / static_cast<double>(summaries.size());
    aggregates["mean_final_w1_error"] = qem_sum / static_cast<double>(summaries.size());
    aggregates["greedy_start_action_histogram"] = greedy_hist;
  }
  if (config.experiment == "simulate-f") {
    double fmin = std::numeric_limits<double>::infinity();
    for (const auto& s : summaries) fmin = std::min(fmin, s.data.at("f_min").get<double>());
    aggregates["f_min"] = fmin;
  }

  json summary;
  summary["experiment"] = config.experiment;
  summary["per_seed"] = per_seed;
  summary["aggregates"] = aggregates;
  const auto summary_path = config.output_dir / "summary.json";
  write_json(summary_path, summary);
  outcome.files.push_back(summary_path);

  const auto manifest_path = config.output_dir / "manifest.json";
  write_json(manifest_path, config.resolved);
  outcome.files.push_back(manifest_path);

  outcome.summary = std::move(summary);
  return outcome;
}

ExperimentConfig load_config_file(const std::filesystem::path& path,
                                  const std::optional<std::uint64_t>& seed_override) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file: " + path.string());
  json raw;
  try {
    in >> raw;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  if (seed_override) raw["seeds"] = json::array({*seed_override});
  if (const char* env = std::getenv("QEM_OUTPUT_DIR"); env && *env) raw["output_dir"] = env;
  return resolve_config(raw);
}

}  // namespace qem
