#pragma once

#include <functional>
#include <vector>

#include "qem/agent.hpp"
#include "qem/dist.hpp"
#include "qem/mdp.hpp"

namespace qem {

/// Ground-truth return distribution for one (state, action): either an
/// analytic quantile function or a stored Monte-Carlo sample (quantile
/// queries interpolate the sorted returns).
struct OracleDist {
  std::function<double(double)> quantile_fn;  // analytic source
  std::vector<double> sorted_returns;         // Monte-Carlo source
  double mean = 0.0;

  bool analytic() const { return static_cast<bool>(quantile_fn); }
  double quantile(double tau) const;

  static OracleDist from_quantile_fn(std::function<double(double)> q, double mean);
  static OracleDist from_returns(std::vector<double> returns);
};

long long default_horizon(double gamma);

/// Discounted returns of truncated rollouts from `state` under `policy`.
OracleDist mc_oracle(const TabularMdp& mdp, const Policy& policy, int state, int n_rollouts,
                     long long horizon, Rng& rng);

/// Same, but the first action is forced (per-(x,a) oracle entries).
OracleDist mc_oracle_action(const TabularMdp& mdp, const Policy& policy, int state,
                            int first_action, int n_rollouts, long long horizon, Rng& rng);

/// Expected-value iteration to tolerance; greedy ties break low.
struct ValueIterationResult {
  std::vector<double> values;
  std::vector<int> policy;
};
ValueIterationResult value_iteration(const TabularMdp& mdp, double tol = 1e-10,
                                     int max_iters = 1000000);

Policy greedy_policy_matrix(const TabularMdp& mdp, const std::vector<int>& actions);

/// Probe target for the error curves.
struct ProbeOracle {
  int state;
  int action;
  OracleDist dist;
};

/// Per logging step, |Q_hat - Q_oracle| averaged over probes, reported for
/// both estimators (EM and QEM readouts recorded during training).
struct ErrorSeries {
  std::vector<long long> steps;
  std::vector<double> em;
  std::vector<double> qem;
};

ErrorSeries q_error_curve(const TrainResult& result, const std::vector<ProbeOracle>& probes);

/// Same shape, W1 between the learned atoms and the oracle quantiles on
/// the shared tau grid (identical for both estimator columns).
ErrorSeries w1_error_curve(const TrainResult& result, const std::vector<ProbeOracle>& probes);

/// Per-sweep sup-norm gap ratios between two randomly initialized tables
/// iterated by the projected Bellman backup. Ratios are 0 once the
/// previous gap vanishes.
struct ContractionReport {
  std::vector<double> mean_gaps;
  std::vector<double> var_gaps;
  std::vector<double> mean_rates;
  std::vector<double> var_rates;
};

ContractionReport contraction_rates(const TabularMdp& mdp, int n_quantiles, int sweeps, Rng& rng,
                                    int reward_grid = 32);

/// Max over (x,a) of |mean(projected target) - mean(target)| at the given
/// table, targets computed on a near-exact K = 1024 reward grid. Refuses
/// MDPs with unbounded rewards (the bound needs finite R_max).
double param_error_gap(const TabularMdp& mdp, const QuantileTable& table, int n_quantiles,
                       int reference_reward_grid = 1024);

}  // namespace qem
