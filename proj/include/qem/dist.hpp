#pragma once

#include <vector>

#include "qem/mdp.hpp"

namespace qem {

/// N equally weighted atoms; atom i estimates the quantile at taus[i].
/// Atoms are NOT required to be sorted (crossing is representable).
struct QuantileRepr {
  std::vector<double> atoms;
  std::vector<double> taus;
};

/// Midpoint grid tau_i = (2i-1)/(2N).
std::vector<double> default_tau_grid(int n);

/// Fixed evenly spaced support with learned probabilities.
struct CategoricalRepr {
  std::vector<double> support;
  std::vector<double> probs;
};

/// Finite weighted sample; weights sum to 1.
struct WeightedSample {
  std::vector<double> values;
  std::vector<double> weights;

  double mean() const;
  double variance() const;
};

/// Quantile projection onto the given tau grid.
///
/// Inverse-CDF convention at jump points: F^-1(tau) = inf{x : F(x) > tau}
/// when tau exactly hits an accumulated weight, else inf{x : F(x) >= tau}.
QuantileRepr quantile_project(const WeightedSample& target, std::vector<double> taus);

/// Categorical projection: each value splits its mass linearly between the
/// two bracketing support points; values outside the support clamp to the
/// end atoms. Support must be evenly spaced with length >= 2.
CategoricalRepr categorical_project(const WeightedSample& target, std::vector<double> support);

/// W1 distance between two equal-N, equal-weight atom sets:
/// (1/N) * sum |sort(a)_i - sort(b)_i|.
double wasserstein1(const QuantileRepr& a, const QuantileRepr& b);

/// Plain average of the atoms (the EM estimator).
double em_mean(const QuantileRepr& repr);

/// Upper-half deviations from the median atom over sorted atoms:
/// (1/(2N)) * sum_{i > N/2} (theta_(i) - theta_(N/2))^2. N must be even.
double left_truncated_variance(const QuantileRepr& repr);

using Policy = std::vector<std::vector<double>>;  // [state][action] probabilities

Policy uniform_policy(const TabularMdp& mdp);

/// Per-(state, action) atoms sharing one tau grid. All actions of a
/// terminal state alias one entry (index (x, 0)): a terminal state's value
/// is its own reward distribution, which the aliased entry approximates.
struct QuantileTable {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> taus;
  std::vector<std::vector<double>> atoms;  // [x * A + a]

  static QuantileTable zeros(const TabularMdp& mdp, int n_quantiles);

  int entry_index(const TabularMdp& mdp, int x, int a) const {
    return mdp.is_terminal(x) ? x * n_actions : x * n_actions + a;
  }
  const std::vector<double>& entry(const TabularMdp& mdp, int x, int a) const {
    return atoms[entry_index(mdp, x, a)];
  }
  std::vector<double>& entry(const TabularMdp& mdp, int x, int a) {
    return atoms[entry_index(mdp, x, a)];
  }
  QuantileRepr repr(const TabularMdp& mdp, int x, int a) const {
    return QuantileRepr{entry(mdp, x, a), taus};
  }
};

/// Exact tabular distributional Bellman target for (x,a).
///
/// Non-terminal x: every successor x' (weight P), action a' (weight
/// pi(a'|x')), table atom theta_j (weight 1/N) and reward quantile
/// r_k = F^-1_R((2k-1)/(2K)) (weight 1/K) contributes r_k + gamma*theta_j.
/// Dirac rewards collapse to a single exact atom. Terminal x: the target
/// is the reward quantile grid alone (the episode ends after that reward).
WeightedSample bellman_target(const TabularMdp& mdp, const QuantileTable& table,
                              const Policy& policy, int x, int a, int reward_grid = 32);

/// One synchronous sweep of quantile_project(bellman_target(...)) over all
/// (x, a) entries.
QuantileTable projected_bellman_sweep(const TabularMdp& mdp, const QuantileTable& table,
                                      const Policy& policy, int reward_grid = 32);

/// Iterates projected sweeps until the sup-norm atom change drops below
/// tol (or max_sweeps).
QuantileTable projected_fixed_point(const TabularMdp& mdp, const Policy& policy, int n_quantiles,
                                    int reward_grid = 32, int max_sweeps = 1000, double tol = 1e-13);

}  // namespace qem
