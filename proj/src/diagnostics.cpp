#include "qem/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qem {

double OracleDist::quantile(double tau) const {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("OracleDist: tau in (0,1)");
  if (analytic()) return quantile_fn(tau);
  const std::size_t n = sorted_returns.size();
  if (n == 0) throw std::invalid_argument("OracleDist: empty sample");
  // linear interpolation between order statistics
  const double pos = tau * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= n) return sorted_returns.back();
  const double frac = pos - static_cast<double>(lo);
  return sorted_returns[lo] + frac * (sorted_returns[lo + 1] - sorted_returns[lo]);
}

OracleDist OracleDist::from_quantile_fn(std::function<double(double)> q, double mean) {
  OracleDist o;
  o.quantile_fn = std::move(q);
  o.mean = mean;
  return o;
}

OracleDist OracleDist::from_returns(std::vector<double> returns) {
  if (returns.empty()) throw std::invalid_argument("OracleDist: empty sample");
  OracleDist o;
  std::sort(returns.begin(), returns.end());
  double m = 0.0;
  for (double r : returns) m += r;
  o.mean = m / static_cast<double>(returns.size());
  o.sorted_returns = std::move(returns);
  return o;
}

long long default_horizon(double gamma) {
  if (gamma <= 0.0) return 1;
  return static_cast<long long>(std::ceil(std::log(1e-6) / std::log(gamma)));
}

namespace {

int draw_action(const Policy& policy, int x, Rng& rng) {
  const auto& probs = policy[static_cast<std::size_t>(x)];
  double u = rng.uniform();
  for (std::size_t a = 0; a < probs.size(); ++a) {
    if (u < probs[a]) return static_cast<int>(a);
    u -= probs[a];
  }
  return static_cast<int>(probs.size()) - 1;
}

double rollout(const TabularMdp& mdp, const Policy& policy, int state, int first_action,
               long long horizon, Rng& rng) {
  double g = 0.0;
  double disc = 1.0;
  int x = state;
  for (long long t = 0; t < horizon; ++t) {
    if (mdp.is_terminal(x)) {
      g += disc * mdp.reward(x, 0).sample(rng);
      break;
    }
    const int a = (t == 0 && first_action >= 0) ? first_action : draw_action(policy, x, rng);
    const Transition tr = sample_transition(mdp, x, a, rng);
    g += disc * tr.reward;
    disc *= mdp.gamma;
    x = tr.next_state;
  }
  return g;
}

}  // namespace

OracleDist mc_oracle(const TabularMdp& mdp, const Policy& policy, int state, int n_rollouts,
                     long long horizon, Rng& rng) {
  return mc_oracle_action(mdp, policy, state, -1, n_rollouts, horizon, rng);
}

OracleDist mc_oracle_action(const TabularMdp& mdp, const Policy& policy, int state,
                            int first_action, int n_rollouts, long long horizon, Rng& rng) {
  if (n_rollouts < 1) throw std::invalid_argument("mc_oracle: n_rollouts must be >= 1");
  if (horizon <= 0) horizon = default_horizon(mdp.gamma);
  std::vector<double> returns(static_cast<std::size_t>(n_rollouts));
  for (int i = 0; i < n_rollouts; ++i) {
    returns[static_cast<std::size_t>(i)] = rollout(mdp, policy, state, first_action, horizon, rng);
  }
  return OracleDist::from_returns(std::move(returns));
}

ValueIterationResult value_iteration(const TabularMdp& mdp, double tol, int max_iters) {
  std::vector<double> values(static_cast<std::size_t>(mdp.n_states), 0.0);
  std::vector<double> next(values.size(), 0.0);
  for (int x = 0; x < mdp.n_states; ++x) {
    if (mdp.is_terminal(x)) values[static_cast<std::size_t>(x)] = mdp.reward(x, 0).mean();
  }
  for (int it = 0; it < max_iters; ++it) {
    double delta = 0.0;
    for (int x = 0; x < mdp.n_states; ++x) {
      if (mdp.is_terminal(x)) {
        next[static_cast<std::size_t>(x)] = values[static_cast<std::size_t>(x)];
        continue;
      }
      double best = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < mdp.n_actions; ++a) {
        double q = mdp.reward(x, a).mean();
        for (int y = 0; y < mdp.n_states; ++y) {
          const double p = mdp.p(x, a, y);
          if (p != 0.0) q += mdp.gamma * p * values[static_cast<std::size_t>(y)];
        }
        best = std::max(best, q);
      }
      next[static_cast<std::size_t>(x)] = best;
      delta = std::max(delta, std::fabs(best - values[static_cast<std::size_t>(x)]));
    }
    values.swap(next);
    if (delta <= tol) break;
  }
  std::vector<int> actions(static_cast<std::size_t>(mdp.n_states), 0);
  for (int x = 0; x < mdp.n_states; ++x) {
    if (mdp.is_terminal(x)) continue;
    double best = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < mdp.n_actions; ++a) {
      double q = mdp.reward(x, a).mean();
      for (int y = 0; y < mdp.n_states; ++y) {
        const double p = mdp.p(x, a, y);
        if (p != 0.0) q += mdp.gamma * p * values[static_cast<std::size_t>(y)];
      }
      if (q > best + 1e-15) {
        best = q;
        actions[static_cast<std::size_t>(x)] = a;
      }
    }
  }
  return ValueIterationResult{std::move(values), std::move(actions)};
}

Policy greedy_policy_matrix(const TabularMdp& mdp, const std::vector<int>& actions) {
  Policy pi(static_cast<std::size_t>(mdp.n_states),
            std::vector<double>(static_cast<std::size_t>(mdp.n_actions), 0.0));
  for (int x = 0; x < mdp.n_states; ++x) {
    pi[static_cast<std::size_t>(x)][static_cast<std::size_t>(actions[static_cast<std::size_t>(x)])] =
        1.0;
  }
  return pi;
}

namespace {

ErrorSeries error_curve(const TrainResult& result, const std::vector<ProbeOracle>& probes,
                        bool wasserstein) {
  ErrorSeries series;
  for (const auto& rec : result.records) {
    double em_err = 0.0, qem_err = 0.0;
    for (const auto& probe : probes) {
      int probe_idx = -1;
      for (std::size_t i = 0; i < result.probe_states.size(); ++i) {
        if (result.probe_states[i] == probe.state) probe_idx = static_cast<int>(i);
      }
      if (probe_idx < 0) throw std::invalid_argument("error curve: probe state was not recorded");
      const std::size_t k =
          static_cast<std::size_t>(probe_idx) * result.n_actions + static_cast<std::size_t>(probe.action);
      if (wasserstein) {
        const auto& atoms = rec.atoms[k];
        const auto taus = default_tau_grid(static_cast<int>(atoms.size()));
        std::vector<double> oracle_atoms(atoms.size());
        for (std::size_t i = 0; i < atoms.size(); ++i) oracle_atoms[i] = probe.dist.quantile(taus[i]);
        const double w1 = wasserstein1(QuantileRepr{atoms, taus}, QuantileRepr{oracle_atoms, taus});
        em_err += w1;
        qem_err += w1;
      } else {
        em_err += std::fabs(rec.q_em[k] - probe.dist.mean);
        qem_err += std::fabs(rec.q_qem[k] - probe.dist.mean);
      }
    }
    series.steps.push_back(rec.step);
    series.em.push_back(em_err / static_cast<double>(probes.size()));
    series.qem.push_back(qem_err / static_cast<double>(probes.size()));
  }
  return series;
}

}  // namespace

ErrorSeries q_error_curve(const TrainResult& result, const std::vector<ProbeOracle>& probes) {
  return error_curve(result, probes, false);
}

ErrorSeries w1_error_curve(const TrainResult& result, const std::vector<ProbeOracle>& probes) {
  return error_curve(result, probes, true);
}

namespace {

double table_mean(const std::vector<double>& atoms) {
  double s = 0.0;
  for (double a : atoms) s += a;
  return s / static_cast<double>(atoms.size());
}

double table_var(const std::vector<double>& atoms) {
  const double m = table_mean(atoms);
  double v = 0.0;
  for (double a : atoms) v += (a - m) * (a - m);
  return v / static_cast<double>(atoms.size());
}

}  // namespace

ContractionReport contraction_rates(const TabularMdp& mdp, int n_quantiles, int sweeps, Rng& rng,
                                    int reward_grid) {
  const Policy pi = uniform_policy(mdp);
  QuantileTable t1 = QuantileTable::zeros(mdp, n_quantiles);
  QuantileTable t2 = QuantileTable::zeros(mdp, n_quantiles);
  for (auto& entry : t1.atoms)
    for (auto& atom : entry) atom = rng.uniform(-0.5, 0.5);
  for (auto& entry : t2.atoms)
    for (auto& atom : entry) atom = rng.uniform(-0.5, 0.5);

  auto gaps = [&](const QuantileTable& a, const QuantileTable& b) {
    double mean_gap = 0.0, var_gap = 0.0;
    for (int x = 0; x < mdp.n_states; ++x) {
      const int a_hi = mdp.is_terminal(x) ? 1 : mdp.n_actions;
      for (int ac = 0; ac < a_hi; ++ac) {
        const auto& ea = a.entry(mdp, x, ac);
        const auto& eb = b.entry(mdp, x, ac);
        mean_gap = std::max(mean_gap, std::fabs(table_mean(ea) - table_mean(eb)));
        var_gap = std::max(var_gap, std::fabs(table_var(ea) - table_var(eb)));
      }
    }
    return std::pair<double, double>(mean_gap, var_gap);
  };

  ContractionReport report;
  auto [mg, vg] = gaps(t1, t2);
  report.mean_gaps.push_back(mg);
  report.var_gaps.push_back(vg);
  for (int s = 0; s < sweeps; ++s) {
    t1 = projected_bellman_sweep(mdp, t1, pi, reward_grid);
    t2 = projected_bellman_sweep(mdp, t2, pi, reward_grid);
    auto [m2, v2] = gaps(t1, t2);
    const double prev_m = report.mean_gaps.back();
    const double prev_v = report.var_gaps.back();
    report.mean_rates.push_back(prev_m > 0.0 ? m2 / prev_m : 0.0);
    report.var_rates.push_back(prev_v > 0.0 ? v2 / prev_v : 0.0);
    report.mean_gaps.push_back(m2);
    report.var_gaps.push_back(v2);
  }
  return report;
}

double param_error_gap(const TabularMdp& mdp, const QuantileTable& table, int n_quantiles,
                       int reference_reward_grid) {
  if (!std::isfinite(mdp.r_max)) {
    throw std::invalid_argument("param_error_gap: refused, rewards are unbounded");
  }
  const Policy pi = uniform_policy(mdp);
  const auto taus = default_tau_grid(n_quantiles);
  double worst = 0.0;
  for (int x = 0; x < mdp.n_states; ++x) {
    const int a_hi = mdp.is_terminal(x) ? 1 : mdp.n_actions;
    for (int a = 0; a < a_hi; ++a) {
      const WeightedSample target = bellman_target(mdp, table, pi, x, a, reference_reward_grid);
      const QuantileRepr projected = quantile_project(target, taus);
      worst = std::max(worst, std::fabs(em_mean(projected) - target.mean()));
    }
  }
  return worst;
}

}  // namespace qem
