#include "qem/dist.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qem {

std::vector<double> default_tau_grid(int n) {
  if (n < 1) throw std::invalid_argument("default_tau_grid: n must be >= 1");
  std::vector<double> taus(n);
  for (int i = 0; i < n; ++i) taus[i] = (2.0 * i + 1.0) / (2.0 * n);
  return taus;
}

double WeightedSample::mean() const {
  double m = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) m += weights[i] * values[i];
  return m;
}

double WeightedSample::variance() const {
  const double m = mean();
  double v = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    v += weights[i] * (values[i] - m) * (values[i] - m);
  }
  return v;
}

QuantileRepr quantile_project(const WeightedSample& target, std::vector<double> taus) {
  if (target.values.empty()) throw std::invalid_argument("quantile_project: empty sample");
  if (target.values.size() != target.weights.size()) {
    throw std::invalid_argument("quantile_project: values/weights size mismatch");
  }
  const std::size_t n = target.values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return target.values[i] < target.values[j]; });
  std::vector<double> cum(n);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    acc += target.weights[order[k]];
    cum[k] = acc;
  }
  QuantileRepr out;
  out.atoms.resize(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const double tau = taus[i];
    auto it = std::lower_bound(cum.begin(), cum.end(), tau);
    std::size_t k = (it == cum.end()) ? n - 1 : static_cast<std::size_t>(it - cum.begin());
    // jump convention: exact hit steps to the next atom
    if (k + 1 < n && cum[k] == tau) ++k;
    out.atoms[i] = target.values[order[k]];
  }
  out.taus = std::move(taus);
  return out;
}

CategoricalRepr categorical_project(const WeightedSample& target, std::vector<double> support) {
  if (support.size() < 2) throw std::invalid_argument("categorical_project: support length >= 2");
  const std::size_t m = support.size();
  const double step = support[1] - support[0];
  if (!(step > 0.0)) throw std::invalid_argument("categorical_project: support must increase");
  for (std::size_t i = 1; i + 1 < m; ++i) {
    if (std::fabs((support[i + 1] - support[i]) - step) > 1e-9 * std::max(1.0, std::fabs(step))) {
      throw std::invalid_argument("categorical_project: support must be evenly spaced");
    }
  }
  CategoricalRepr out;
  out.probs.assign(m, 0.0);
  for (std::size_t j = 0; j < target.values.size(); ++j) {
    const double w = target.values[j];
    const double mass = target.weights[j];
    if (w <= support.front()) {
      out.probs.front() += mass;
    } else if (w >= support.back()) {
      out.probs.back() += mass;
    } else {
      const auto hi = std::upper_bound(support.begin(), support.end(), w);
      const std::size_t i = static_cast<std::size_t>(hi - support.begin()) - 1;
      const double width = support[i + 1] - support[i];
      out.probs[i] += mass * (support[i + 1] - w) / width;
      out.probs[i + 1] += mass * (w - support[i]) / width;
    }
  }
  out.support = std::move(support);
  return out;
}

double wasserstein1(const QuantileRepr& a, const QuantileRepr& b) {
  if (a.atoms.size() != b.atoms.size()) {
    throw std::invalid_argument("wasserstein1: representations must share N");
  }
  std::vector<double> sa = a.atoms;
  std::vector<double> sb = b.atoms;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  double d = 0.0;
  for (std::size_t i = 0; i < sa.size(); ++i) d += std::fabs(sa[i] - sb[i]);
  return d / static_cast<double>(sa.size());
}

double em_mean(const QuantileRepr& repr) {
  double m = 0.0;
  for (double a : repr.atoms) m += a;
  return m / static_cast<double>(repr.atoms.size());
}

double left_truncated_variance(const QuantileRepr& repr) {
  const std::size_t n = repr.atoms.size();
  if (n % 2 != 0) throw std::invalid_argument("left_truncated_variance: N must be even");
  std::vector<double> sorted = repr.atoms;
  std::sort(sorted.begin(), sorted.end());
  const double median_atom = sorted[n / 2 - 1];
  double s = 0.0;
  for (std::size_t i = n / 2; i < n; ++i) {
    const double d = sorted[i] - median_atom;
    s += d * d;
  }
  return s / (2.0 * static_cast<double>(n));
}

Policy uniform_policy(const TabularMdp& mdp) {
  Policy pi(mdp.n_states, std::vector<double>(mdp.n_actions, 1.0 / mdp.n_actions));
  return pi;
}

QuantileTable QuantileTable::zeros(const TabularMdp& mdp, int n_quantiles) {
  QuantileTable t;
  t.n_states = mdp.n_states;
  t.n_actions = mdp.n_actions;
  t.taus = default_tau_grid(n_quantiles);
  t.atoms.assign(static_cast<std::size_t>(mdp.n_states) * mdp.n_actions,
                 std::vector<double>(n_quantiles, 0.0));
  return t;
}

WeightedSample bellman_target(const TabularMdp& mdp, const QuantileTable& table,
                              const Policy& policy, int x, int a, int reward_grid) {
  if (x < 0 || x >= mdp.n_states || a < 0 || a >= mdp.n_actions) {
    throw std::invalid_argument("bellman_target: state/action out of range");
  }
  if (reward_grid < 1) throw std::invalid_argument("bellman_target: reward_grid must be >= 1");

  const RewardDist& rd = mdp.reward(x, a);
  std::vector<double> reward_atoms;
  if (rd.kind() == RewardDist::Kind::Dirac) {
    reward_atoms.push_back(rd.quantile(0.5));
  } else {
    reward_atoms.resize(reward_grid);
    for (int k = 0; k < reward_grid; ++k) {
      reward_atoms[k] = rd.quantile((2.0 * k + 1.0) / (2.0 * reward_grid));
    }
  }
  const double rw = 1.0 / static_cast<double>(reward_atoms.size());

  WeightedSample out;
  if (mdp.is_terminal(x)) {
    out.values = reward_atoms;
    out.weights.assign(reward_atoms.size(), rw);
    return out;
  }

  for (int y = 0; y < mdp.n_states; ++y) {
    const double px = mdp.p(x, a, y);
    if (px == 0.0) continue;
    const int a_hi = mdp.is_terminal(y) ? 1 : mdp.n_actions;
    for (int a2 = 0; a2 < a_hi; ++a2) {
      const double pa = mdp.is_terminal(y) ? 1.0 : policy[y][a2];
      if (pa == 0.0) continue;
      const auto& theta = table.entry(mdp, y, a2);
      if (theta.empty()) throw std::invalid_argument("bellman_target: undefined successor entry");
      const double aw = px * pa / static_cast<double>(theta.size());
      for (double th : theta) {
        const double scaled = mdp.gamma * th;
        for (double r : reward_atoms) {
          out.values.push_back(r + scaled);
          out.weights.push_back(aw * rw);
        }
      }
    }
  }
  return out;
}

QuantileTable projected_bellman_sweep(const TabularMdp& mdp, const QuantileTable& table,
                                      const Policy& policy, int reward_grid) {
  QuantileTable next = table;
  for (int x = 0; x < mdp.n_states; ++x) {
    const int a_hi = mdp.is_terminal(x) ? 1 : mdp.n_actions;
    for (int a = 0; a < a_hi; ++a) {
      const WeightedSample target = bellman_target(mdp, table, policy, x, a, reward_grid);
      next.atoms[static_cast<std::size_t>(x) * mdp.n_actions + a] =
          quantile_project(target, table.taus).atoms;
    }
  }
  return next;
}

QuantileTable projected_fixed_point(const TabularMdp& mdp, const Policy& policy, int n_quantiles,
                                    int reward_grid, int max_sweeps, double tol) {
  QuantileTable table = QuantileTable::zeros(mdp, n_quantiles);
  for (int s = 0; s < max_sweeps; ++s) {
    QuantileTable next = projected_bellman_sweep(mdp, table, policy, reward_grid);
    double delta = 0.0;
    for (std::size_t i = 0; i < table.atoms.size(); ++i) {
      for (std::size_t j = 0; j < table.atoms[i].size(); ++j) {
        delta = std::max(delta, std::fabs(next.atoms[i][j] - table.atoms[i][j]));
      }
    }
    table = std::move(next);
    if (delta <= tol) break;
  }
  return table;
}

}  // namespace qem
