#include "qem/agent.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qem {

double TrainConfig::learning_rate(long long t) const {
  double rate = lr_schedule.empty() ? 0.05 : lr_schedule.front().rate;
  for (const auto& seg : lr_schedule) {
    if (t >= seg.from_step) rate = seg.rate;
  }
  return rate;
}

void TrainConfig::validate() const {
  if (steps < 0) throw std::invalid_argument("TrainConfig: steps must be >= 0");
  if (n_quantiles < 1) throw std::invalid_argument("TrainConfig: n_quantiles must be >= 1");
  if (log_every < 1) throw std::invalid_argument("TrainConfig: log_every must be >= 1");
  if (episode_cap < 1) throw std::invalid_argument("TrainConfig: episode_cap must be >= 1");
  for (const auto& seg : lr_schedule) {
    if (!(seg.rate > 0.0)) throw std::invalid_argument("TrainConfig: learning rates must be > 0");
  }
  if (estimator.kind == EstimatorKind::Qem) estimator.weights.validate();
}

namespace {

double dot(const Eigen::VectorXd& w, const std::vector<double>& atoms) {
  double s = 0.0;
  for (int i = 0; i < w.size(); ++i) s += w(i) * atoms[static_cast<std::size_t>(i)];
  return s;
}

int draw_from_distribution(const std::vector<double>& probs, Rng& rng) {
  double u = rng.uniform();
  for (std::size_t a = 0; a < probs.size(); ++a) {
    if (u < probs[a]) return static_cast<int>(a);
    u -= probs[a];
  }
  return static_cast<int>(probs.size()) - 1;
}

// Cached linear readout for Q estimates on a fixed grid.
struct EstimatorContext {
  EstimatorSpec spec;
  std::optional<QemReadout> readout;

  EstimatorContext(const EstimatorSpec& s, const std::vector<double>& taus) : spec(s) {
    if (spec.kind == EstimatorKind::Qem) readout = make_readout(taus, spec.weights, spec.order);
  }

  double q(const std::vector<double>& atoms) const {
    if (spec.kind == EstimatorKind::Em) {
      double s = 0.0;
      for (double a : atoms) s += a;
      return s / static_cast<double>(atoms.size());
    }
    return dot(readout->m1, atoms);
  }

  double sigma_coefficient(const std::vector<double>& atoms) const {
    return dot(readout->m2, atoms);
  }
};

int greedy_action(const QuantileTable& table, const TabularMdp& mdp, int x,
                  const EstimatorContext& ctx) {
  int best = 0;
  double best_q = ctx.q(table.entry(mdp, x, 0));
  for (int a = 1; a < mdp.n_actions; ++a) {
    const double q = ctx.q(table.entry(mdp, x, a));
    if (q > best_q) {
      best_q = q;
      best = a;
    }
  }
  return best;
}

double dltv_bonus_scale(long long t, double c) {
  const double tt = static_cast<double>(std::max<long long>(t, 1));
  return c * std::sqrt(std::log(tt) / tt);
}

// `tick` drives both schedules: the step counter by default, the episode
// counter when epsilon_per_episode is set.
int select_action_impl(const QuantileTable& table, const TabularMdp& mdp, int x, long long tick,
                       const TrainConfig& config, const EstimatorContext& ctx, Rng& rng) {
  if (mdp.is_terminal(x)) throw std::invalid_argument("select_action: terminal state");
  if (config.exploration.kind == ExplorationKind::EpsilonGreedy) {
    const double eps = std::pow(config.exploration.epsilon_base, static_cast<double>(tick / 100));
    if (rng.uniform() < eps) return static_cast<int>(rng.uniform_int(mdp.n_actions));
    return greedy_action(table, mdp, x, ctx);
  }
  const double scale = dltv_bonus_scale(tick, config.exploration.dltv_c);
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int a = 0; a < mdp.n_actions; ++a) {
    const auto& atoms = table.entry(mdp, x, a);
    double bonus;
    if (ctx.spec.kind == EstimatorKind::Qem) {
      bonus = scale * std::sqrt(std::max(ctx.sigma_coefficient(atoms), 0.0));
    } else {
      bonus = scale * std::sqrt(left_truncated_variance(QuantileRepr{atoms, table.taus}));
    }
    const double score = ctx.q(atoms) + bonus;
    if (score > best_score) {
      best_score = score;
      best = a;
    }
  }
  return best;
}

}  // namespace

double q_value(const QuantileTable& table, const TabularMdp& mdp, int x, int a,
               const EstimatorSpec& estimator) {
  EstimatorContext ctx(estimator, table.taus);
  return ctx.q(table.entry(mdp, x, a));
}

int select_action(const QuantileTable& table, const TabularMdp& mdp, int x, long long t,
                  const TrainConfig& config, Rng& rng) {
  EstimatorContext ctx(config.estimator, table.taus);
  return select_action_impl(table, mdp, x, t, config, ctx, rng);
}

void qr_update_inplace(std::vector<double>& atoms, const std::vector<double>& taus,
                       const WeightedSample& target, double lr) {
  if (!(lr > 0.0)) throw std::invalid_argument("qr_update: lr must be > 0");
  const std::size_t m = target.values.size();
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return target.values[i] < target.values[j]; });
  std::vector<double> sorted(m), prefix(m + 1, 0.0);
  for (std::size_t k = 0; k < m; ++k) {
    sorted[k] = target.values[order[k]];
    prefix[k + 1] = prefix[k] + target.weights[order[k]];
  }
  const double total = prefix[m];
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    // weight strictly below theta_i; ties take the tau branch
    const auto it = std::lower_bound(sorted.begin(), sorted.end(), atoms[i]);
    const double below = prefix[static_cast<std::size_t>(it - sorted.begin())];
    atoms[i] -= lr * (below - taus[i] * total);
  }
}

QuantileRepr qr_update(const QuantileRepr& repr, const WeightedSample& target, double lr) {
  QuantileRepr out = repr;
  qr_update_inplace(out.atoms, out.taus, target, lr);
  return out;
}

namespace {

void qemrl_step_impl(QuantileTable& table, const TabularMdp& mdp, const StepTransition& transition,
                     long long t, const TrainConfig& config, const EstimatorContext& ctx, Rng& rng) {
  const double lr = config.learning_rate(t);
  WeightedSample target;
  if (transition.done) {
    target.values = {transition.r};
    target.weights = {1.0};
  } else {
    int a_star;
    if (config.mode == Mode::Evaluation) {
      const Policy& pi = config.eval_policy;
      a_star = pi.empty() ? static_cast<int>(rng.uniform_int(mdp.n_actions))
                          : draw_from_distribution(pi[transition.x_next], rng);
    } else {
      a_star = greedy_action(table, mdp, transition.x_next, ctx);
    }
    const auto& next_atoms = table.entry(mdp, transition.x_next, a_star);
    target.values.resize(next_atoms.size());
    target.weights.assign(next_atoms.size(), 1.0 / static_cast<double>(next_atoms.size()));
    for (std::size_t j = 0; j < next_atoms.size(); ++j) {
      target.values[j] = transition.r + mdp.gamma * next_atoms[j];
    }
  }
  auto& atoms = table.entry(mdp, transition.x, transition.a);
  qr_update_inplace(atoms, table.taus, target, lr);
}

}  // namespace

void qemrl_step(QuantileTable& table, const TabularMdp& mdp, const StepTransition& transition,
                long long t, const TrainConfig& config, Rng& rng) {
  EstimatorContext ctx(config.estimator, table.taus);
  qemrl_step_impl(table, mdp, transition, t, config, ctx, rng);
}

TrainResult run_training(const TabularMdp& mdp, const TrainConfig& config_in) {
  TrainConfig config = config_in;
  config.validate();
  TabularMdp env = mdp;
  if (config.gamma_override) env.gamma = *config.gamma_override;

  Rng rng(config.seed);
  QuantileTable table = QuantileTable::zeros(env, config.n_quantiles);
  for (auto& entry : table.atoms) {
    for (auto& atom : entry) atom = rng.uniform(config.init_lo, config.init_hi);
  }

  EstimatorContext ctx(config.estimator, table.taus);
  EstimatorContext em_ctx(EstimatorSpec::em(), table.taus);
  EstimatorContext qem_ctx(
      config.estimator.kind == EstimatorKind::Qem
          ? config.estimator
          : EstimatorSpec::qem(config.estimator.order, config.estimator.weights),
      table.taus);

  TrainResult result;
  result.probe_states = config.probe_states;
  result.n_actions = env.n_actions;

  std::vector<long long> action_counts(env.n_actions, 0);
  auto record = [&](long long step) {
    TrainRecord rec;
    rec.step = step;
    for (int probe : config.probe_states) {
      for (int a = 0; a < env.n_actions; ++a) {
        const auto& atoms = table.entry(env, probe, a);
        rec.q_em.push_back(em_ctx.q(atoms));
        rec.q_qem.push_back(qem_ctx.q(atoms));
        rec.atoms.push_back(atoms);
      }
    }
    rec.action_counts = action_counts;
    std::fill(action_counts.begin(), action_counts.end(), 0);
    result.records.push_back(std::move(rec));
  };

  record(0);
  int x = env.start_state;
  long long episode_steps = 0;
  long long episodes_done = 0;
  for (long long t = 0; t < config.steps; ++t) {
    const long long tick = config.epsilon_per_episode ? episodes_done : t;
    if (env.is_terminal(x)) {
      const double r = env.reward(x, 0).sample(rng);
      qemrl_step_impl(table, env, StepTransition{x, 0, r, x, true}, t, config, ctx, rng);
      x = env.start_state;
      episode_steps = 0;
      ++episodes_done;
    } else {
      int a;
      if (config.mode == Mode::Evaluation) {
        // on-policy evaluation: behave according to the evaluated policy
        a = config.eval_policy.empty()
                ? static_cast<int>(rng.uniform_int(env.n_actions))
                : draw_from_distribution(config.eval_policy[static_cast<std::size_t>(x)], rng);
      } else {
        a = select_action_impl(table, env, x, tick, config, ctx, rng);
      }
      action_counts[static_cast<std::size_t>(a)]++;
      const Transition tr = sample_transition(env, x, a, rng);
      qemrl_step_impl(table, env, StepTransition{x, a, tr.reward, tr.next_state, false}, t, config,
                      ctx, rng);
      x = tr.next_state;
      if (++episode_steps >= config.episode_cap) {
        x = env.start_state;
        episode_steps = 0;
        ++episodes_done;
      }
    }
    if ((t + 1) % config.log_every == 0) record(t + 1);
  }
  if (config.steps % config.log_every != 0) record(config.steps);

  result.final_table = std::move(table);
  return result;
}

}  // namespace qem
