#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "qem/cfe.hpp"
#include "qem/dist.hpp"
#include "qem/mdp.hpp"

namespace qem {

enum class EstimatorKind { Em, Qem };

struct EstimatorSpec {
  EstimatorKind kind = EstimatorKind::Em;
  int order = 3;
  WeightSpec weights;

  static EstimatorSpec em() { return {}; }
  static EstimatorSpec qem(int order = 3, WeightSpec weights = WeightSpec::tails()) {
    return EstimatorSpec{EstimatorKind::Qem, order, std::move(weights)};
  }
};

enum class Mode { Evaluation, Control };

enum class ExplorationKind { EpsilonGreedy, Dltv };

struct ExplorationSpec {
  ExplorationKind kind = ExplorationKind::EpsilonGreedy;
  double epsilon_base = 0.9;  // epsilon(t) = base^floor(t/100)
  double dltv_c = 50.0;       // bonus c_t = c * sqrt(log t / t)

  static ExplorationSpec epsilon_greedy(double base = 0.9) {
    return ExplorationSpec{ExplorationKind::EpsilonGreedy, base, 50.0};
  }
  static ExplorationSpec dltv(double c = 50.0) {
    return ExplorationSpec{ExplorationKind::Dltv, 0.9, c};
  }
};

struct LrSegment {
  long long from_step;
  double rate;
};

struct TrainConfig {
  EstimatorSpec estimator;
  Mode mode = Mode::Control;
  Policy eval_policy;  // evaluation mode; empty means uniform
  ExplorationSpec exploration;
  /// When true the epsilon schedule ticks once per completed episode
  /// instead of once per step (the gridworld preset).
  bool epsilon_per_episode = false;
  int n_quantiles = 128;
  long long steps = 150000;
  std::vector<LrSegment> lr_schedule = {{0, 0.05}, {50000, 0.025}, {100000, 0.0125}};
  std::optional<double> gamma_override;
  double init_lo = -0.5;
  double init_hi = 0.5;
  std::uint64_t seed = 0;
  long long log_every = 500;
  long long episode_cap = 200;
  std::vector<int> probe_states;  // snapshots recorded for these states

  double learning_rate(long long t) const;
  void validate() const;
};

/// One logged checkpoint: per (probe, action) Q readouts under both
/// estimators plus the raw atoms, and the actions chosen since the last
/// checkpoint.
struct TrainRecord {
  long long step = 0;
  std::vector<double> q_em;                // [probe * A + a]
  std::vector<double> q_qem;               // [probe * A + a]
  std::vector<std::vector<double>> atoms;  // [probe * A + a]
  std::vector<long long> action_counts;    // [a]
};

struct TrainResult {
  std::vector<TrainRecord> records;
  QuantileTable final_table;
  std::vector<int> probe_states;
  int n_actions = 0;
};

/// Q estimate for one entry under the configured estimator.
double q_value(const QuantileTable& table, const TabularMdp& mdp, int x, int a,
               const EstimatorSpec& estimator);

/// Behaviour action at x for training step t. Epsilon-greedy explores
/// w.p. base^floor(t/100), otherwise argmax Q; DLTV picks
/// argmax Q + c_t * sqrt(sigma2_plus). Ties break to the lowest index.
int select_action(const QuantileTable& table, const TabularMdp& mdp, int x, long long t,
                  const TrainConfig& config, Rng& rng);

/// Pinball subgradient step against a weighted target:
/// theta_i -= lr * (sum_j w_j 1{t_j < theta_i} - tau_i). Ties count as
/// the "<=" branch (indicator 0).
QuantileRepr qr_update(const QuantileRepr& repr, const WeightedSample& target, double lr);

/// In-place form used by the training loop.
void qr_update_inplace(std::vector<double>& atoms, const std::vector<double>& taus,
                       const WeightedSample& target, double lr);

struct StepTransition {
  int x;
  int a;
  double r;
  int x_next;
  bool done;  // final reward of the episode (taken at a terminal state)
};

/// One TD update: target atoms are {r + gamma * theta_j(x', a*)} with a*
/// drawn from the policy (evaluation) or argmax under the configured
/// estimator (control); done transitions regress on {r} alone.
void qemrl_step(QuantileTable& table, const TabularMdp& mdp, const StepTransition& transition,
                long long t, const TrainConfig& config, Rng& rng);

/// Episodic training from the start state. Deterministic given
/// (config, seed). Terminal states pay their reward on a dedicated final
/// step, recorded with done = true.
TrainResult run_training(const TabularMdp& mdp, const TrainConfig& config);

}  // namespace qem
