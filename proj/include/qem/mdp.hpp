#pragma once

#include <string>
#include <vector>

#include "qem/reward_dist.hpp"
#include "qem/rng.hpp"

namespace qem {

/// Finite MDP with parametric stochastic rewards.
///
/// Reward convention: R(x,a) is collected when acting at x. A terminal
/// state pays its own reward once on a final step and the episode ends,
/// so its return distribution equals its reward distribution. Terminal
/// states self-loop in the transition table. sample_transition only
/// steps non-terminal states; the final reward draw at a terminal state
/// is taken directly from rewards(x) by the training loop.
struct TabularMdp {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> transition;   // [x * A * S + a * S + x']
  std::vector<RewardDist> rewards;  // [x * A + a]
  std::vector<char> terminal;       // per state
  double gamma = 0.99;
  double r_max = 0.0;  // sup |reward|, +infinity allowed
  int start_state = 0;
  std::string name;

  double p(int x, int a, int x2) const {
    return transition[static_cast<std::size_t>(x) * n_actions * n_states +
                      static_cast<std::size_t>(a) * n_states + x2];
  }
  const RewardDist& reward(int x, int a) const {
    return rewards[static_cast<std::size_t>(x) * n_actions + a];
  }
  bool is_terminal(int x) const { return terminal[x] != 0; }

  /// Checks row normalization (1e-12) and terminal self-loops.
  void validate() const;
};

struct Transition {
  double reward;
  int next_state;
  bool done;  // next_state is terminal
};

/// Draws (r, x', done) for a non-terminal state. Terminal x or
/// out-of-range indices raise std::invalid_argument.
Transition sample_transition(const TabularMdp& mdp, int x, int a, Rng& rng);

/// Single-action bias example: x0 branches 50/50 to terminal arms with
/// Uniform(0,1) and Uniform(1/N, 1+1/N) rewards.
TabularMdp build_two_arm(int n_quantiles, double gamma = 0.999);

/// Two deterministic three-step paths with exponential terminal rewards;
/// terminal means are 1.2/gamma^2 and 1.0/gamma^2 so the returns at x0
/// have means exactly 1.2 and 1.0.
TabularMdp build_five_state(double gamma);

RewardDist default_chain_mixture();

/// Six-state deterministic chain, mixture reward at terminal x5; the
/// return at x0 is the gamma^5-scaled mixture.
TabularMdp build_chain(double gamma = 0.99, const RewardDist& mixture = default_chain_mixture());

/// Standard 4x4 slippery grid: intended direction w.p. 1/3, each
/// perpendicular w.p. 1/3, walls reflect to self. Dirac(1) reward at the
/// goal, holes and goal terminal, gamma = 0.999.
/// Actions: 0 = left, 1 = down, 2 = right, 3 = up.
TabularMdp build_frozen_lake();

}  // namespace qem
