#include "qem/mdp.hpp"

#include <cmath>
#include <stdexcept>

namespace qem {

void TabularMdp::validate() const {
  if (n_states <= 0 || n_actions <= 0) throw std::invalid_argument("TabularMdp: empty");
  if (transition.size() != static_cast<std::size_t>(n_states) * n_actions * n_states ||
      rewards.size() != static_cast<std::size_t>(n_states) * n_actions ||
      terminal.size() != static_cast<std::size_t>(n_states)) {
    throw std::invalid_argument("TabularMdp: inconsistent table sizes");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("TabularMdp: gamma must lie in [0,1)");
  for (int x = 0; x < n_states; ++x) {
    for (int a = 0; a < n_actions; ++a) {
      double row = 0.0;
      for (int y = 0; y < n_states; ++y) row += p(x, a, y);
      if (std::fabs(row - 1.0) > 1e-12) {
        throw std::invalid_argument("TabularMdp: transition row does not sum to 1");
      }
      if (is_terminal(x) && p(x, a, x) != 1.0) {
        throw std::invalid_argument("TabularMdp: terminal state must self-loop");
      }
    }
  }
}

Transition sample_transition(const TabularMdp& mdp, int x, int a, Rng& rng) {
  if (x < 0 || x >= mdp.n_states || a < 0 || a >= mdp.n_actions) {
    throw std::invalid_argument("sample_transition: state/action out of range");
  }
  if (mdp.is_terminal(x)) {
    throw std::invalid_argument("sample_transition: cannot step a terminal state");
  }
  const double r = mdp.reward(x, a).sample(rng);
  double u = rng.uniform();
  int next = mdp.n_states - 1;
  for (int y = 0; y < mdp.n_states; ++y) {
    const double q = mdp.p(x, a, y);
    if (u < q) {
      next = y;
      break;
    }
    u -= q;
  }
  return Transition{r, next, mdp.is_terminal(next)};
}

namespace {

TabularMdp make_empty(int n_states, int n_actions, double gamma) {
  TabularMdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.gamma = gamma;
  m.transition.assign(static_cast<std::size_t>(n_states) * n_actions * n_states, 0.0);
  m.rewards.assign(static_cast<std::size_t>(n_states) * n_actions, RewardDist::dirac(0.0));
  m.terminal.assign(n_states, 0);
  return m;
}

void set_p(TabularMdp& m, int x, int a, int y, double prob) {
  m.transition[static_cast<std::size_t>(x) * m.n_actions * m.n_states +
               static_cast<std::size_t>(a) * m.n_states + y] = prob;
}

void set_reward(TabularMdp& m, int x, const RewardDist& d) {
  for (int a = 0; a < m.n_actions; ++a) m.rewards[static_cast<std::size_t>(x) * m.n_actions + a] = d;
}

void finish(TabularMdp& m) {
  double bound = 0.0;
  for (const auto& d : m.rewards) bound = std::max(bound, d.abs_bound());
  m.r_max = bound;
  m.validate();
}

}  // namespace

TabularMdp build_two_arm(int n_quantiles, double gamma) {
  if (n_quantiles < 1) throw std::invalid_argument("build_two_arm: n_quantiles must be >= 1");
  TabularMdp m = make_empty(3, 1, gamma);
  m.name = "two-arm";
  const double inv_n = 1.0 / n_quantiles;
  set_p(m, 0, 0, 1, 0.5);
  set_p(m, 0, 0, 2, 0.5);
  set_p(m, 1, 0, 1, 1.0);
  set_p(m, 2, 0, 2, 1.0);
  set_reward(m, 1, RewardDist::uniform(0.0, 1.0));
  set_reward(m, 2, RewardDist::uniform(inv_n, 1.0 + inv_n));
  m.terminal[1] = m.terminal[2] = 1;
  finish(m);
  return m;
}

TabularMdp build_five_state(double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("build_five_state: gamma in (0,1)");
  TabularMdp m = make_empty(5, 2, gamma);
  m.name = "five-state";
  // x0 -a1-> x1 -> x3(terminal), x0 -a2-> x2 -> x4(terminal)
  set_p(m, 0, 0, 1, 1.0);
  set_p(m, 0, 1, 2, 1.0);
  for (int a = 0; a < 2; ++a) {
    set_p(m, 1, a, 3, 1.0);
    set_p(m, 2, a, 4, 1.0);
    set_p(m, 3, a, 3, 1.0);
    set_p(m, 4, a, 4, 1.0);
  }
  set_reward(m, 3, RewardDist::exponential(1.2 / (gamma * gamma)));
  set_reward(m, 4, RewardDist::exponential(1.0 / (gamma * gamma)));
  m.terminal[3] = m.terminal[4] = 1;
  finish(m);
  return m;
}

RewardDist default_chain_mixture() {
  return RewardDist::gaussian_mixture({{0.7, -2.0, 1.0}, {0.3, 3.0, 1.0}});
}

TabularMdp build_chain(double gamma, const RewardDist& mixture) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("build_chain: gamma in (0,1)");
  TabularMdp m = make_empty(6, 1, gamma);
  m.name = "chain";
  for (int x = 0; x < 5; ++x) set_p(m, x, 0, x + 1, 1.0);
  set_p(m, 5, 0, 5, 1.0);
  set_reward(m, 5, mixture);
  m.terminal[5] = 1;
  finish(m);
  return m;
}

TabularMdp build_frozen_lake() {
  // Layout:
  //   S F F F
  //   F H F H
  //   F F F H
  //   H F F G
  static const char* rows[4] = {"SFFF", "FHFH", "FFFH", "HFFG"};
  TabularMdp m = make_empty(16, 4, 0.999);
  m.name = "frozenlake";
  auto idx = [](int r, int c) { return r * 4 + c; };
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const char cell = rows[r][c];
      const int s = idx(r, c);
      if (cell == 'H' || cell == 'G') m.terminal[s] = 1;
      if (cell == 'G') set_reward(m, s, RewardDist::dirac(1.0));
    }
  }
  const int dr[4] = {0, 1, 0, -1};  // left, down, right, up
  const int dc[4] = {-1, 0, 1, 0};
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      const int s = idx(r, c);
      if (m.is_terminal(s)) {
        for (int a = 0; a < 4; ++a) set_p(m, s, a, s, 1.0);
        continue;
      }
      for (int a = 0; a < 4; ++a) {
        // intended direction plus the two perpendicular slips, 1/3 each
        const int moves[3] = {a, (a + 1) % 4, (a + 3) % 4};
        for (int move : moves) {
          int r2 = r + dr[move];
          int c2 = c + dc[move];
          if (r2 < 0 || r2 >= 4 || c2 < 0 || c2 >= 4) {
            r2 = r;
            c2 = c;
          }
          m.transition[static_cast<std::size_t>(s) * 4 * 16 + static_cast<std::size_t>(a) * 16 +
                       idx(r2, c2)] += 1.0 / 3.0;
        }
      }
    }
  }
  finish(m);
  return m;
}

}  // namespace qem
