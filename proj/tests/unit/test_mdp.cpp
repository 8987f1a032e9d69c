#include <doctest.h>

#include <stdexcept>
#include <vector>

#include <cmath>

#include "qem/mdp.hpp"

using namespace qem;

TEST_CASE("reward distribution invariants are enforced") {
  CHECK_THROWS_AS(RewardDist::uniform(1.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(RewardDist::exponential(0.0), std::invalid_argument);
  CHECK_THROWS_AS(RewardDist::gaussian_mixture({{0.5, 0.0, 1.0}, {0.6, 1.0, 1.0}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(RewardDist::gaussian_mixture({{1.0, 0.0, 0.0}}), std::invalid_argument);
}

TEST_CASE("analytic quantiles, means and bounds per variant") {
  const auto d = RewardDist::dirac(3.5);
  CHECK(d.quantile(0.017) == 3.5);
  CHECK(d.mean() == 3.5);
  CHECK(d.abs_bound() == 3.5);

  const auto u = RewardDist::uniform(0.25, 1.25);
  CHECK(u.quantile(0.5) == doctest::Approx(0.75));
  CHECK(u.mean() == doctest::Approx(0.75));
  CHECK(u.abs_bound() == 1.25);

  const auto e = RewardDist::exponential(2.0, 1.0);
  CHECK(e.quantile(0.5) == doctest::Approx(1.0 + 2.0 * std::log(2.0)));
  CHECK(e.mean() == doctest::Approx(3.0));
  CHECK(!e.bounded());

  const auto m = default_chain_mixture();
  CHECK(m.mean() == doctest::Approx(0.7 * -2.0 + 0.3 * 3.0));
  // quantile inverts the CDF to the stated tolerance
  for (double tau : {0.01, 0.2, 0.5, 0.7, 0.95}) {
    CHECK(m.cdf(m.quantile(tau)) == doctest::Approx(tau).epsilon(1e-9));
  }
}

TEST_CASE("expectation equals the integral of the quantile function") {
  // midpoint rule over 1e5 levels, 1e-3 tolerance
  const RewardDist dists[] = {RewardDist::uniform(-1.0, 2.0), RewardDist::exponential(1.5, -0.5),
                              default_chain_mixture(), RewardDist::dirac(0.3)};
  for (const auto& d : dists) {
    const int n = 100000;
    double integral = 0.0;
    for (int i = 0; i < n; ++i) integral += d.quantile((2.0 * i + 1.0) / (2.0 * n));
    integral /= n;
    CHECK(std::fabs(integral - d.mean()) < 1e-3);
  }
}

TEST_CASE("transition rows are normalized for every builder") {
  for (const auto& mdp : {build_two_arm(4), build_five_state(0.9), build_chain(),
                          build_frozen_lake()}) {
    for (int x = 0; x < mdp.n_states; ++x) {
      for (int a = 0; a < mdp.n_actions; ++a) {
        double row = 0.0;
        for (int y = 0; y < mdp.n_states; ++y) row += mdp.p(x, a, y);
        CHECK(std::fabs(row - 1.0) <= 1e-12);
      }
    }
  }
}

TEST_CASE("sample_transition contract") {
  const auto mdp = build_two_arm(4);
  Rng rng(7);
  CHECK_THROWS_AS(sample_transition(mdp, 1, 0, rng), std::invalid_argument);
  CHECK_THROWS_AS(sample_transition(mdp, 0, 3, rng), std::invalid_argument);

  int hits1 = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    const auto tr = sample_transition(mdp, 0, 0, rng);
    CHECK(tr.done);
    CHECK(tr.reward == 0.0);
    if (tr.next_state == 1) ++hits1;
  }
  CHECK(std::fabs(hits1 / static_cast<double>(n) - 0.5) < 0.02);

  // terminal arm rewards: x1 pays Unif(0,1) on its final step
  for (int i = 0; i < 100; ++i) {
    const double r = mdp.reward(1, 0).sample(rng);
    CHECK(r >= 0.0);
    CHECK(r < 1.0);
  }

  // deterministic row always lands on its successor
  const auto chain = build_chain();
  for (int i = 0; i < 20; ++i) CHECK(sample_transition(chain, 2, 0, rng).next_state == 3);
}

TEST_CASE("two-arm structure") {
  const auto mdp = build_two_arm(4);
  CHECK(mdp.n_states == 3);
  CHECK(mdp.reward(2, 0).quantile(0.5) == doctest::Approx(0.75));
  CHECK(mdp.reward(2, 0).mean() == doctest::Approx(0.75));
  CHECK(mdp.is_terminal(1));
  CHECK(mdp.is_terminal(2));
  CHECK(mdp.r_max == doctest::Approx(1.25));

  // true return at x0 is the equal mixture of gamma*U(0,1) and
  // gamma*U(1/N, 1+1/N); its (1/2N)-quantile is gamma/N. The mixture CDF
  // below gamma/N has only the first arm contributing.
  const double gamma = mdp.gamma;
  const int n = 4;
  const double q = gamma / n;
  auto mixture_cdf = [&](double y) {
    const double f1 = std::min(std::max(y / gamma, 0.0), 1.0);
    const double f2 = std::min(std::max((y / gamma - 1.0 / n), 0.0), 1.0);
    return 0.5 * (f1 + f2);
  };
  CHECK(mixture_cdf(q) == doctest::Approx(1.0 / (2.0 * n)));
  CHECK(mixture_cdf(q - 1e-9) < 1.0 / (2.0 * n));
}

TEST_CASE("five-state returns have means 1.2 and 1.0") {
  const double gamma = 0.95;
  const auto mdp = build_five_state(gamma);
  CHECK(gamma * gamma * mdp.reward(3, 0).mean() == doctest::Approx(1.2));
  CHECK(gamma * gamma * mdp.reward(4, 0).mean() == doctest::Approx(1.0));

  // Monte-Carlo rollout oracle for the discounted return from x0
  Rng rng(11);
  for (int action = 0; action < 2; ++action) {
    double sum = 0.0;
    const int n = 10000;
    for (int i = 0; i < n; ++i) {
      int x = 0;
      double g = 0.0, disc = 1.0;
      int a = action;
      while (true) {
        if (mdp.is_terminal(x)) {
          g += disc * mdp.reward(x, 0).sample(rng);
          break;
        }
        const auto tr = sample_transition(mdp, x, a, rng);
        g += disc * tr.reward;
        disc *= gamma;
        x = tr.next_state;
        a = 0;
      }
      sum += g;
    }
    CHECK(std::fabs(sum / n - (action == 0 ? 1.2 : 1.0)) < 0.05);
  }
}

TEST_CASE("gamma close to 1 makes terminal means approach 1.2 and 1.0 directly") {
  const auto mdp = build_five_state(0.9999999);
  CHECK(mdp.reward(3, 0).mean() == doctest::Approx(1.2).epsilon(1e-5));
  CHECK(mdp.reward(4, 0).mean() == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("chain return at x0 is the gamma^5-scaled mixture") {
  const double gamma = 0.99;
  const auto mdp = build_chain(gamma);
  const double scale = std::pow(gamma, 5.0);
  CHECK(scale * default_chain_mixture().mean() == doctest::Approx(scale * -0.5));

  // Monte-Carlo check of the scaled quantiles at a few levels
  Rng rng(3);
  std::vector<double> returns;
  for (int i = 0; i < 20000; ++i) {
    int x = 0;
    double g = 0.0, disc = 1.0;
    while (!mdp.is_terminal(x)) {
      const auto tr = sample_transition(mdp, x, 0, rng);
      g += disc * tr.reward;
      disc *= gamma;
      x = tr.next_state;
    }
    g += disc * mdp.reward(x, 0).sample(rng);
    returns.push_back(g);
  }
  std::sort(returns.begin(), returns.end());
  for (double tau : {0.25, 0.5, 0.9}) {
    const double empirical = returns[static_cast<std::size_t>(tau * returns.size())];
    const double analytic = scale * default_chain_mixture().quantile(tau);
    CHECK(std::fabs(empirical - analytic) < 0.05);
  }
}

TEST_CASE("frozen lake slip rule and rewards") {
  const auto mdp = build_frozen_lake();
  CHECK(mdp.n_states == 16);
  CHECK(mdp.n_actions == 4);
  CHECK(mdp.gamma == doctest::Approx(0.999));
  CHECK(mdp.is_terminal(15));
  CHECK(mdp.reward(15, 0).mean() == 1.0);
  CHECK(mdp.reward(5, 0).mean() == 0.0);  // hole pays nothing
  CHECK(mdp.is_terminal(5));

  // from (2,1)=9, action right: intended (2,2)=10, perpendicular up
  // (1,1)=5 and down (3,1)=13, 1/3 each
  CHECK(mdp.p(9, 2, 10) == doctest::Approx(1.0 / 3.0));
  CHECK(mdp.p(9, 2, 5) == doctest::Approx(1.0 / 3.0));
  CHECK(mdp.p(9, 2, 13) == doctest::Approx(1.0 / 3.0));

  // wall reflection at the start corner: left keeps 2/3 mass at S
  CHECK(mdp.p(0, 0, 0) == doctest::Approx(2.0 / 3.0));
  CHECK(mdp.p(0, 0, 4) == doctest::Approx(1.0 / 3.0));
}
