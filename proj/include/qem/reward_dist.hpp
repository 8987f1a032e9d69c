#pragma once

#include <vector>

#include "qem/rng.hpp"

namespace qem {

struct GaussianComponent {
  double weight;
  double mean;
  double stddev;
};

/// Parametric reward distribution attached to a state-action pair.
///
/// Every variant exposes an exact analytic quantile function and mean.
/// The mixture quantile is obtained by bracketed bisection on the CDF
/// (absolute tolerance 1e-12, tighter than the 1e-10 contract).
class RewardDist {
 public:
  enum class Kind { Dirac, Uniform, Exponential, GaussianMixture };

  static RewardDist dirac(double value);
  static RewardDist uniform(double lo, double hi);
  static RewardDist exponential(double mean, double shift = 0.0);
  static RewardDist gaussian_mixture(std::vector<GaussianComponent> components);

  Kind kind() const { return kind_; }
  const std::vector<GaussianComponent>& components() const { return components_; }

  double quantile(double tau) const;
  double cdf(double x) const;
  double mean() const;
  double variance() const;
  double sample(Rng& rng) const;

  /// sup |support|; +infinity for Exponential and GaussianMixture.
  double abs_bound() const;
  bool bounded() const;

 private:
  RewardDist() = default;

  Kind kind_ = Kind::Dirac;
  double a_ = 0.0;  // Dirac value / Uniform lo / Exponential mean
  double b_ = 0.0;  // Uniform hi / Exponential shift
  std::vector<GaussianComponent> components_;
};

}  // namespace qem
