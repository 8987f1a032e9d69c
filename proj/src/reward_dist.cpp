#include "qem/reward_dist.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "qem/normal.hpp"

namespace qem {

RewardDist RewardDist::dirac(double value) {
  RewardDist d;
  d.kind_ = Kind::Dirac;
  d.a_ = value;
  return d;
}

RewardDist RewardDist::uniform(double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("RewardDist::uniform: requires lo < hi");
  RewardDist d;
  d.kind_ = Kind::Uniform;
  d.a_ = lo;
  d.b_ = hi;
  return d;
}

RewardDist RewardDist::exponential(double mean, double shift) {
  if (!(mean > 0.0)) throw std::invalid_argument("RewardDist::exponential: requires mean > 0");
  RewardDist d;
  d.kind_ = Kind::Exponential;
  d.a_ = mean;
  d.b_ = shift;
  return d;
}

RewardDist RewardDist::gaussian_mixture(std::vector<GaussianComponent> components) {
  if (components.empty()) {
    throw std::invalid_argument("RewardDist::gaussian_mixture: needs at least one component");
  }
  double wsum = 0.0;
  for (const auto& c : components) {
    if (!(c.weight >= 0.0 && c.weight <= 1.0)) {
      throw std::invalid_argument("RewardDist::gaussian_mixture: weights must lie in [0,1]");
    }
    if (!(c.stddev > 0.0)) {
      throw std::invalid_argument("RewardDist::gaussian_mixture: stddev must be positive");
    }
    wsum += c.weight;
  }
  if (std::fabs(wsum - 1.0) > 1e-12) {
    throw std::invalid_argument("RewardDist::gaussian_mixture: weights must sum to 1");
  }
  RewardDist d;
  d.kind_ = Kind::GaussianMixture;
  d.components_ = std::move(components);
  return d;
}

double RewardDist::cdf(double x) const {
  switch (kind_) {
    case Kind::Dirac:
      return x >= a_ ? 1.0 : 0.0;
    case Kind::Uniform:
      if (x <= a_) return 0.0;
      if (x >= b_) return 1.0;
      return (x - a_) / (b_ - a_);
    case Kind::Exponential:
      return x <= b_ ? 0.0 : 1.0 - std::exp(-(x - b_) / a_);
    case Kind::GaussianMixture: {
      double f = 0.0;
      for (const auto& c : components_) f += c.weight * std_normal_cdf((x - c.mean) / c.stddev);
      return f;
    }
  }
  return 0.0;
}

double RewardDist::quantile(double tau) const {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw std::invalid_argument("RewardDist::quantile: tau must lie in (0,1)");
  }
  switch (kind_) {
    case Kind::Dirac:
      return a_;
    case Kind::Uniform:
      return a_ + tau * (b_ - a_);
    case Kind::Exponential:
      return b_ - a_ * std::log1p(-tau);
    case Kind::GaussianMixture: {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -std::numeric_limits<double>::infinity();
      for (const auto& c : components_) {
        lo = std::min(lo, c.mean - 40.0 * c.stddev);
        hi = std::max(hi, c.mean + 40.0 * c.stddev);
      }
      // bisection on the CDF; monotone, so the bracket is preserved
      for (int it = 0; it < 200 && hi - lo > 1e-12 * std::max(1.0, std::fabs(lo) + std::fabs(hi)); ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cdf(mid) >= tau)
          hi = mid;
        else
          lo = mid;
      }
      return 0.5 * (lo + hi);
    }
  }
  return 0.0;
}

double RewardDist::mean() const {
  switch (kind_) {
    case Kind::Dirac:
      return a_;
    case Kind::Uniform:
      return 0.5 * (a_ + b_);
    case Kind::Exponential:
      return b_ + a_;
    case Kind::GaussianMixture: {
      double m = 0.0;
      for (const auto& c : components_) m += c.weight * c.mean;
      return m;
    }
  }
  return 0.0;
}

double RewardDist::variance() const {
  switch (kind_) {
    case Kind::Dirac:
      return 0.0;
    case Kind::Uniform: {
      const double w = b_ - a_;
      return w * w / 12.0;
    }
    case Kind::Exponential:
      return a_ * a_;
    case Kind::GaussianMixture: {
      const double m = mean();
      double v = 0.0;
      for (const auto& c : components_) {
        v += c.weight * (c.stddev * c.stddev + (c.mean - m) * (c.mean - m));
      }
      return v;
    }
  }
  return 0.0;
}

double RewardDist::sample(Rng& rng) const {
  switch (kind_) {
    case Kind::Dirac:
      return a_;
    case Kind::Uniform:
      return rng.uniform(a_, b_);
    case Kind::Exponential:
      return b_ + rng.exponential(a_);
    case Kind::GaussianMixture: {
      double u = rng.uniform();
      for (const auto& c : components_) {
        if (u < c.weight) return rng.normal(c.mean, c.stddev);
        u -= c.weight;
      }
      return rng.normal(components_.back().mean, components_.back().stddev);
    }
  }
  return 0.0;
}

double RewardDist::abs_bound() const {
  switch (kind_) {
    case Kind::Dirac:
      return std::fabs(a_);
    case Kind::Uniform:
      return std::max(std::fabs(a_), std::fabs(b_));
    case Kind::Exponential:
    case Kind::GaussianMixture:
      return std::numeric_limits<double>::infinity();
  }
  return 0.0;
}

bool RewardDist::bounded() const { return std::isfinite(abs_bound()); }

}  // namespace qem
