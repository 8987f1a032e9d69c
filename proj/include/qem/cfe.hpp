#pragma once

#include <Eigen/Dense>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qem/normal.hpp"
#include "qem/rng.hpp"

namespace qem {

/// Heteroskedastic noise-level bands over tau; v >= 1, default 1 outside
/// all bands. The fit downweights a point by 1/v(tau).
struct WeightSpec {
  struct Band {
    double tau_lo;
    double tau_hi;
    double v;
  };
  std::vector<Band> bands;

  double operator()(double tau) const;
  std::vector<double> levels(const std::vector<double>& taus) const;
  void validate() const;

  static WeightSpec none() { return {}; }
  /// v on (0, 0.1] and [0.9, 1): the deep-RL agent default.
  static WeightSpec tails(double v = 1.5) {
    return WeightSpec{{{0.0, 0.1, v}, {0.9, 1.0, v}}};
  }
  /// v on [0.45, 0.55]: the gridworld preset (low density around the median).
  static WeightSpec middle_band(double v = 1.5) {
    return WeightSpec{{{0.45, 0.55, v}}};
  }
};

/// Cornish-Fisher regressor matrix on a tau grid.
///
/// Columns by model order (z = Phi^-1(tau)):
///   1: [1, z]                 coefficients (mu, sigma)
///   2: [1, z, z^2-1]          + sigma*s/6
///   3: [1, z, z^2-1, z^3-3z]  + sigma*k/24
///   4: + [-2z^3+5z]           + sigma*(s/6)^2
struct DesignMatrix {
  int order = 3;
  std::vector<double> taus;
  Eigen::MatrixXd entries;

  int columns() const { return static_cast<int>(entries.cols()); }
};

DesignMatrix build_design(const std::vector<double>& taus, int order);

class SingularFitError : public std::runtime_error {
 public:
  explicit SingularFitError(const std::string& what) : std::runtime_error(what) {}
};

struct MomentFit {
  Eigen::VectorXd coefficients;  // first entry is the QEM mean
  double r_squared = 0.0;
  Eigen::VectorXd residuals;  // raw, q - X*beta
  /// Sampling variance of the first coefficient under independent
  /// N(0, v_i) noise; present for the 2-column model only.
  std::optional<double> theoretical_variance_m1;
};

/// Weighted least squares via Householder QR of V^{-1/2} X, where
/// V = diag(v(tau_i)) holds the WeightSpec noise levels. r_squared is
/// computed on the 1/v-weighted residuals against the weighted mean.
MomentFit wls_fit(const DesignMatrix& design, const WeightSpec& weights,
                  const std::vector<double>& qhat);

/// First WLS coefficient of the Cornish-Fisher regression.
double qem_mean(const std::vector<double>& qhat, const std::vector<double>& taus,
                const WeightSpec& weights = WeightSpec::none(), int order = 3);

/// Linear readout rows for the fitted coefficients: coefficient j equals
/// dot(row_j, qhat). Precompute once per (grid, weights, order) and reuse
/// across fits on the same grid.
struct QemReadout {
  Eigen::VectorXd m1;  // mean readout
  Eigen::VectorXd m2;  // second-coefficient (sigma) readout
};

QemReadout make_readout(const std::vector<double>& taus, const WeightSpec& weights, int order);

/// Variance-comparison statistic for the 2-column model:
///   f = (sum v / N)^2 - 1 - 1 / ((sum v * sum v z^2) / (sum v z)^2 - 1),
/// with the subtracted term defined as 0 when sum v z = 0 (its limit).
/// Positive f certifies Var(QEM) < Var(EM) under the matching closed forms.
double variance_f(const std::vector<double>& v, const std::vector<double>& z);

enum class TauMode { Even, UniformRandom };

/// Minimum of variance_f over `trials` draws of v_i ~ Unif(1, m_upper).
/// The tau levels are fixed across trials: either the even midpoint grid
/// or a single i.i.d. Unif(0,1) draw made at the start.
double simulate_f_min(int n, double m_upper, long long trials, TauMode tau_mode, Rng& rng);

/// Variance of the plain quantile average under independent N(0, v_i)
/// noise: sum(v) / N^2.
double em_variance_theoretical(const std::vector<double>& v);

}  // namespace qem
