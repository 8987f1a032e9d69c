#include "qem/cfe.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qem {

double WeightSpec::operator()(double tau) const {
  for (const auto& band : bands) {
    if (tau >= band.tau_lo && tau <= band.tau_hi) return band.v;
  }
  return 1.0;
}

std::vector<double> WeightSpec::levels(const std::vector<double>& taus) const {
  std::vector<double> v(taus.size());
  for (std::size_t i = 0; i < taus.size(); ++i) v[i] = (*this)(taus[i]);
  return v;
}

void WeightSpec::validate() const {
  for (const auto& band : bands) {
    if (!(band.v >= 1.0)) throw std::invalid_argument("WeightSpec: band weight must be >= 1");
    if (!(band.tau_lo <= band.tau_hi) || band.tau_lo < 0.0 || band.tau_hi > 1.0) {
      throw std::invalid_argument("WeightSpec: band must lie within [0,1]");
    }
  }
  for (std::size_t i = 0; i < bands.size(); ++i) {
    for (std::size_t j = i + 1; j < bands.size(); ++j) {
      if (bands[i].tau_lo < bands[j].tau_hi && bands[j].tau_lo < bands[i].tau_hi) {
        throw std::invalid_argument("WeightSpec: bands must not overlap");
      }
    }
  }
}

DesignMatrix build_design(const std::vector<double>& taus, int order) {
  if (order < 1 || order > 4) throw std::invalid_argument("build_design: order must be in {1,2,3,4}");
  const int cols = order + 1;
  const int n = static_cast<int>(taus.size());
  if (n <= cols) throw std::invalid_argument("build_design: need more points than columns");
  DesignMatrix d;
  d.order = order;
  d.taus = taus;
  d.entries.resize(n, cols);
  for (int i = 0; i < n; ++i) {
    const double z = std_normal_quantile(taus[i]);
    d.entries(i, 0) = 1.0;
    d.entries(i, 1) = z;
    if (order >= 2) d.entries(i, 2) = z * z - 1.0;
    if (order >= 3) d.entries(i, 3) = z * z * z - 3.0 * z;
    if (order >= 4) d.entries(i, 4) = -2.0 * z * z * z + 5.0 * z;
  }
  return d;
}

namespace {

// Sampling variance of the intercept of the 2-column weighted fit under
// independent N(0, v_i) noise. The fit weights a point by w_i = 1/v_i, so
// Cov(beta) = (X' W X)^{-1} and the (1,1) entry is
//   Swz2 / (Sw * Swz2 - Swz^2).
double intercept_variance_two_column(const Eigen::MatrixXd& X, const std::vector<double>& v) {
  double sw = 0.0, swz = 0.0, swz2 = 0.0;
  for (int i = 0; i < X.rows(); ++i) {
    const double w = 1.0 / v[static_cast<std::size_t>(i)];
    const double z = X(i, 1);
    sw += w;
    swz += w * z;
    swz2 += w * z * z;
  }
  const double det = sw * swz2 - swz * swz;
  if (det <= 0.0) throw SingularFitError("wls_fit: singular 2-column system");
  return swz2 / det;
}

}  // namespace

MomentFit wls_fit(const DesignMatrix& design, const WeightSpec& weights,
                  const std::vector<double>& qhat) {
  const int n = static_cast<int>(design.entries.rows());
  const int p = design.columns();
  if (static_cast<int>(qhat.size()) != n) {
    throw std::invalid_argument("wls_fit: qhat length must match the design grid");
  }
  weights.validate();
  const std::vector<double> v = weights.levels(design.taus);

  Eigen::VectorXd y(n), sqw(n);
  for (int i = 0; i < n; ++i) {
    y(i) = qhat[static_cast<std::size_t>(i)];
    sqw(i) = 1.0 / std::sqrt(v[static_cast<std::size_t>(i)]);
  }
  const Eigen::MatrixXd Xs = sqw.asDiagonal() * design.entries;
  const Eigen::VectorXd ys = sqw.asDiagonal() * y;

  // The order-4 design is rank deficient by construction: its last column
  // satisfies -2z^3+5z = -2(z^3-3z) - z. The first coefficient is still
  // identifiable (the null direction has no intercept component), so that
  // one expected deficiency is solved minimum-norm; anything else is a
  // genuinely singular fit.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Xs);
  const int rank = static_cast<int>(cod.rank());
  if (rank < p && !(design.order == 4 && rank == p - 1)) {
    throw SingularFitError("wls_fit: design matrix is rank deficient");
  }

  MomentFit fit;
  fit.coefficients = cod.solve(ys);
  fit.residuals = y - design.entries * fit.coefficients;

  double sw = 0.0, wy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = 1.0 / v[static_cast<std::size_t>(i)];
    sw += w;
    wy += w * y(i);
  }
  const double ybar = wy / sw;
  double ss_res = 0.0, ss_tot = 0.0;
  for (int i = 0; i < n; ++i) {
    const double w = 1.0 / v[static_cast<std::size_t>(i)];
    ss_res += w * fit.residuals(i) * fit.residuals(i);
    ss_tot += w * (y(i) - ybar) * (y(i) - ybar);
  }
  fit.r_squared = (ss_tot > 0.0) ? 1.0 - ss_res / ss_tot : 1.0;

  if (p == 2) {
    fit.theoretical_variance_m1 = intercept_variance_two_column(design.entries, v);
  }
  return fit;
}

double qem_mean(const std::vector<double>& qhat, const std::vector<double>& taus,
                const WeightSpec& weights, int order) {
  return wls_fit(build_design(taus, order), weights, qhat).coefficients(0);
}

QemReadout make_readout(const std::vector<double>& taus, const WeightSpec& weights, int order) {
  const DesignMatrix design = build_design(taus, order);
  const int n = static_cast<int>(taus.size());
  const int p = design.columns();
  weights.validate();
  const std::vector<double> v = weights.levels(taus);

  Eigen::VectorXd sqw(n);
  for (int i = 0; i < n; ++i) sqw(i) = 1.0 / std::sqrt(v[static_cast<std::size_t>(i)]);
  const Eigen::MatrixXd Xs = sqw.asDiagonal() * design.entries;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(Xs);
  const int rank = static_cast<int>(cod.rank());
  if (rank < p && !(order == 4 && rank == p - 1)) {
    throw SingularFitError("make_readout: design matrix is rank deficient");
  }

  // solving against scaled unit vectors yields each coefficient as a
  // linear functional of the raw qhat
  Eigen::MatrixXd rows(p, n);
  Eigen::VectorXd unit = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    unit(i) = sqw(i);
    rows.col(i) = cod.solve(unit);
    unit(i) = 0.0;
  }
  QemReadout out;
  out.m1 = rows.row(0).transpose();
  out.m2 = rows.row(1).transpose();
  return out;
}

double variance_f(const std::vector<double>& v, const std::vector<double>& z) {
  if (v.size() != z.size() || v.empty()) {
    throw std::invalid_argument("variance_f: v and z must be equal-length, non-empty");
  }
  const double n = static_cast<double>(v.size());
  double sv = 0.0, svz = 0.0, svz2 = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    sv += v[i];
    svz += v[i] * z[i];
    svz2 += v[i] * z[i] * z[i];
  }
  const double vbar = sv / n;
  const double head = vbar * vbar - 1.0;
  if (svz == 0.0) return head;  // continuity limit of the subtracted term
  const double ratio = (sv * svz2) / (svz * svz);
  return head - 1.0 / (ratio - 1.0);
}

double simulate_f_min(int n, double m_upper, long long trials, TauMode tau_mode, Rng& rng) {
  if (n < 2) throw std::invalid_argument("simulate_f_min: n must be >= 2");
  if (trials < 1) throw std::invalid_argument("simulate_f_min: trials must be >= 1");
  if (!(m_upper > 1.0)) throw std::invalid_argument("simulate_f_min: m_upper must exceed 1");

  // The tau levels are fixed for the whole simulation: the even midpoint
  // grid, or one uniform draw; only the noise levels v are redrawn per
  // trial.
  std::vector<double> z(n);
  if (tau_mode == TauMode::Even) {
    for (int i = 0; i < n; ++i) z[i] = std_normal_quantile((2.0 * i + 1.0) / (2.0 * n));
  } else {
    for (int i = 0; i < n; ++i) {
      double u = rng.uniform();
      while (u <= 0.0) u = rng.uniform();
      z[i] = std_normal_quantile(u);
    }
  }
  std::vector<double> v(n);
  double fmin = std::numeric_limits<double>::infinity();
  for (long long t = 0; t < trials; ++t) {
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(1.0, m_upper);
    fmin = std::min(fmin, variance_f(v, z));
  }
  return fmin;
}

double em_variance_theoretical(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  const double n = static_cast<double>(v.size());
  return s / (n * n);
}

}  // namespace qem
