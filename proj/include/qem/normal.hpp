#pragma once

namespace qem {

/// Inverse CDF of the standard normal distribution, Phi^-1(tau).
///
/// Wichura's AS 241 (PPND16) rational approximation; absolute error is
/// below 1e-9 over (0,1). Throws std::invalid_argument outside (0,1).
double std_normal_quantile(double tau);

/// CDF of the standard normal distribution.
double std_normal_cdf(double x);

}  // namespace qem
