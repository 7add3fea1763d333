#pragma once

#include <limits>

#include <Eigen/Dense>

#include "tripart/random.hpp"

namespace tripart::dist {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Open interval (lower, upper); either end may be infinite.
struct TruncationInterval {
  double lower = -kInf;
  double upper = kInf;

  static TruncationInterval non_positive() { return {-kInf, 0.0}; }
  static TruncationInterval positive() { return {0.0, kInf}; }
  static TruncationInterval unbounded() { return {-kInf, kInf}; }

  bool contains(double x) const { return x > lower && x < upper; }
};

/// Standardized distance beyond which a truncated normal is rejected as
/// degenerate (the interval mass underflows double precision).
inline constexpr double kTailLimit = 38.0;

double normal_pdf(double x);
double normal_cdf(double x);
/// Inverse of normal_cdf on (0, 1). Throws InvalidArgument outside.
double normal_quantile(double p);

double standard_normal(RandomStream& rng);

/// Draw from N(mean, variance) restricted to `interval`.
///
/// Inverse-CDF inside four standard deviations, Robert's exponential (or
/// uniform, for short intervals) rejection sampler beyond. The result always
/// satisfies interval.contains(x).
double sample_truncated_normal(double mean, double variance, TruncationInterval interval,
                               RandomStream& rng);

/// Gamma(shape, rate) by Marsaglia-Tsang.
double sample_gamma(double shape, double rate, RandomStream& rng);

/// Inverse gamma with density proportional to x^-(shape+1) exp(-scale/x).
/// Mean scale / (shape - 1) for shape > 1.
double sample_inverse_gamma(double scale, double shape, RandomStream& rng);

/// Inverse gamma in the inverse-Wishart marginal convention: density
/// proportional to x^-(dof/2+1) exp(-scale/(2x)). A 1x1 inverse Wishart with
/// scale s and dof v is exactly this law.
double sample_inverse_gamma_dof(double scale, double dof, RandomStream& rng);

/// Matrix normal draw M + sqrt(column_scale) Z L^T with L L^T = row_scale.
/// Every row of the result has covariance column_scale * row_scale.
Eigen::MatrixXd sample_matrix_normal(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& row_scale,
                                     double column_scale, RandomStream& rng);

/// Inverse Wishart IW(scale, dof) via the Bartlett decomposition.
/// Mean scale / (dof - dim - 1) when dof > dim + 1.
Eigen::MatrixXd sample_inverse_wishart(const Eigen::MatrixXd& scale, double dof,
                                       RandomStream& rng);

/// Multivariate normal draw given the precision matrix and the precision-weighted
/// mean (`precision * mean = linear`). Never forms the covariance explicitly.
Eigen::VectorXd sample_normal_from_precision(const Eigen::MatrixXd& precision,
                                             const Eigen::VectorXd& linear, RandomStream& rng);

}  // namespace tripart::dist
