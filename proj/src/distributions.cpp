#include "tripart/distributions.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "tripart/errors.hpp"

namespace tripart::dist {

namespace {

constexpr int kMaxRetries = 1000;

double poly(const double* c, int n, double x) {
  double r = c[n - 1];
  for (int i = n - 2; i >= 0; --i) r = r * x + c[i];
  return r;
}

// Right-tail standard normal restricted to (a, b) with a >= 0.
double right_tail(double a, double b, RandomStream& rng) {
  if (a < 4.0) {
    const double qa = normal_cdf(-a);
    const double qb = std::isinf(b) ? 0.0 : normal_cdf(-b);
    for (int i = 0; i < kMaxRetries; ++i) {
      const double u = qb + (qa - qb) * rng.uniform();
      if (u <= 0.0 || u >= 1.0) continue;
      const double z = -normal_quantile(u);
      if (z > a && z < b) return z;
    }
    throw NumericalFailure("truncated normal: inverse-CDF draw kept landing outside the interval");
  }
  const double alpha = 0.5 * (a + std::sqrt(a * a + 4.0));
  if (std::isfinite(b) && b - a < 1.0 / alpha) {
    for (int i = 0; i < 100 * kMaxRetries; ++i) {
      const double z = a + (b - a) * rng.uniform();
      if (rng.uniform() <= std::exp(0.5 * (a * a - z * z)) && z > a && z < b) return z;
    }
  } else {
    for (int i = 0; i < 100 * kMaxRetries; ++i) {
      const double z = a - std::log(rng.uniform()) / alpha;
      if (z >= b) continue;
      const double d = z - alpha;
      if (rng.uniform() <= std::exp(-0.5 * d * d) && z > a) return z;
    }
  }
  throw NumericalFailure("truncated normal: tail rejection sampler did not accept");
}

double standard_truncated(double a, double b, RandomStream& rng) {
  if (a >= 0.0) return right_tail(a, b, rng);
  if (b <= 0.0) return -right_tail(-b, -a, rng);
  const double pa = normal_cdf(a);
  const double pb = normal_cdf(b);
  for (int i = 0; i < kMaxRetries; ++i) {
    const double u = pa + (pb - pa) * rng.uniform();
    if (u <= 0.0 || u >= 1.0) continue;
    const double z = normal_quantile(u);
    if (z > a && z < b) return z;
  }
  throw NumericalFailure("truncated normal: inverse-CDF draw kept landing outside the interval");
}

}  // namespace

double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Wichura (1988), algorithm AS241 PPND16.
double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    std::ostringstream msg;
    msg << "normal_quantile: probability " << p << " outside (0, 1)";
    throw InvalidArgument(msg.str());
  }
  static constexpr double a[] = {3.3871328727963666080e0, 1.3314166789178437745e+2,
                                 1.9715909503065514427e+3, 1.3731693765509461125e+4,
                                 4.5921953931549871457e+4, 6.7265770927008700853e+4,
                                 3.3430575583588128105e+4, 2.5090809287301226727e+3};
  static constexpr double b[] = {1.0,
                                 4.2313330701600911252e+1, 6.8718700749205790830e+2,
                                 5.3941960214247511077e+3, 2.1213794301586595867e+4,
                                 3.9307895800092710610e+4, 2.8729085735721942674e+4,
                                 5.2264952788528545610e+3};
  static constexpr double c[] = {1.42343711074968357734e0, 4.63033784615654529590e0,
                                 5.76949722146069140550e0, 3.64784832476320460504e0,
                                 1.27045825245236838258e0, 2.41780725177450611770e-1,
                                 2.27238449892691845833e-2, 7.74545014278341407640e-4};
  static constexpr double d[] = {1.0,
                                 2.05319162663775882187e0, 1.67638483018380384940e0,
                                 6.89767334985100004550e-1, 1.48103976427480074590e-1,
                                 1.51986665636164571966e-2, 5.47593808499534494600e-4,
                                 1.05075007164441684324e-9};
  static constexpr double e[] = {6.65790464350110377720e0, 5.46378491116411436990e0,
                                 1.78482653991729133580e0, 2.96560571828504891230e-1,
                                 2.65321895265761230930e-2, 1.24266094738807843860e-3,
                                 2.71155556874348757815e-5, 2.01033439929228813265e-7};
  static constexpr double f[] = {1.0,
                                 5.99832206555887937690e-1, 1.36929880922735805310e-1,
                                 1.48753612908506148525e-2, 7.86869131145613259100e-4,
                                 1.84631831751005468180e-5, 1.42151175831644588870e-7,
                                 2.04426310338993978564e-15};

  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q * poly(a, 8, r) / poly(b, 8, r);
  }
  double r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double x;
  if (r <= 5.0) {
    r -= 1.6;
    x = poly(c, 8, r) / poly(d, 8, r);
  } else {
    r -= 5.0;
    x = poly(e, 8, r) / poly(f, 8, r);
  }
  return q < 0.0 ? -x : x;
}

double standard_normal(RandomStream& rng) { return normal_quantile(rng.uniform()); }

double sample_truncated_normal(double mean, double variance, TruncationInterval interval,
                               RandomStream& rng) {
  if (!std::isfinite(mean) || !std::isfinite(variance) || !(variance > 0.0)) {
    std::ostringstream msg;
    msg << "truncated normal: need finite mean and positive finite variance (mean=" << mean
        << ", variance=" << variance << ")";
    throw InvalidArgument(msg.str());
  }
  if (!(interval.lower < interval.upper)) {
    throw InvalidArgument("truncated normal: empty interval");
  }
  const double sd = std::sqrt(variance);
  const double a = (interval.lower - mean) / sd;
  const double b = (interval.upper - mean) / sd;
  if (a > kTailLimit || b < -kTailLimit) {
    std::ostringstream msg;
    msg << "truncated normal: mean " << mean << " lies " << (a > kTailLimit ? a : -b)
        << " standard deviations outside (" << interval.lower << ", " << interval.upper << ")";
    throw DegenerateTailError(msg.str());
  }
  for (int i = 0; i < kMaxRetries; ++i) {
    const double x = mean + sd * standard_truncated(a, b, rng);
    if (interval.contains(x)) return x;
  }
  throw NumericalFailure("truncated normal: interval too narrow to represent a draw");
}

double sample_gamma(double shape, double rate, RandomStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0) || !std::isfinite(shape) || !std::isfinite(rate)) {
    throw InvalidArgument("gamma: shape and rate must be positive and finite");
  }
  if (shape < 1.0) {
    // Boost: G(a) = G(a + 1) * U^(1/a).
    const double g = sample_gamma(shape + 1.0, 1.0, rng);
    return g * std::pow(rng.uniform(), 1.0 / shape) / rate;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x;
    double v;
    do {
      x = standard_normal(rng);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v / rate;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v / rate;
  }
}

double sample_inverse_gamma(double scale, double shape, RandomStream& rng) {
  if (!(scale > 0.0) || !(shape > 0.0)) {
    throw InvalidArgument("inverse gamma: scale and shape must be positive");
  }
  return scale / sample_gamma(shape, 1.0, rng);
}

double sample_inverse_gamma_dof(double scale, double dof, RandomStream& rng) {
  if (!(scale > 0.0) || !(dof > 0.0)) {
    throw InvalidArgument("inverse gamma: scale and dof must be positive");
  }
  return 0.5 * scale / sample_gamma(0.5 * dof, 1.0, rng);
}

Eigen::MatrixXd sample_matrix_normal(const Eigen::MatrixXd& mean, const Eigen::MatrixXd& row_scale,
                                     double column_scale, RandomStream& rng) {
  if (row_scale.rows() != mean.cols() || row_scale.cols() != mean.cols()) {
    throw InvalidArgument("matrix normal: row_scale must be square with one row per mean column");
  }
  if (!(column_scale >= 0.0) || !std::isfinite(column_scale)) {
    throw InvalidArgument("matrix normal: column_scale must be non-negative");
  }
  Eigen::LLT<Eigen::MatrixXd> llt(row_scale);
  if (llt.info() != Eigen::Success) {
    throw DecompositionError("matrix normal: row_scale is not positive definite");
  }
  Eigen::MatrixXd z(mean.rows(), mean.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = standard_normal(rng);
  }
  const Eigen::MatrixXd lower = llt.matrixL();
  return mean + std::sqrt(column_scale) * z * lower.transpose();
}

Eigen::MatrixXd sample_inverse_wishart(const Eigen::MatrixXd& scale, double dof,
                                       RandomStream& rng) {
  const Eigen::Index p = scale.rows();
  if (scale.cols() != p || p == 0) throw InvalidArgument("inverse Wishart: scale must be square");
  if (!(dof > static_cast<double>(p) - 1.0)) {
    std::ostringstream msg;
    msg << "inverse Wishart: dof " << dof << " must exceed dim - 1 = " << p - 1;
    throw InvalidArgument(msg.str());
  }
  Eigen::LLT<Eigen::MatrixXd> llt(scale);
  if (llt.info() != Eigen::Success) {
    throw DecompositionError("inverse Wishart: scale is not positive definite");
  }
  // Bartlett factor A of a Wishart(I, dof) draw; the inverse Wishart draw is
  // C (A A^T)^-1 C^T with C C^T = scale.
  Eigen::MatrixXd bartlett = Eigen::MatrixXd::Zero(p, p);
  for (Eigen::Index i = 0; i < p; ++i) {
    bartlett(i, i) = std::sqrt(2.0 * sample_gamma(0.5 * (dof - static_cast<double>(i)), 1.0, rng));
    for (Eigen::Index j = 0; j < i; ++j) bartlett(i, j) = standard_normal(rng);
  }
  const Eigen::MatrixXd c = llt.matrixL();
  // B = C A^-T, so the draw is B B^T.
  const Eigen::MatrixXd a_inv_t = bartlett.triangularView<Eigen::Lower>()
                                      .solve(Eigen::MatrixXd::Identity(p, p))
                                      .transpose();
  const Eigen::MatrixXd factor = c * a_inv_t;
  Eigen::MatrixXd draw = factor * factor.transpose();
  return 0.5 * (draw + draw.transpose());
}

Eigen::VectorXd sample_normal_from_precision(const Eigen::MatrixXd& precision,
                                             const Eigen::VectorXd& linear, RandomStream& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(precision, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    std::ostringstream msg;
    msg << "posterior precision is not positive definite (eigenvalue range [" << ev.minCoeff()
        << ", " << ev.maxCoeff() << "], condition number "
        << (ev.minCoeff() > 0 ? ev.maxCoeff() / ev.minCoeff() : kInf) << ")";
    throw NumericalFailure(msg.str());
  }
  const Eigen::VectorXd mean = llt.solve(linear);
  Eigen::VectorXd z(precision.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = standard_normal(rng);
  // Cov = P^-1 = L^-T L^-1, so mean + L^-T z has the right law.
  return mean + llt.matrixU().solve(z);
}

}  // namespace tripart::dist
