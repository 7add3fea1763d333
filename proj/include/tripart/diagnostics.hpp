#pragma once

#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace tripart {
class ChainStore;
}

namespace tripart::diag {

/// Spectral density at frequency zero from an AR(p) fit (Yule-Walker, order
/// by AIC up to floor(10 log10 n)), after removing a linear trend from the
/// series used to decide degeneracy. Returns 0 for constant series.
struct SpectralEstimate {
  double spectrum0 = 0.0;
  int order = 0;
};
SpectralEstimate spectrum0_ar(std::span<const double> x);

/// Effective sample size n * var(x) / S(0).
double effective_sample_size(std::span<const double> x);

struct GewekeResult {
  double z = 0.0;
  bool pass = false;
};

/// Difference of means between the first `first_frac` and last `last_frac`
/// of the chain, standardized with spectral variance estimates. Pass when
/// |z| < 1.96. Requires at least 100 values.
GewekeResult geweke(std::span<const double> x, double first_frac = 0.10, double last_frac = 0.50);

struct HeidelbergerWelchResult {
  bool stationary = false;
  /// Index of the first retained value in the accepted segment (-1 if none).
  long start = -1;
  double cvm_pvalue = 0.0;
  bool halfwidth_pass = false;
  /// halfwidth / |mean| of the accepted segment (NaN if not stationary).
  double halfwidth_ratio = 0.0;
  double mean = 0.0;
};

/// Cramer-von Mises stationarity test over discard schedule 0%, 10%, ..., 50%,
/// followed by the halfwidth test (pass if ratio <= eps).
HeidelbergerWelchResult heidelberger_welch(std::span<const double> x, double eps = 0.1,
                                           double alpha = 0.05);

/// Limiting CDF of the Cramer-von Mises statistic of a Brownian bridge.
double cramer_von_mises_cdf(double q);

struct RafteryLewisResult {
  long burn_in = 0;
  long total = 0;
  long lower_bound = 0;
  long thin = 1;
  double dependence_factor = 0.0;
};

/// Minimum pilot length for the quantile / accuracy / probability triple.
long raftery_lewis_min_length(double q = 0.025, double r = 0.01, double s = 0.95);

/// Run-length diagnostic for estimating the q-quantile within +-r with
/// probability s. Throws InvalidArgument if the series is shorter than the
/// required pilot length.
RafteryLewisResult raftery_lewis(std::span<const double> x, double q = 0.025, double r = 0.01,
                                 double s = 0.95, double converge_eps = 0.001);

struct ParameterDiagnostics {
  std::string name;
  bool location = true;
  double mean = 0.0;
  double sd = 0.0;
  double ess = 0.0;
  GewekeResult geweke;
  HeidelbergerWelchResult heidelberger_welch;
  RafteryLewisResult raftery_lewis;
  bool raftery_lewis_available = false;
};

struct DiagnosticReport {
  std::vector<ParameterDiagnostics> parameters;

  struct Counts {
    std::size_t total = 0;
    std::size_t geweke_pass = 0;
    std::size_t hw_pass = 0;
    std::size_t dependence_below_5 = 0;
  };
  Counts counts(bool location) const;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Runs every diagnostic on one named series.
ParameterDiagnostics diagnose_series(const std::string& name, std::span<const double> x,
                                     bool location = true);

/// Diagnostics for the identified location and free covariance parameters.
DiagnosticReport diagnose_chain(const ChainStore& chain);

}  // namespace tripart::diag
