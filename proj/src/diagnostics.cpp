#include "tripart/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>
#include <numeric>
#include <sstream>

#include "tripart/chain_store.hpp"
#include "tripart/distributions.hpp"
#include "tripart/errors.hpp"

namespace tripart::diag {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double mean_of(std::span<const double> x) {
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double variance_of(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean_of(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / static_cast<double>(x.size() - 1);
}

// Residual variance after regressing x on (1, t).
double detrended_variance(std::span<const double> x) {
  const auto n = static_cast<double>(x.size());
  const double tbar = 0.5 * (n - 1.0);
  const double xbar = mean_of(x);
  double stt = 0.0;
  double stx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dt = static_cast<double>(i) - tbar;
    stt += dt * dt;
    stx += dt * (x[i] - xbar);
  }
  const double slope = stt > 0.0 ? stx / stt : 0.0;
  double ss = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = x[i] - xbar - slope * (static_cast<double>(i) - tbar);
    ss += r * r;
  }
  return ss / n;
}

void require_finite(std::span<const double> x) {
  for (double v : x) {
    if (!std::isfinite(v)) throw InvalidArgument("diagnostics: series contains non-finite values");
  }
}

}  // namespace

SpectralEstimate spectrum0_ar(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 3) throw InvalidArgument("spectrum0_ar: need at least 3 values");
  require_finite(x);
  const double scale = std::max(1.0, std::abs(mean_of(x)));
  if (detrended_variance(x) <= 1e-24 * scale * scale) return {0.0, 0};

  const int max_order =
      static_cast<int>(std::min<double>(static_cast<double>(n) - 1.0,
                                        std::floor(10.0 * std::log10(static_cast<double>(n)))));
  const double m = mean_of(x);
  std::vector<double> acov(static_cast<std::size_t>(max_order) + 1, 0.0);
  for (int lag = 0; lag <= max_order; ++lag) {
    double s = 0.0;
    for (std::size_t i = static_cast<std::size_t>(lag); i < n; ++i) {
      s += (x[i] - m) * (x[i - static_cast<std::size_t>(lag)] - m);
    }
    acov[static_cast<std::size_t>(lag)] = s / static_cast<double>(n);
  }

  // Levinson-Durbin recursion; keep every order's coefficients.
  std::vector<std::vector<double>> phi(static_cast<std::size_t>(max_order) + 1);
  std::vector<double> pred_var(static_cast<std::size_t>(max_order) + 1);
  pred_var[0] = acov[0];
  int best = 0;
  double best_aic = static_cast<double>(n) * std::log(pred_var[0]);
  for (int k = 1; k <= max_order; ++k) {
    const auto& prev = phi[static_cast<std::size_t>(k - 1)];
    double acc = acov[static_cast<std::size_t>(k)];
    for (int j = 1; j < k; ++j) acc -= prev[static_cast<std::size_t>(j - 1)] * acov[static_cast<std::size_t>(k - j)];
    const double kappa = acc / pred_var[static_cast<std::size_t>(k - 1)];
    auto& cur = phi[static_cast<std::size_t>(k)];
    cur.resize(static_cast<std::size_t>(k));
    for (int j = 1; j < k; ++j) {
      cur[static_cast<std::size_t>(j - 1)] =
          prev[static_cast<std::size_t>(j - 1)] - kappa * prev[static_cast<std::size_t>(k - j - 1)];
    }
    cur[static_cast<std::size_t>(k - 1)] = kappa;
    pred_var[static_cast<std::size_t>(k)] = pred_var[static_cast<std::size_t>(k - 1)] * (1.0 - kappa * kappa);
    if (!(pred_var[static_cast<std::size_t>(k)] > 0.0)) break;
    const double aic = static_cast<double>(n) * std::log(pred_var[static_cast<std::size_t>(k)]) + 2.0 * k;
    if (aic < best_aic) {
      best_aic = aic;
      best = k;
    }
  }
  const double var_pred = pred_var[static_cast<std::size_t>(best)] * static_cast<double>(n) /
                          static_cast<double>(n - static_cast<std::size_t>(best) - 1);
  double sum_phi = 0.0;
  for (double c : phi[static_cast<std::size_t>(best)]) sum_phi += c;
  return {var_pred / ((1.0 - sum_phi) * (1.0 - sum_phi)), best};
}

double effective_sample_size(std::span<const double> x) {
  const auto s = spectrum0_ar(x);
  if (s.spectrum0 == 0.0) return 0.0;
  return static_cast<double>(x.size()) * variance_of(x) / s.spectrum0;
}

GewekeResult geweke(std::span<const double> x, double first_frac, double last_frac) {
  if (x.size() < 100) throw InvalidArgument("geweke: series needs at least 100 values");
  if (!(first_frac > 0.0) || !(last_frac > 0.0) || first_frac + last_frac > 1.0) {
    throw InvalidArgument("geweke: invalid window fractions");
  }
  const auto n = x.size();
  const auto n1 = static_cast<std::size_t>(std::floor(first_frac * static_cast<double>(n - 1))) + 1;
  const auto n2 = static_cast<std::size_t>(std::floor(last_frac * static_cast<double>(n - 1))) + 1;
  const auto a = x.first(n1);
  const auto b = x.last(n2);
  const double va = spectrum0_ar(a).spectrum0 / static_cast<double>(n1);
  const double vb = spectrum0_ar(b).spectrum0 / static_cast<double>(n2);
  if (!(va + vb > 0.0)) throw DegenerateSeriesError("geweke: zero-variance series");
  GewekeResult r;
  r.z = (mean_of(a) - mean_of(b)) / std::sqrt(va + vb);
  r.pass = std::abs(r.z) < 1.96;
  return r;
}

double cramer_von_mises_cdf(double q) {
  if (!(q > 0.0)) return 0.0;
  const double log_eps = std::log(1e-5);
  // Terms stay positive; stop once the Bessel argument makes them negligible.
  // A fixed four-term sum is only accurate for q below about 1.
  double total = 0.0;
  for (int k = 0;; ++k) {
    const double u = (4.0 * k + 1.0) * (4.0 * k + 1.0) / (16.0 * q);
    if (u > -log_eps) break;
    const double z = std::exp(std::lgamma(k + 0.5) - std::lgamma(k + 1.0)) * std::sqrt(4.0 * k + 1.0) /
                     (std::pow(std::numbers::pi, 1.5) * std::sqrt(q));
    total += z * std::exp(-u) * std::cyl_bessel_k(0.25, u);
  }
  return std::min(total, 1.0);
}

HeidelbergerWelchResult heidelberger_welch(std::span<const double> x, double eps, double alpha) {
  if (x.size() < 100) throw InvalidArgument("heidelberger_welch: series needs at least 100 values");
  require_finite(x);
  const std::size_t n = x.size();
  const double s0 = spectrum0_ar(x.last(n - n / 2)).spectrum0;
  if (!(s0 > 0.0)) throw DegenerateSeriesError("heidelberger_welch: zero-variance series");

  HeidelbergerWelchResult res;
  std::span<const double> segment = x;
  for (int step = 0; step <= 5; ++step) {
    const std::size_t start = static_cast<std::size_t>(step) * n / 10;
    segment = x.subspan(start);
    const auto m = segment.size();
    const double ybar = mean_of(segment);
    double cum = 0.0;
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      cum += segment[i];
      const double bridge = cum - ybar * static_cast<double>(i + 1);
      sum_sq += bridge * bridge / (static_cast<double>(m) * s0);
    }
    const double stat = sum_sq / static_cast<double>(m);
    res.cvm_pvalue = 1.0 - cramer_von_mises_cdf(stat);
    if (res.cvm_pvalue > alpha) {
      res.stationary = true;
      res.start = static_cast<long>(start);
      break;
    }
  }
  if (!res.stationary) {
    res.halfwidth_ratio = kNaN;
    res.mean = mean_of(x);
    return res;
  }
  res.mean = mean_of(segment);
  const double s_seg = spectrum0_ar(segment).spectrum0;
  const double halfwidth = 1.96 * std::sqrt(s_seg / static_cast<double>(segment.size()));
  res.halfwidth_ratio = halfwidth / std::abs(res.mean);
  res.halfwidth_pass = res.halfwidth_ratio <= eps;
  return res;
}

long raftery_lewis_min_length(double q, double r, double s) {
  const double phi = dist::normal_quantile(0.5 * (1.0 + s));
  return static_cast<long>(std::ceil(phi * phi / (r * r) * q * (1.0 - q)));
}

RafteryLewisResult raftery_lewis(std::span<const double> x, double q, double r, double s,
                                 double converge_eps) {
  if (!(q > 0.0 && q < 1.0) || !(r > 0.0) || !(s > 0.0 && s < 1.0)) {
    throw InvalidArgument("raftery_lewis: invalid (q, r, s)");
  }
  require_finite(x);
  const long nmin = raftery_lewis_min_length(q, r, s);
  if (static_cast<long>(x.size()) < nmin) {
    throw InvalidArgument("raftery_lewis: series of length " + std::to_string(x.size()) +
                          " is shorter than the required pilot length " + std::to_string(nmin));
  }
  // Type-7 empirical quantile.
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const double quant =
      lo + 1 < sorted.size() ? sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo])
                             : sorted[lo];
  std::vector<int> dichot(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) dichot[i] = x[i] <= quant ? 1 : 0;

  long kthin = 0;
  std::vector<int> thinned;
  for (;;) {
    ++kthin;
    thinned.clear();
    for (std::size_t i = 0; i < dichot.size(); i += static_cast<std::size_t>(kthin)) {
      thinned.push_back(dichot[i]);
    }
    if (thinned.size() < 3) throw DegenerateSeriesError("raftery_lewis: chain too short to thin");
    double tran[2][2][2] = {};
    for (std::size_t i = 2; i < thinned.size(); ++i) tran[thinned[i - 2]][thinned[i - 1]][thinned[i]] += 1.0;
    double g2 = 0.0;
    for (int i1 = 0; i1 < 2; ++i1) {
      for (int i2 = 0; i2 < 2; ++i2) {
        for (int i3 = 0; i3 < 2; ++i3) {
          if (tran[i1][i2][i3] == 0.0) continue;
          const double row = tran[i1][i2][0] + tran[i1][i2][1];
          const double col = tran[0][i2][i3] + tran[1][i2][i3];
          const double mid = tran[0][i2][0] + tran[0][i2][1] + tran[1][i2][0] + tran[1][i2][1];
          const double fitted = row * col / mid;
          g2 += 2.0 * tran[i1][i2][i3] * std::log(tran[i1][i2][i3] / fitted);
        }
      }
    }
    const double bic = g2 - 2.0 * std::log(static_cast<double>(thinned.size()) - 2.0);
    if (bic < 0.0) break;
  }
  double tr[2][2] = {};
  for (std::size_t i = 1; i < thinned.size(); ++i) tr[thinned[i - 1]][thinned[i]] += 1.0;
  const double alpha = tr[0][1] / (tr[0][0] + tr[0][1]);
  const double beta = tr[1][0] / (tr[1][0] + tr[1][1]);
  if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha + beta)) {
    throw DegenerateSeriesError("raftery_lewis: no transitions across the quantile threshold");
  }
  const double phi = dist::normal_quantile(0.5 * (1.0 + s));
  double temp_burn = std::log(converge_eps * (alpha + beta) / std::max(alpha, beta)) /
                     std::log(std::abs(1.0 - alpha - beta));
  if (!std::isfinite(temp_burn)) temp_burn = 1.0;
  const double temp_prec = (2.0 - alpha - beta) * alpha * beta * phi * phi /
                           (std::pow(alpha + beta, 3.0) * r * r);
  RafteryLewisResult res;
  res.thin = kthin;
  res.burn_in = static_cast<long>(std::ceil(temp_burn)) * kthin;
  const long keep = static_cast<long>(std::ceil(temp_prec)) * kthin;
  res.total = res.burn_in + keep;
  res.lower_bound = nmin;
  res.dependence_factor = static_cast<double>(res.total) / static_cast<double>(nmin);
  return res;
}

// ---------------------------------------------------------------------------

ParameterDiagnostics diagnose_series(const std::string& name, std::span<const double> x,
                                     bool location) {
  ParameterDiagnostics p;
  p.name = name;
  p.location = location;
  p.mean = mean_of(x);
  p.sd = std::sqrt(variance_of(x));
  p.ess = effective_sample_size(x);
  p.geweke = geweke(x);
  p.heidelberger_welch = heidelberger_welch(x);
  if (static_cast<long>(x.size()) >= raftery_lewis_min_length()) {
    p.raftery_lewis = raftery_lewis(x);
    p.raftery_lewis_available = true;
  }
  return p;
}

DiagnosticReport diagnose_chain(const ChainStore& chain) {
  DiagnosticReport report;
  auto run = [&](const std::vector<std::string>& names, bool location) {
    for (const auto& name : names) {
      const Eigen::VectorXd series = chain.column(name);
      report.parameters.push_back(diagnose_series(
          name, std::span<const double>(series.data(), static_cast<std::size_t>(series.size())),
          location));
    }
  };
  run(chain.location_columns(), true);
  run(chain.scale_columns(), false);
  return report;
}

DiagnosticReport::Counts DiagnosticReport::counts(bool location) const {
  Counts c;
  for (const auto& p : parameters) {
    if (p.location != location) continue;
    ++c.total;
    if (p.geweke.pass) ++c.geweke_pass;
    if (p.heidelberger_welch.stationary) ++c.hw_pass;
    if (p.raftery_lewis_available && p.raftery_lewis.dependence_factor < 5.0) ++c.dependence_below_5;
  }
  return c;
}

nlohmann::json DiagnosticReport::to_json() const {
  nlohmann::json j;
  j["parameters"] = nlohmann::json::array();
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  for (const auto& p : parameters) {
    nlohmann::json e;
    e["name"] = p.name;
    e["kind"] = p.location ? "location" : "scale";
    e["mean"] = num(p.mean);
    e["sd"] = num(p.sd);
    e["ess"] = num(p.ess);
    e["geweke"] = {{"z", num(p.geweke.z)}, {"pass", p.geweke.pass}};
    e["heidelberger_welch"] = {{"stationary", p.heidelberger_welch.stationary},
                               {"start", p.heidelberger_welch.start},
                               {"pvalue", num(p.heidelberger_welch.cvm_pvalue)},
                               {"halfwidth_ratio", num(p.heidelberger_welch.halfwidth_ratio)},
                               {"halfwidth_pass", p.heidelberger_welch.halfwidth_pass}};
    if (p.raftery_lewis_available) {
      e["raftery_lewis"] = {{"burn_in", p.raftery_lewis.burn_in},
                            {"total", p.raftery_lewis.total},
                            {"lower_bound", p.raftery_lewis.lower_bound},
                            {"thin", p.raftery_lewis.thin},
                            {"dependence_factor", num(p.raftery_lewis.dependence_factor)}};
    } else {
      e["raftery_lewis"] = nullptr;
    }
    j["parameters"].push_back(std::move(e));
  }
  for (bool loc : {true, false}) {
    const auto c = counts(loc);
    j["summary"][loc ? "location" : "scale"] = {{"total", c.total},
                                                {"geweke_pass", c.geweke_pass},
                                                {"heidelberger_welch_pass", c.hw_pass},
                                                {"dependence_factor_below_5", c.dependence_below_5}};
  }
  return j;
}

std::string DiagnosticReport::to_text() const {
  std::size_t width = 9;
  for (const auto& p : parameters) width = std::max(width, p.name.size());
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-*s %12s %10s %9s %8s %4s %4s %9s %4s %7s\n",
                static_cast<int>(width), "parameter", "mean", "sd", "ess", "geweke", "ok", "hw",
                "hw-ratio", "hw2", "dep");
  out << line;
  for (const auto& p : parameters) {
    char dep[16] = "-";
    if (p.raftery_lewis_available) {
      std::snprintf(dep, sizeof dep, "%.2f", p.raftery_lewis.dependence_factor);
    }
    std::snprintf(line, sizeof line, "%-*s %12.5g %10.4g %9.1f %8.3f %4s %4s %9.4f %4s %7s\n",
                  static_cast<int>(width), p.name.c_str(), p.mean, p.sd, p.ess, p.geweke.z,
                  p.geweke.pass ? "yes" : "no", p.heidelberger_welch.stationary ? "yes" : "no",
                  p.heidelberger_welch.halfwidth_ratio, p.heidelberger_welch.halfwidth_pass ? "yes" : "no",
                  dep);
    out << line;
  }
  for (bool loc : {true, false}) {
    const auto c = counts(loc);
    out << (loc ? "location" : "scale") << " parameters: " << c.geweke_pass << " out of "
        << c.total << " passed Geweke, " << c.hw_pass << " out of " << c.total
        << " passed Heidelberger-Welch, " << c.dependence_below_5 << " out of " << c.total
        << " have dependence factor < 5\n";
  }
  return out.str();
}

}  // namespace tripart::diag
