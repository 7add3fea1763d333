// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.
#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <Eigen/Dense>

#include "test_support.hpp"
#include "tripart/commands.hpp"
#include "tripart/diagnostics.hpp"
#include "tripart/distributions.hpp"
#include "tripart/model.hpp"
#include "tripart/pipeline.hpp"
#include "tripart/policy.hpp"
#include "tripart/sampler.hpp"
#include "tripart/synthetic.hpp"

using namespace tripart;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// ---------------------------------------------------------------- 1, 2, 3

Outcome probit_anchors() {
  // Shift the baseline index by the coefficient and map back.
  auto shifted = [](double base, double coef) {
    return dist::normal_cdf(dist::normal_quantile(base) + coef);
  };
  const double a = shifted(0.365, 0.433);
  const double b = shifted(0.405, -0.790);
  const bool ok = std::abs(a - 0.534) <= 0.002 && std::abs(b - 0.152) <= 0.002;
  return {ok, fmt("36.5%% -> %.2f%%, 40.5%% -> %.2f%%", 100 * a, 100 * b)};
}

Outcome log_transforms() {
  const double a = std::expm1(-0.607);
  const double b = std::expm1(0.619);
  const bool ok = std::abs(a + 0.455) <= 0.001 && std::abs(b - 0.857) <= 0.001;
  return {ok, fmt("exp(-0.607)-1 = %.2f%%, exp(0.619)-1 = %.2f%%", 100 * a, 100 * b)};
}

Outcome table4_tax() {
  const std::array<std::pair<double, std::string>, 4> cases{
      {{7.3, "6.0"}, {11.5, "10.2"}, {39.1, "37.8"}, {97.8, "96.5"}}};
  bool ok = true;
  std::string detail;
  for (const auto& [price, expected] : cases) {
    const auto s = policy::Scenario::tax_scenario("t", price);
    const auto shown = fmt("%.1f", s.tax_per_gram());
    ok = ok && shown == expected;
    detail += fmt("%.1f->%s ", price, shown.c_str());
  }
  return {ok, detail};
}

// ---------------------------------------------------------------- 4

Outcome recovery() {
  const int seeds = 20;
  const auto truth = synthetic::GeneratorSpec::recovery_design(1).theta.stacked();
  const auto dim = truth.size();
  std::vector<Eigen::ArrayXi> in_ci(seeds), within3(seeds);
  auto one = [&](int s) {
    const auto spec = synthetic::GeneratorSpec::recovery_design(static_cast<std::uint64_t>(1000 + s), 2500);
    const auto data = synthetic::generate(spec);
    const auto ds = Dataset::from_records(data.records, build_dataset(data.table, data.column_spec).dataset.names());
    SamplerConfig cfg;
    cfg.iterations = 1100;
    cfg.burn_in = 100;
    cfg.thin = 5;
    cfg.seed = static_cast<std::uint64_t>(s + 1);
    const auto chain = run_chain(ds, PriorSpec::noninformative(dim), cfg);
    Eigen::MatrixXd draws(chain.size(), dim);
    for (Eigen::Index d = 0; d < chain.size(); ++d) draws.row(d) = chain.beta(d).stacked().transpose();
    in_ci[static_cast<std::size_t>(s)] = Eigen::ArrayXi::Zero(dim);
    within3[static_cast<std::size_t>(s)] = Eigen::ArrayXi::Zero(dim);
    for (Eigen::Index j = 0; j < dim; ++j) {
      std::vector<double> col(draws.col(j).data(), draws.col(j).data() + draws.rows());
      std::sort(col.begin(), col.end());
      auto q = [&](double p) {
        const double h = (static_cast<double>(col.size()) - 1.0) * p;
        const auto lo = static_cast<std::size_t>(h);
        const auto hi = std::min(lo + 1, col.size() - 1);
        return col[lo] + (h - static_cast<double>(lo)) * (col[hi] - col[lo]);
      };
      const double m = oracle::mean(col);
      const double sd = std::sqrt(oracle::variance(col));
      in_ci[static_cast<std::size_t>(s)][j] = truth[j] >= q(0.025) && truth[j] <= q(0.975);
      within3[static_cast<std::size_t>(s)][j] = std::abs(m - truth[j]) < 3 * sd;
    }
  };
  std::vector<std::thread> pool;
  const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  for (unsigned t = 0; t < hw; ++t) {
    pool.emplace_back([&, t] {
      for (int s = static_cast<int>(t); s < seeds; s += static_cast<int>(hw)) one(s);
    });
  }
  for (auto& th : pool) th.join();
  Eigen::ArrayXi ci = Eigen::ArrayXi::Zero(dim);
  Eigen::ArrayXi w3 = Eigen::ArrayXi::Zero(dim);
  for (int s = 0; s < seeds; ++s) {
    ci += in_ci[static_cast<std::size_t>(s)];
    w3 += within3[static_cast<std::size_t>(s)];
  }
  const bool ok = (ci >= 17).all() && (w3 >= 18).all();
  return {ok, fmt("min CI coverage %d/20 (need 17), min within-3sd %d/20 (need 18), %ld parameters",
                  ci.minCoeff(), w3.minCoeff(), static_cast<long>(dim))};
}

// ---------------------------------------------------------------- 5

struct Moments {
  Eigen::VectorXd mean;
  Eigen::VectorXd mc_se;
};

Moments moments_of(const Eigen::MatrixXd& draws) {
  Moments m;
  m.mean = draws.colwise().mean().transpose();
  m.mc_se.resize(draws.cols());
  for (Eigen::Index j = 0; j < draws.cols(); ++j) {
    const Eigen::VectorXd c = draws.col(j);
    m.mc_se[j] = std::sqrt(diag::spectrum0_ar(std::span<const double>(c.data(), static_cast<std::size_t>(c.size()))).spectrum0 /
                           static_cast<double>(c.size()));
  }
  return m;
}

double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Standard normal quantile by bisection on erfc; slow but independent.
double phi_inv(double p) {
  double lo = -40.0;
  double hi = 40.0;
  for (int i = 0; i < 64; ++i) {
    const double mid = 0.5 * (lo + hi);
    (phi_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Unit-variance normal with mean mu restricted to z > 0 (positive) or z <= 0.
double truncated_unit(double mu, bool positive, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Work with the upper tail of a mean -mu or mu normal for accuracy.
  const double m = positive ? mu : -mu;
  const double cut = phi_cdf(-m);
  double z;
  if (cut < 0.5) {
    z = m + phi_inv(cut + u(gen) * (1.0 - cut));
  } else {
    // Upper tail: sample from the complement side.
    const double tail = phi_cdf(m);
    z = m - phi_inv(tail * (1.0 - u(gen)));
    z = std::max(z, 1e-300);
  }
  return positive ? z : -z;
}

Eigen::MatrixXd albert_chib(const Eigen::MatrixXd& X, const std::vector<bool>& y, int iterations, int burn,
                            std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  const auto k = X.cols();
  const Eigen::MatrixXd prec = X.transpose() * X + Eigen::MatrixXd::Identity(k, k) / 1000.0;
  const Eigen::LLT<Eigen::MatrixXd> llt(prec);
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  Eigen::VectorXd z(X.rows());
  Eigen::MatrixXd out(iterations - burn, k);
  for (int it = 0; it < iterations; ++it) {
    const Eigen::VectorXd mu = X * beta;
    for (Eigen::Index i = 0; i < X.rows(); ++i) z[i] = truncated_unit(mu[i], y[static_cast<std::size_t>(i)], gen);
    const Eigen::VectorXd mean = llt.solve(X.transpose() * z);
    Eigen::VectorXd e(k);
    for (auto& v : e) v = n01(gen);
    beta = mean + L.transpose().triangularView<Eigen::Upper>().solve(e);
    if (it >= burn) out.row(it - burn) = beta.transpose();
  }
  return out;
}

Eigen::MatrixXd regression_gibbs(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int iterations, int burn,
                                 std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> n01;
  const auto k = X.cols();
  const auto n = static_cast<double>(X.rows());
  // Variance prior matches the quantity-block marginal of IW(I, 5): IG(3/2, 1/2).
  const double a0 = 1.5;
  const double b0 = 0.5;
  double s2 = 1.0;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  Eigen::MatrixXd out(iterations - burn, k);
  const Eigen::MatrixXd xtx = X.transpose() * X;
  const Eigen::VectorXd xty = X.transpose() * y;
  for (int it = 0; it < iterations; ++it) {
    const Eigen::MatrixXd prec = xtx / s2 + Eigen::MatrixXd::Identity(k, k) / 1000.0;
    const Eigen::LLT<Eigen::MatrixXd> llt(prec);
    const Eigen::VectorXd mean = llt.solve(xty / s2);
    Eigen::VectorXd e(k);
    for (auto& v : e) v = n01(gen);
    beta = mean + llt.matrixU().solve(e);
    const double rss = (y - X * beta).squaredNorm();
    std::gamma_distribution<double> g(a0 + n / 2.0, 1.0 / (b0 + rss / 2.0));
    s2 = 1.0 / g(gen);
    if (it >= burn) out.row(it - burn) = beta.transpose();
  }
  return out;
}

Outcome exogeneity() {
  auto spec = synthetic::GeneratorSpec::recovery_design(77, 2500);
  spec.sigma = Eigen::Matrix3d::Identity();
  const auto data = synthetic::generate(spec);
  const auto names = build_dataset(data.table, data.column_spec).dataset.names();
  const auto ds = Dataset::from_records(data.records, names);
  const int iterations = 6000;
  const int burn = 1000;
  SamplerConfig cfg;
  cfg.iterations = iterations;
  cfg.burn_in = burn;
  cfg.thin = 1;
  cfg.seed = 3;
  const auto chain = run_chain(ds, PriorSpec::noninformative(ds.names().total()), cfg);
  const auto ka = static_cast<Eigen::Index>(names.access.size());
  const auto kc = static_cast<Eigen::Index>(names.use.size());
  const auto ky = static_cast<Eigen::Index>(names.quantity.size());
  Eigen::MatrixXd joint(chain.size(), ka + kc + ky);
  for (Eigen::Index d = 0; d < chain.size(); ++d) joint.row(d) = chain.beta(d).stacked().transpose();

  // Independent single-equation samplers on the corresponding subsamples.
  std::vector<Eigen::VectorXd> xa, xc, xy;
  std::vector<bool> ya, yc;
  std::vector<double> yy;
  for (const auto& r : data.records) {
    xa.push_back(r.x_access);
    ya.push_back(r.access);
    if (!r.access) continue;
    xc.push_back(r.x_use);
    yc.push_back(*r.use);
    if (!*r.use) continue;
    xy.push_back(r.x_quantity);
    yy.push_back(*r.log_quantity);
  }
  auto stack = [](const std::vector<Eigen::VectorXd>& rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()), rows.front().size());
    for (std::size_t i = 0; i < rows.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    return m;
  };
  const auto ra = albert_chib(stack(xa), ya, iterations, burn, 11);
  const auto rc = albert_chib(stack(xc), yc, iterations, burn, 12);
  const auto ry = regression_gibbs(stack(xy), Eigen::Map<const Eigen::VectorXd>(yy.data(), static_cast<Eigen::Index>(yy.size())),
                                   iterations, burn, 13);
  Eigen::MatrixXd single(ra.rows(), ka + kc + ky);
  single << ra, rc, ry;

  const auto mj = moments_of(joint);
  const auto ms = moments_of(single);
  int pass = 0;
  double worst = 0.0;
  double worst_sd = 0.0;
  for (Eigen::Index j = 0; j < mj.mean.size(); ++j) {
    const double z = std::abs(mj.mean[j] - ms.mean[j]) / std::hypot(mj.mc_se[j], ms.mc_se[j]);
    const double sd = std::sqrt((joint.col(j).array() - mj.mean[j]).square().sum() / static_cast<double>(joint.rows() - 1));
    worst_sd = std::max(worst_sd, std::abs(mj.mean[j] - ms.mean[j]) / sd);
    worst = std::max(worst, z);
    pass += z <= 2.0;
    if (std::getenv("TRIPART_ACCEPTANCE_VERBOSE")) {
      std::printf("    coef %ld: joint %.4f (se %.4f) single %.4f (se %.4f) z %.2f\n", static_cast<long>(j),
                  mj.mean[j], mj.mc_se[j], ms.mean[j], ms.mc_se[j], z);
    }
  }
  const auto total = static_cast<int>(mj.mean.size());
  Eigen::Vector3d corr = Eigen::Vector3d::Zero();
  for (Eigen::Index d = 0; d < chain.size(); ++d) {
    const Eigen::Matrix3d s = chain.sigma(d);
    corr += Eigen::Vector3d(s(1, 0), s(2, 0), s(2, 1) / std::sqrt(s(2, 2)));
  }
  corr /= static_cast<double>(chain.size());
  return {pass == total, fmt("%d/%d coefficients within 2 combined MC SE (largest %.2f SE, %.2f posterior sd); "
                             "joint posterior mean correlations (ca, ya, yc) = (%.3f, %.3f, %.3f)",
                             pass, total, worst, worst_sd, corr[0], corr[1], corr[2])};
}

// ---------------------------------------------------------------- 6

Outcome prior_consistency() {
  const auto empty = Dataset::from_records({}, DesignNames{{"a"}, {"c"}, {"y"}});
  SamplerConfig cfg;
  cfg.iterations = 10000;
  cfg.burn_in = 0;
  cfg.thin = 1;
  cfg.seed = 21;
  const auto chain = run_chain(empty, PriorSpec::noninformative(3), cfg);
  // Oracle: inverse of a sum of five outer products of standard normal vectors.
  std::mt19937_64 gen(99);
  std::normal_distribution<double> n01;
  const std::array<std::pair<int, int>, 6> cells{{{0, 0}, {1, 0}, {1, 1}, {2, 0}, {2, 1}, {2, 2}}};
  std::array<std::vector<double>, 6> sampled, direct;
  for (Eigen::Index d = 0; d < chain.size(); ++d) {
    const Eigen::Matrix3d om = chain.omega(d);
    Eigen::Matrix3d w = Eigen::Matrix3d::Zero();
    for (int k = 0; k < 5; ++k) {
      const Eigen::Vector3d z(n01(gen), n01(gen), n01(gen));
      w += z * z.transpose();
    }
    const Eigen::Matrix3d inv = w.inverse();
    for (std::size_t c = 0; c < cells.size(); ++c) {
      sampled[c].push_back(om(cells[c].first, cells[c].second));
      direct[c].push_back(inv(cells[c].first, cells[c].second));
    }
  }
  double min_p = 1.0;
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const double ks = oracle::ks_statistic(sampled[c], direct[c]);
    min_p = std::min(min_p, oracle::ks_pvalue(ks, sampled[c].size(), direct[c].size()));
  }
  double worst_rel = 0.0;
  for (int j = 0; j < 3; ++j) {
    std::vector<double> t;
    for (Eigen::Index d = 0; d < chain.size(); ++d) t.push_back(chain.theta(d).stacked()[j]);
    worst_rel = std::max(worst_rel, std::abs(oracle::variance(t) / 1000.0 - 1.0));
  }
  const bool ok = min_p > 0.01 && worst_rel <= 0.05 && chain.size() == 10000;
  return {ok, fmt("min KS p = %.3f over 6 elements, max |var/1000 - 1| = %.2f%%", min_p, 100 * worst_rel)};
}

// ---------------------------------------------------------------- 7

Outcome truncated_normal() {
  const int n = 1000000;
  RandomStream rng(5);
  double sum_half = 0.0;
  double sum_tail = 0.0;
  bool inside = true;
  for (int i = 0; i < n; ++i) {
    const double h = dist::sample_truncated_normal(0.0, 1.0, dist::TruncationInterval::positive(), rng);
    const double t = dist::sample_truncated_normal(-5.0, 1.0, dist::TruncationInterval::positive(), rng);
    inside = inside && h > 0.0 && t > 0.0 && std::isfinite(h) && std::isfinite(t);
    sum_half += h;
    sum_tail += t;
  }
  const double half = sum_half / n;
  const double tail = sum_tail / n;
  const double half_truth = std::sqrt(2.0 / std::numbers::pi);
  // Analytic mean of N(-5, 1) on (0, inf): -5 + phi(5) / (1 - Phi(5)); the
  // inverse Mills term alone is 5.1865.
  const double mills = std::exp(-12.5) / std::sqrt(2.0 * std::numbers::pi) / (0.5 * std::erfc(5.0 / std::numbers::sqrt2));
  const double tail_truth = -5.0 + mills;
  const bool ok = inside && std::abs(half / half_truth - 1) <= 0.005 && std::abs(tail / tail_truth - 1) <= 0.005 &&
                  std::abs((tail + 5.0) / 5.1865 - 1) <= 0.005;
  return {ok, fmt("half-normal mean %.5f (truth %.5f), tail mean %.5f (truth %.5f, shift %.4f), all in interval: %s",
                  half, half_truth, tail, tail_truth, tail + 5.0, inside ? "yes" : "no")};
}

// ---------------------------------------------------------------- 8

Outcome conditional_moments() {
  std::mt19937_64 gen(8);
  std::normal_distribution<double> n01;
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    Eigen::Matrix3d a;
    for (int i = 0; i < 9; ++i) a.data()[i] = n01(gen);
    const Eigen::Matrix3d sigma = a * a.transpose() + 0.5 * Eigen::Matrix3d::Identity();
    const double mq = n01(gen);
    const Eigen::Vector2d r(n01(gen), n01(gen));
    const auto m = policy::quantity_given_selection(sigma, mq, r[0], r[1]);
    const Eigen::Matrix2d s11 = sigma.topLeftCorner<2, 2>();
    const Eigen::Vector2d s12 = sigma.block<2, 1>(0, 2);
    const Eigen::Vector2d w = s11.fullPivLu().solve(s12);
    const double scale = std::max(1.0, std::abs(sigma(2, 2)));
    worst = std::max({worst, std::abs(m.mean - (mq + w.dot(r))) / scale,
                      std::abs(m.variance - (sigma(2, 2) - s12.dot(w))) / scale});
  }
  return {worst <= 1e-12, fmt("max scaled discrepancy %.2e over 1000 matrices", worst)};
}

// ---------------------------------------------------------------- 9

// P(Uc > 0 | Ua > 0) by Simpson quadrature over the access utility.
double use_given_access_quadrature(double ma, double mc, double rho) {
  const int n = 20000;
  const double hi = std::max(0.0, ma) + 12.0;
  const double h = hi / n;
  const double s = std::sqrt(1 - rho * rho);
  auto f = [&](double ua) {
    const double e = ua - ma;
    return std::exp(-0.5 * e * e) / std::sqrt(2 * std::numbers::pi) * phi_cdf((mc + rho * e) / s);
  };
  double sum = f(0.0) + f(hi);
  for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return sum * h / 3.0 / phi_cdf(ma);
}

Outcome predictive_brute_force() {
  const std::array<double, 5> grid{-1.5, -0.75, 0.0, 0.75, 1.5};
  int pass = 0;
  int total = 0;
  double worst = 0.0;
  double worst_exact = 0.0;
  for (double rho : {-0.6, 0.0, 0.6}) {
    Eigen::Matrix3d sigma = Eigen::Matrix3d::Identity();
    sigma(0, 1) = sigma(1, 0) = rho;
    for (double ma : grid) {
      for (double mc : grid) {
        ChainStore chain(DesignNames{{"(intercept)"}, {"(intercept)"}, {"(intercept)"}});
        LocationParams theta{Eigen::VectorXd::Constant(1, ma), Eigen::VectorXd::Constant(1, mc),
                             Eigen::VectorXd::Zero(1)};
        chain.append(theta, sigma, identify(sigma));
        policy::PredictOptions opt;
        opt.simulations = 20000;
        const policy::Covariates x{Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1), Eigen::VectorXd::Ones(1)};
        const auto r = policy::predict_individual(x, chain, policy::AccessRegime::observed, opt,
                                                  RandomStream(1000 + static_cast<std::uint64_t>(total)));
        // Rejection sampling of the bivariate normal on Ua > 0.
        std::mt19937_64 gen(static_cast<std::uint64_t>(5000 + total));
        std::normal_distribution<double> n01;
        long kept = 0;
        long used = 0;
        while (kept < 20000) {
          const double e1 = n01(gen);
          const double e2 = n01(gen);
          if (ma + e1 <= 0) continue;
          ++kept;
          used += mc + rho * e1 + std::sqrt(1 - rho * rho) * e2 > 0;
        }
        const double q = static_cast<double>(used) / static_cast<double>(kept);
        const double se = std::hypot(r.p_use_given_access.mc_se, std::sqrt(q * (1 - q) / static_cast<double>(kept)));
        const double z = se > 0 ? std::abs(r.p_use_given_access.mean - q) / se : 0.0;
        worst = std::max(worst, z);
        pass += z <= 3.0;
        const double exact = use_given_access_quadrature(ma, mc, rho);
        // With zero correlation the predictive value is exact and has no MC error.
        if (r.p_use_given_access.mc_se > 0) {
          worst_exact = std::max(worst_exact, std::abs(r.p_use_given_access.mean - exact) / r.p_use_given_access.mc_se);
        }
        if (z > 3.0 && std::getenv("TRIPART_ACCEPTANCE_VERBOSE")) {
          std::printf("    cell rho %.1f access %.2f use %.2f: predictive %.5f (se %.5f) brute %.5f exact %.5f\n", rho, ma, mc,
                      r.p_use_given_access.mean, r.p_use_given_access.mc_se, q, exact);
        }
        ++total;
      }
    }
  }
  return {pass == total, fmt("%d/%d grid cells within 3 MC SE of rejection sampling (largest %.2f); "
                             "against quadrature the largest gap is %.2f predictive SE",
                             pass, total, worst, worst_exact)};
}

// ---------------------------------------------------------------- 10

Outcome diagnostics_calibration() {
  const int chains = 200;
  const std::size_t n = 5000;
  int geweke_fail = 0;
  // Size of the stationarity test: the full chain is rejected (some initial
  // portion discarded, or every start rejected).
  int hw_flagged = 0;
  int hw_fail = 0;
  double rl_min = 1e9;
  double rl_max = 0.0;
  for (int c = 0; c < chains; ++c) {
    std::mt19937_64 gen(static_cast<std::uint64_t>(c + 1));
    std::normal_distribution<double> n01;
    std::vector<double> x(n);
    for (auto& v : x) v = n01(gen);
    geweke_fail += !diag::geweke(x).pass;
    const auto hw = diag::heidelberger_welch(x);
    hw_flagged += !hw.stationary || hw.start != 0;
    hw_fail += !hw.stationary;
    const auto rl = diag::raftery_lewis(x);
    rl_min = std::min(rl_min, rl.dependence_factor);
    rl_max = std::max(rl_max, rl.dependence_factor);
  }
  const double g = static_cast<double>(geweke_fail) / chains;
  const double h = static_cast<double>(hw_flagged) / chains;
  const bool ok = g >= 0.02 && g <= 0.09 && h >= 0.02 && h <= 0.09 && rl_min >= 0.8 && rl_max <= 1.5;
  return {ok, fmt("Geweke false positives %.1f%%, Heidelberger-Welch full-chain rejections %.1f%% "
                  "(%.1f%% after all restarts), Raftery-Lewis factor in [%.2f, %.2f]",
                  100 * g, 100 * h, 100.0 * hw_fail / chains, rl_min, rl_max)};
}

// ---------------------------------------------------------------- 11

Outcome pipeline_algebra() {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.1, 500.0);
  std::uniform_real_distribution<double> w(0.0, 1.0);
  double worst = 0.0;
  for (int t = 0; t < 100000; ++t) {
    const double pi = u(gen);
    double pj = u(gen);
    if (pi == pj) pj += 1.0;
    const double total = u(gen);
    const double avg = std::min(pi, pj) + w(gen) * std::abs(pi - pj);
    const auto [qi, qj] = pipeline::split_varieties(avg, total, pi, pj);
    worst = std::max({worst, std::abs((pi * qi + pj * qj) / total - avg) / avg, std::abs(qi + qj - total) / total});
  }
  const double creepy = pipeline::thc_weight({0, 0, 5, 0}).equivalent;
  int mismatches = 0;
  for (int a = 1; a <= 4; ++a)
    for (int b = 1; b <= 4; ++b)
      for (int c = 1; c <= 4; ++c) {
        const double m = (a + b + c) / 3.0;
        const auto expected = m < 2.0 ? pipeline::RiskLevel::low
                              : m < 3.0 ? pipeline::RiskLevel::medium
                                        : pipeline::RiskLevel::high;
        mismatches += pipeline::risk_index(a, b, c) != expected;
      }
  const bool ok = worst < 1e-10 && creepy == 20.0 && mismatches == 0;
  return {ok, fmt("split round-trip max rel error %.1e, creepy 5 -> %.0f, risk table mismatches %d/64", worst,
                  creepy, mismatches)};
}

// ---------------------------------------------------------------- 12

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const auto root = fs::temp_directory_path() / "tripart_acceptance_determinism";
  fs::remove_all(root);
  const std::string source = TRIPART_SOURCE_DIR;
  std::vector<std::vector<std::string>> contents;
  const std::vector<std::string> files{"chain_1.csv", "chain_1.json", "chain_2.csv", "chain_2.json",
                                       "fit_summary.csv", "tax_revenue.csv", "scenarios.csv"};
  for (int run = 0; run < 2; ++run) {
    const auto dir = (root / std::to_string(run)).string();
    fs::create_directories(dir);
    commands::SimulateOptions sim;
    sim.spec = source + "/configs/generator_demo.json";
    sim.out = dir;
    commands::cmd_simulate(sim);
    commands::FitOptions fit;
    fit.input = dir + "/data.csv";
    fit.columns = dir + "/columns.json";
    fit.out = dir;
    fit.chains = 2;
    fit.sampler.iterations = 600;
    fit.sampler.burn_in = 100;
    fit.sampler.thin = 5;
    fit.sampler.seed = 42;
    commands::cmd_fit(fit);
    commands::PolicyOptions pol;
    pol.chain = dir + "/chain_1";
    pol.population = dir + "/data.csv";
    pol.grid = source + "/configs/policy_grid.json";
    pol.out = dir;
    pol.mc.simulations = 50;
    pol.mc.draws = 50;
    commands::cmd_policy(pol);
    std::vector<std::string> c;
    for (const auto& f : files) c.push_back(slurp(fs::path(dir) / f));
    contents.push_back(std::move(c));
  }
  int identical = 0;
  for (std::size_t k = 0; k < files.size(); ++k) identical += !contents[0][k].empty() && contents[0][k] == contents[1][k];
  fs::remove_all(root);
  return {identical == static_cast<int>(files.size()),
          fmt("%d/%zu output files byte-identical across two runs", identical, files.size())};
}

}  // namespace

int main(int argc, char** argv) {
  // Optional criterion numbers restrict the run, e.g. `tripart_acceptance 5 9`.
  std::vector<std::size_t> only;
  for (int a = 1; a < argc; ++a) only.push_back(static_cast<std::size_t>(std::atoi(argv[a])));
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"probit arithmetic anchors", probit_anchors},
      {"log-coefficient transforms", log_transforms},
      {"tax per gram table", table4_tax},
      {"parameter recovery over 20 seeds", recovery},
      {"exogeneity equivalence with single-equation samplers", exogeneity},
      {"prior consistency with zero observations", prior_consistency},
      {"truncated-normal sampler", truncated_normal},
      {"conditional-moment oracle", conditional_moments},
      {"predictive brute force for P(use | access)", predictive_brute_force},
      {"diagnostics calibration", diagnostics_calibration},
      {"pipeline algebra", pipeline_algebra},
      {"determinism of chain files and policy tables", determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), i + 1) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failures += !o.pass;
    std::printf("%s %2zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
