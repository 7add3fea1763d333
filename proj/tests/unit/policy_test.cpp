#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"
#include "tripart/distributions.hpp"
#include "tripart/errors.hpp"
#include "tripart/model.hpp"
#include "tripart/policy.hpp"

using namespace tripart;
using namespace tripart::policy;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double d : v) x[i++] = d;
  return x;
}

/// Chain of identical draws; omega has unit selection variances so beta = theta.
ChainStore constant_chain(const LocationParams& theta, const Eigen::Matrix3d& sigma, int draws,
                          DesignNames names) {
  ChainStore chain(std::move(names));
  for (int d = 0; d < draws; ++d) chain.append(theta, sigma, identify(sigma));
  return chain;
}

ChainStore intercept_chain(double a, double c, double y, const Eigen::Matrix3d& sigma, int draws = 20) {
  LocationParams t{vec({a}), vec({c}), vec({y})};
  return constant_chain(t, sigma, draws, {{"(intercept)"}, {"(intercept)"}, {"(intercept)"}});
}

Covariates ones() { return {vec({1.0}), vec({1.0}), vec({1.0})}; }

Eigen::Matrix3d correlated(double ac, double ay, double cy, double yy) {
  Eigen::Matrix3d s;
  s << 1, ac, ay, ac, 1, cy, ay, cy, yy;
  return s;
}

}  // namespace

TEST(Scenario, TaxArithmeticAndValidation) {
  EXPECT_NEAR(Scenario::tax_scenario("low", 7.3).tax_per_gram(), 5.97, 1e-12);
  EXPECT_NEAR(Scenario::tax_scenario("ref", 39.1).tax_per_gram(), 37.77, 1e-12);
  EXPECT_NEAR(Scenario::tax_scenario("high", 97.8).tax_per_gram(), 96.47, 1e-12);
  EXPECT_EQ(std::round(Scenario::tax_scenario("ref", 39.1).tax_per_gram() * 10) / 10, 37.8);
  EXPECT_EQ(Scenario::tax_scenario("mid", 11.5).access, AccessRegime::legalized);
  Scenario s;
  s.price = 10.0;
  s.tax = 3.0;
  EXPECT_THROW(s.validate(), InvalidArgument);
  s.tax = 10.0 - 1.33;
  EXPECT_NO_THROW(s.validate());
  Scenario bm;
  bm.black_market = 1.0;
  EXPECT_THROW(bm.validate(), InvalidArgument);
  auto r = Scenario::tax_scenario("ref", 39.1);
  r.risk = "high";
  r.overrides["age"] = "20s";
  EXPECT_EQ(Scenario::from_json(r.to_json()).to_json(), r.to_json());
}

TEST(ConditionalMoments, MatchesPartitionedGaussian) {
  std::mt19937_64 gen(17);
  std::normal_distribution<double> z;
  for (int t = 0; t < 500; ++t) {
    Eigen::Matrix3d a;
    for (int i = 0; i < 9; ++i) a.data()[i] = z(gen);
    const Eigen::Matrix3d sigma = a * a.transpose() + 0.1 * Eigen::Matrix3d::Identity();
    const double mq = z(gen);
    const Eigen::Vector2d r(z(gen), z(gen));
    const auto m = quantity_given_selection(sigma, mq, r[0], r[1]);
    const Eigen::Matrix2d s11 = sigma.topLeftCorner<2, 2>();
    const Eigen::Vector2d s12 = sigma.block<2, 1>(0, 2);
    const Eigen::Vector2d w = s11.ldlt().solve(s12);
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    EXPECT_NEAR(m.mean, mq + w.dot(r), 1e-12 * scale * (1 + r.norm()) * 10);
    EXPECT_NEAR(m.variance, sigma(2, 2) - s12.dot(w), 1e-12 * scale * 10);
  }
}

TEST(UseGivenAccess, MatchesBruteForceBivariate) {
  for (double rho : {-0.6, 0.0, 0.6}) {
    for (double ma : {-1.0, 0.5}) {
      const double mc = 0.3;
      const auto sigma = correlated(rho, 0.0, 0.0, 1.0);
      RandomStream rng(40);
      const auto p = use_given_access(ma, mc, sigma, 200000, rng);
      // Direct simulation of (Ua, Uc) with rejection on Ua > 0.
      RandomStream brute(41);
      long kept = 0;
      long used = 0;
      while (kept < 200000) {
        const double e1 = dist::standard_normal(brute);
        const double e2 = dist::standard_normal(brute);
        const double ua = ma + e1;
        const double uc = mc + rho * e1 + std::sqrt(1 - rho * rho) * e2;
        if (ua <= 0) continue;
        ++kept;
        used += uc > 0;
      }
      const double q = static_cast<double>(used) / static_cast<double>(kept);
      const double se = std::sqrt(p.mc_se * p.mc_se + q * (1 - q) / static_cast<double>(kept));
      EXPECT_NEAR(p.mean, q, 3 * se) << "rho=" << rho << " ma=" << ma;
    }
  }
  // Independence: exactly Phi(mu_c).
  RandomStream rng(1);
  EXPECT_NEAR(use_given_access(0.2, 0.4, Eigen::Matrix3d::Identity(), 50, rng).mean,
              dist::normal_cdf(0.4), 1e-14);
}

TEST(PredictIndividual, IndependentStandardCase) {
  const auto chain = intercept_chain(0.0, 0.0, 1.0, Eigen::Matrix3d::Identity(), 50);
  PredictOptions opt;
  opt.simulations = 2000;
  const auto r = predict_individual(ones(), chain, AccessRegime::observed, opt, RandomStream(3));
  EXPECT_NEAR(r.p_access.mean, 0.5, 1e-14);
  EXPECT_NEAR(r.p_use_given_access.mean, 0.5, 1e-14);
  EXPECT_NEAR(r.p_use.mean, 0.25, 1e-14);
  const double lognormal_mean = std::exp(1.0 + 0.5);
  EXPECT_NEAR(r.consumption.mean, lognormal_mean, 4 * r.consumption.mc_se);
  EXPECT_LT(r.consumption.mc_se, 0.05 * lognormal_mean);
  EXPECT_EQ(r.draws_used, 50u);
  EXPECT_FALSE(r.zero_probability);
  const auto legal = predict_individual(ones(), chain, AccessRegime::legalized, opt, RandomStream(3));
  EXPECT_EQ(legal.p_access.mean, 1.0);
  EXPECT_EQ(legal.p_use.mean, legal.p_use_given_access.mean);
}

TEST(PredictIndividual, CoherenceAndDeterminism) {
  const auto chain = intercept_chain(0.4, -0.3, 0.8, correlated(0.6, 0.4, 0.7, 1.0), 30);
  PredictOptions opt;
  opt.simulations = 300;
  const auto a = predict_individual(ones(), chain, AccessRegime::observed, opt, RandomStream(9));
  EXPECT_LE(a.p_use.mean, a.p_use_given_access.mean);
  EXPECT_NEAR(a.p_use.mean, a.p_access.mean * a.p_use_given_access.mean, 1e-12);
  for (double p : {a.p_access.mean, a.p_use.mean, a.p_use_given_access.mean}) {
    EXPECT_GE(p, 0.0);
    EXPECT_LE(p, 1.0);
  }
  opt.threads = 4;
  const auto b = predict_individual(ones(), chain, AccessRegime::observed, opt, RandomStream(9));
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(PredictIndividual, ZeroProbabilityFlagAndDimensionCheck) {
  const auto chain = intercept_chain(-5.0, -3.0, 0.0, Eigen::Matrix3d::Identity(), 5);
  const auto r = predict_individual(ones(), chain, AccessRegime::observed, {}, RandomStream(1));
  EXPECT_TRUE(r.zero_probability);
  Covariates bad{vec({1.0, 2.0}), vec({1.0}), vec({1.0})};
  EXPECT_THROW(predict_individual(bad, chain, AccessRegime::observed, {}, RandomStream(1)), InvalidArgument);
}

TEST(LegalizeDelta, IndependenceAlgebraAndSaturation) {
  const double a = -0.4;
  const double c = 0.7;
  const auto chain = intercept_chain(a, c, 0.0, Eigen::Matrix3d::Identity(), 10);
  const auto e = legalize_delta(ones(), chain, {}, RandomStream(2));
  EXPECT_NEAR(e.delta_pp.mean, 100.0 * (1 - dist::normal_cdf(a)) * dist::normal_cdf(c), 1e-10);
  const auto sat = intercept_chain(12.0, 0.2, 0.0, correlated(0.5, 0.0, 0.0, 1.0), 10);
  EXPECT_NEAR(legalize_delta(ones(), sat, {}, RandomStream(2)).delta_pp.mean, 0.0, 1e-12);
}

TEST(TaxRevenue, ZeroTaxAndLinearity) {
  const auto chain = intercept_chain(0.3, 0.1, 1.0, correlated(0.4, 0.2, 0.3, 1.0), 10);
  std::vector<Covariates> x(50, ones());
  std::vector<double> w(50, 1000.0);
  const auto zero = tax_revenue(x, w, chain, Scenario::tax_scenario("zero", 1.33), {}, RandomStream(5));
  EXPECT_EQ(zero.revenue_usd.mean, 0.0);
  const auto one = tax_revenue(x, w, chain, Scenario::tax_scenario("a", 11.33), {}, RandomStream(5));
  const auto two = tax_revenue(x, w, chain, Scenario::tax_scenario("b", 21.33), {}, RandomStream(5));
  EXPECT_GT(one.revenue_usd.mean, 0.0);
  EXPECT_NEAR(two.revenue_usd.mean, 2.0 * one.revenue_usd.mean, 1e-9 * one.revenue_usd.mean);
  EXPECT_EQ(one.users, two.users);
  EXPECT_NEAR(one.revenue_local, one.revenue_usd.mean * 3274.0, 1e-6);
  w[3] = 0.0;
  EXPECT_THROW(tax_revenue(x, w, chain, Scenario::tax_scenario("a", 11.33), {}, RandomStream(5)),
               DataIntegrityError);
}

TEST(TaxRevenue, TwoPersonClosedForm) {
  // Single draw, identity covariance: P(use | legal) = Phi(mu_c), E[joints | use] = exp(mu_y + 1/2).
  LocationParams theta{vec({0.0, 0.0}), vec({0.2, -0.5}), vec({1.0, 0.4})};
  const auto chain = constant_chain(theta, Eigen::Matrix3d::Identity(), 1,
                                    {{"a", "b"}, {"a", "b"}, {"a", "b"}});
  const Covariates p1{vec({1, 0}), vec({1, 0}), vec({1, 0})};
  const Covariates p2{vec({0, 1}), vec({0, 1}), vec({0, 1})};
  const int copies = 20000;
  const double w1 = 1500.0;
  const double w2 = 900.0;
  std::vector<Covariates> x;
  std::vector<double> w;
  for (int i = 0; i < copies; ++i) {
    x.push_back(p1);
    w.push_back(w1 / copies);
    x.push_back(p2);
    w.push_back(w2 / copies);
  }
  const auto s = Scenario::tax_scenario("ref", 39.1);
  const double factor = 12.0 * (1 - 0.34) * s.tax_per_gram() / 100.0;
  double expected = 0.0;
  double var = 0.0;
  for (auto [mc, my, wi] : {std::tuple{0.2, 1.0, w1}, std::tuple{-0.5, 0.4, w2}}) {
    const double p = dist::normal_cdf(mc);
    expected += wi * p * std::exp(my + 0.5) * factor;
    const double wc = wi / copies * factor;
    var += copies * wc * wc * (p * std::exp(2 * my + 2) - p * p * std::exp(2 * my + 1));
  }
  const auto r = tax_revenue(x, w, chain, s, {}, RandomStream(8));
  EXPECT_NEAR(r.revenue_usd.mean, expected, 3 * std::sqrt(var));
}

TEST(Elasticity, SumsMainAndInteraction) {
  LocationParams theta{vec({0.0}), vec({0.0}), vec({2.0, -0.445, 0.337})};
  const auto chain = constant_chain(theta, Eigen::Matrix3d::Identity(), 4,
                                    {{"(intercept)"}, {"(intercept)"},
                                     {"(intercept)", "log(price)", "log(price):age=50s"}});
  EXPECT_NEAR(elasticity(chain, "log(price)").mean, -0.445, 1e-15);
  EXPECT_NEAR(elasticity(chain, "log(price)", "age", "50s").mean, -0.108, 1e-12);
  EXPECT_EQ(elasticity(chain, "log(price)").sd, 0.0);
  EXPECT_THROW(elasticity(chain, "price"), InvalidArgument);
  EXPECT_THROW(elasticity(chain, "log(price)", "age", "60s"), InvalidArgument);
  LocationParams zero{vec({0.0}), vec({0.0}), vec({0.0, 0.0, 0.0})};
  const auto zc = constant_chain(zero, Eigen::Matrix3d::Identity(), 2, chain.names());
  EXPECT_EQ(elasticity(zc, "log(price)", "age", "50s").mean, 0.0);
}
