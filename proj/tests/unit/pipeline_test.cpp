#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "tripart/csv.hpp"
#include "tripart/errors.hpp"
#include "tripart/pipeline.hpp"

using namespace tripart;
using namespace tripart::pipeline;

TEST(ThcWeight, RegularCreepyAndOther) {
  EXPECT_EQ(thc_weight({10, 0, 0, 0}).equivalent, 10.0);
  EXPECT_EQ(thc_weight({0, 0, 5, 0}).equivalent, 20.0);
  EXPECT_EQ(thc_weight({0, 7, 0, 0}).equivalent, 7.0);
  const auto other = thc_weight({0, 0, 0, 3});
  EXPECT_TRUE(other.excluded);
  EXPECT_FALSE(thc_weight({1, 1, 1, 0}).excluded);
  EXPECT_THROW(thc_weight({-1, 0, 0, 0}), DataIntegrityError);
  EXPECT_THROW(thc_weight({NAN, 0, 0, 0}), DataIntegrityError);
}

TEST(ThcWeight, Linear) {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> u(0.0, 20.0);
  for (int t = 0; t < 200; ++t) {
    const VarietyQuantities a{u(gen), u(gen), u(gen), 0.0};
    const VarietyQuantities b{u(gen), u(gen), u(gen), 0.0};
    EXPECT_NEAR(thc_weight(a + b).equivalent, thc_weight(a).equivalent + thc_weight(b).equivalent, 1e-12);
  }
}

TEST(SplitVarieties, HandSolvedSystems) {
  auto [a, b] = split_varieties(5, 10, 5, 7);
  EXPECT_NEAR(a, 10.0, 1e-12);
  EXPECT_NEAR(b, 0.0, 1e-12);
  std::tie(a, b) = split_varieties(6, 10, 5, 7);
  EXPECT_NEAR(a, 5.0, 1e-12);
  EXPECT_NEAR(b, 5.0, 1e-12);
  std::tie(a, b) = split_varieties(6.5, 8, 5, 7);
  EXPECT_NEAR(a, 2.0, 1e-12);
  EXPECT_NEAR(b, 6.0, 1e-12);
  EXPECT_THROW(split_varieties(8, 10, 5, 7), PipelineError);
  EXPECT_THROW(split_varieties(4.9, 10, 5, 7), PipelineError);
  EXPECT_THROW(split_varieties(5, 10, 5, 5), PipelineError);
}

TEST(SplitVarieties, ReaveragingReproducesPrice) {
  std::mt19937_64 gen(9);
  std::uniform_real_distribution<double> u(0.5, 200.0);
  for (int t = 0; t < 1000; ++t) {
    const double pi = u(gen);
    const double pj = u(gen);
    const double total = u(gen);
    const double w = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    const double avg = std::min(pi, pj) + w * std::abs(pi - pj);
    const auto [qi, qj] = split_varieties(avg, total, pi, pj);
    EXPECT_GE(qi, 0.0);
    EXPECT_GE(qj, 0.0);
    EXPECT_NEAR(qi + qj, total, 1e-10 * total);
    EXPECT_NEAR((pi * qi + pj * qj) / total, avg, 1e-10 * avg);
  }
}

TEST(Percentile, NearestRank) {
  std::vector<double> v;
  for (int i = 100; i >= 1; --i) v.push_back(i);
  EXPECT_EQ(nearest_rank_percentile(v, 10), 10.0);
  EXPECT_EQ(nearest_rank_percentile(v, 95), 95.0);
  EXPECT_EQ(nearest_rank_percentile(v, 100), 100.0);
  EXPECT_EQ(nearest_rank_percentile({3, 1, 2}, 50), 2.0);
}

namespace {

PriceRecord consumer(std::int64_t id, double price, std::string muni, std::string stratum) {
  return {id, true, price, std::nullopt, std::nullopt, std::move(muni), std::move(stratum)};
}
PriceRecord non_consumer(std::int64_t id, std::string muni, std::string stratum) {
  return {id, false, std::nullopt, std::nullopt, std::nullopt, std::move(muni), std::move(stratum)};
}

}  // namespace

TEST(ImputePrices, FallbackOrder) {
  // No trimming so that tiny donor sets are kept whole.
  const PriceTrim none{1.0, 100.0};
  std::vector<PriceRecord> recs{consumer(1, 4, "m1", "s1"), consumer(2, 6, "m1", "s1"),
                                consumer(3, 8, "m2", "s2"), non_consumer(4, "m1", "s1"),
                                non_consumer(5, "m3", "s2"),  non_consumer(6, "m1", "s9"),
                                non_consumer(7, "m9", "s9")};
  const auto out = impute_prices(recs, none);
  EXPECT_EQ(out[0].price, 4.0);
  EXPECT_EQ(out[0].level(), 0);
  EXPECT_EQ(out[3].price, 5.0);
  EXPECT_EQ(out[3].level(), 1);
  EXPECT_EQ(out[4].price, 8.0);
  EXPECT_EQ(out[4].level(), 3);
  EXPECT_EQ(out[5].price, 5.0);
  EXPECT_EQ(out[5].level(), 2);
  EXPECT_EQ(out[6].price, 6.0);
  EXPECT_EQ(out[6].level(), 4);
}

TEST(ImputePrices, DerivedPriceAndMissingPrice) {
  std::vector<PriceRecord> recs{{1, true, std::nullopt, 480.0, 8.0, "m", "s"}};
  const auto out = impute_prices(recs, {1.0, 100.0});
  EXPECT_EQ(out[0].price, 60.0);
  EXPECT_EQ(out[0].source, PriceSource::derived);
  std::vector<PriceRecord> bad{{1, true, std::nullopt, std::nullopt, 8.0, "m", "s"}};
  EXPECT_THROW(impute_prices(bad), DataIntegrityError);
  std::vector<PriceRecord> no_donors{non_consumer(1, "m", "s")};
  EXPECT_THROW(impute_prices(no_donors), PipelineError);
}

TEST(ImputePrices, TrimmingExcludesOuterRanks) {
  // Prices 1..100, one consumer each in its own cell; the overall mean of the
  // donor pool is the mean of ranks 10..95 when trimming is inclusive.
  std::vector<PriceRecord> recs;
  for (int i = 1; i <= 100; ++i) recs.push_back(consumer(i, i, "c" + std::to_string(i), "s" + std::to_string(i)));
  recs.push_back(non_consumer(1000, "none", "none"));
  const auto out = impute_prices(recs);
  double expected = 0.0;
  for (int r = 10; r <= 95; ++r) expected += r;
  expected /= 86.0;
  EXPECT_NEAR(out.back().price, expected, 1e-12);
  // Cells holding only a trimmed price fall through to the overall mean.
  recs.push_back(non_consumer(1001, "c5", "none"));
  recs.push_back(non_consumer(1002, "c50", "none"));
  const auto out2 = impute_prices(recs);
  EXPECT_EQ(out2[101].level(), 4);
  EXPECT_EQ(out2[102].price, 50.0);
  EXPECT_EQ(out2[102].level(), 2);
}

TEST(ImputePrices, StaysInsideDonorRange) {
  std::mt19937_64 gen(3);
  std::lognormal_distribution<double> price(4.0, 0.6);
  std::uniform_int_distribution<int> cell(0, 4);
  std::vector<PriceRecord> recs;
  std::vector<double> donors;
  for (int i = 0; i < 300; ++i) {
    const auto m = "m" + std::to_string(cell(gen));
    const auto s = "s" + std::to_string(cell(gen));
    if (i % 3 == 0) {
      recs.push_back(non_consumer(i, m, s));
    } else {
      recs.push_back(consumer(i, price(gen), m, s));
      donors.push_back(*recs.back().price);
    }
  }
  const double lo = nearest_rank_percentile(donors, 10);
  const double hi = nearest_rank_percentile(donors, 95);
  const auto out = impute_prices(recs);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    if (recs[i].consumer) continue;
    EXPECT_GE(out[i].price, lo - 1e-12);
    EXPECT_LE(out[i].price, hi + 1e-12);
  }
}

TEST(NearestNeighbour, SingleAndNearestDonor) {
  std::vector<MatchDonor> one{{7, "regular", 60.0, Eigen::Vector2d(100, 100)}};
  std::vector<MatchRecipient> r{{1, {"regular"}, Eigen::Vector2d(0, 0)}};
  auto m = nn_match_variety_price(r, one);
  EXPECT_EQ(m[0].prices.at("regular").first, 60.0);

  std::vector<MatchDonor> two{{7, "regular", 60.0, Eigen::Vector2d(2, 0)},
                              {3, "regular", 70.0, Eigen::Vector2d(1, 0)},
                              {9, "creepy", 90.0, Eigen::Vector2d(0, 5)}};
  std::vector<MatchRecipient> rr{{1, {"regular", "creepy", "other"}, Eigen::Vector2d(0, 0)}};
  m = nn_match_variety_price(rr, two);
  EXPECT_EQ(m[0].prices.at("regular").second, 3);
  EXPECT_EQ(m[0].prices.at("creepy").first, 90.0);
  ASSERT_EQ(m[0].unmatched.size(), 1u);
  EXPECT_EQ(m[0].unmatched[0], "other");
}

TEST(NearestNeighbour, TiesGoToLowestId) {
  std::vector<MatchDonor> d{{8, "regular", 1.0, Eigen::Vector2d(1, 0)},
                            {4, "regular", 2.0, Eigen::Vector2d(-1, 0)},
                            {6, "regular", 3.0, Eigen::Vector2d(0, 1)}};
  std::vector<MatchRecipient> r{{1, {"regular"}, Eigen::Vector2d(0, 0)}};
  EXPECT_EQ(nn_match_variety_price(r, d)[0].prices.at("regular").second, 4);
}

TEST(NearestNeighbour, InvariantToColumnScaling) {
  // Feature 0 in small units, feature 1 in large units.
  std::vector<MatchDonor> d{{1, "regular", 10.0, Eigen::Vector2d(0.0, 30.0)},
                            {2, "regular", 20.0, Eigen::Vector2d(3.0, 0.0)}};
  std::vector<MatchRecipient> r{{9, {"regular"}, Eigen::Vector2d(0.0, 10.0)}};
  const auto base = nn_match_variety_price(r, d)[0].prices.at("regular").second;
  auto d10 = d;
  auto r10 = r;
  for (auto& x : d10) x.features[0] *= 10.0;
  for (auto& x : r10) x.features[0] *= 10.0;
  EXPECT_EQ(nn_match_variety_price(r10, d10)[0].prices.at("regular").second, base);

  // Unstandardized oracle: raw Euclidean distance flips under the same scaling.
  auto raw_nearest = [](const std::vector<MatchRecipient>& rec, const std::vector<MatchDonor>& don) {
    return (rec[0].features - don[0].features).norm() < (rec[0].features - don[1].features).norm() ? 1 : 2;
  };
  EXPECT_NE(raw_nearest(r, d), raw_nearest(r10, d10));
}

TEST(RiskIndex, CutoffsAndMonotonicity) {
  EXPECT_EQ(risk_index(1, 1, 1), RiskLevel::low);
  EXPECT_EQ(risk_index(4, 4, 4), RiskLevel::high);
  EXPECT_EQ(risk_index(2, 3, 3), RiskLevel::medium);
  EXPECT_EQ(risk_index(2, 2, 2), RiskLevel::medium);
  EXPECT_EQ(risk_index(3, 3, 3), RiskLevel::high);
  EXPECT_EQ(risk_index(1, 2, 2), RiskLevel::low);
  EXPECT_THROW(risk_index(0, 1, 1), DataIntegrityError);
  EXPECT_THROW(risk_index(1, 5, 1), DataIntegrityError);
  for (int a = 1; a <= 4; ++a)
    for (int b = 1; b <= 4; ++b)
      for (int c = 1; c <= 4; ++c) {
        const auto base = static_cast<int>(risk_index(a, b, c));
        if (a < 4) EXPECT_GE(static_cast<int>(risk_index(a + 1, b, c)), base);
        if (b < 4) EXPECT_GE(static_cast<int>(risk_index(a, b + 1, c)), base);
        if (c < 4) EXPECT_GE(static_cast<int>(risk_index(a, b, c + 1)), base);
      }
  EXPECT_EQ(parse_risk_level(to_string(RiskLevel::medium)), RiskLevel::medium);
  EXPECT_THROW(parse_risk_level("extreme"), InvalidArgument);
}

TEST(PipelineConfig, JsonRoundTrip) {
  PipelineConfig c;
  c.match_features = {"age", "education"};
  c.risk_cutoffs = {2.5, 3.5};
  c.trim = {5.0, 90.0};
  const auto back = PipelineConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.match_features, c.match_features);
  EXPECT_EQ(back.trim.upper_percent, 90.0);
}

TEST(PrepareSurvey, DemoSurvey) {
  const auto raw = read_csv(std::string(TRIPART_SOURCE_DIR) + "/configs/raw_survey_demo.csv");
  PipelineConfig config;
  config.match_features = {"age", "education"};
  const auto out = prepare_survey(raw, config);
  const auto& t = out.table;
  const auto y = t.require_column("Y");
  const auto ex = t.require_column("audit_excluded");
  const auto split = t.require_column("audit_split");
  const auto price = t.require_column("price_imputed");
  const auto level = t.require_column("audit_price_level");
  const auto risk = t.require_column("risk");
  EXPECT_EQ(std::stod(t.rows[0][y]), 10.0);
  EXPECT_EQ(std::stod(t.rows[1][y]), 20.0);
  // 12 units at average 75 between regular (60) and creepy (90): 6 + 4 * 6.
  EXPECT_EQ(t.rows[2][split], "split");
  EXPECT_NEAR(std::stod(t.rows[2][y]), 30.0, 1e-9);
  EXPECT_EQ(t.rows[5][ex], "1");
  EXPECT_EQ(t.rows[5][y], "");
  EXPECT_NEAR(std::stod(t.rows[6][price]), 60.0, 1e-12);
  EXPECT_EQ(t.rows[3][y], "");
  EXPECT_EQ(t.rows[9][level], "4");
  EXPECT_EQ(t.rows[3][level], "1");
  EXPECT_EQ(t.rows[0][risk], "high");
  EXPECT_EQ(t.rows[6][risk], "low");
  EXPECT_EQ(out.summary.rows, 10u);
  EXPECT_EQ(out.summary.split, 1u);
  EXPECT_EQ(out.summary.excluded, 1u);
  // Pure function of the input.
  EXPECT_EQ(format_csv(prepare_survey(raw, config).table), format_csv(t));
}

TEST(PrepareSurvey, RejectsBadInput) {
  auto raw = parse_csv("id,C,q_regular,price,municipality,stratum\n1,1,-2,50,m,s\n");
  EXPECT_THROW(prepare_survey(raw, PipelineConfig{}), DataIntegrityError);
  raw = parse_csv("id,C,q_regular,price,municipality,stratum\n1,2,2,50,m,s\n");
  EXPECT_THROW(prepare_survey(raw, PipelineConfig{}), SchemaError);
  raw = parse_csv("id,C,q_regular,price,municipality,stratum,Y\n1,1,2,50,m,s,3\n");
  EXPECT_THROW(prepare_survey(raw, PipelineConfig{}), SchemaError);
}
