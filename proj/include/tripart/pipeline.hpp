#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tripart/csv.hpp"

namespace tripart::pipeline {

/// Monthly quantities by variety.
struct VarietyQuantities {
  double regular = 0.0;
  double corinto = 0.0;
  double creepy = 0.0;
  double other = 0.0;

  VarietyQuantities operator+(const VarietyQuantities& o) const {
    return {regular + o.regular, corinto + o.corinto, creepy + o.creepy, other + o.other};
  }
};

struct ThcResult {
  /// Regular-equivalent monthly quantity.
  double equivalent = 0.0;
  /// The record reports the unweighable "other" variety.
  bool excluded = false;
};

/// creepy counts four times, corinto and regular once.
ThcResult thc_weight(const VarietyQuantities& q);

/// Quantities of two varieties reproducing a reported average price.
std::pair<double, double> split_varieties(double avg_price, double total_quantity, double price_i,
                                          double price_j);

/// Nearest-rank percentile (1-based rank ceil(p n / 100)) of unsorted values.
double nearest_rank_percentile(std::vector<double> values, double percent);

struct PriceRecord {
  std::int64_t id = 0;
  bool consumer = false;
  std::optional<double> price;
  std::optional<double> expenditure;
  std::optional<double> quantity;
  std::string municipality;
  std::string stratum;
};

/// Provenance of an output price.
enum class PriceSource {
  reported = 0,
  /// expenditure divided by quantity
  derived = 5,
  cell = 1,
  municipality = 2,
  stratum = 3,
  overall = 4,
};

struct ImputedPrice {
  double price = 0.0;
  PriceSource source = PriceSource::reported;
  /// Fallback level 1-4 for imputed prices, 0 for own prices.
  int level() const;
};

struct PriceTrim {
  double lower_percent = 10.0;
  double upper_percent = 95.0;
};

/// Own price for consumers, donor-cell mean for everyone else.
std::vector<ImputedPrice> impute_prices(const std::vector<PriceRecord>& records,
                                        const PriceTrim& trim = {});

struct MatchDonor {
  std::int64_t id = 0;
  std::string variety;
  double price = 0.0;
  Eigen::VectorXd features;
};

struct MatchRecipient {
  std::int64_t id = 0;
  std::vector<std::string> varieties;
  Eigen::VectorXd features;
};

struct MatchResult {
  std::int64_t id = 0;
  /// variety -> (price, donor id); varieties without a donor are listed in `unmatched`.
  std::map<std::string, std::pair<double, std::int64_t>> prices;
  std::vector<std::string> unmatched;
};

/// Nearest single-variety donor per needed variety, in features standardized
/// over recipients and donors together.
std::vector<MatchResult> nn_match_variety_price(const std::vector<MatchRecipient>& recipients,
                                                const std::vector<MatchDonor>& donors);

enum class RiskLevel { low, medium, high };

std::string to_string(RiskLevel r);
RiskLevel parse_risk_level(const std::string& s);

struct RiskCutoffs {
  double medium = 2.0;
  double high = 3.0;
};

/// Mean of three 1..4 answers mapped to low / medium / high.
RiskLevel risk_index(int rarely, int sometimes, int frequently, const RiskCutoffs& cutoffs = {});

/// Column mapping and options for the survey preparation step.
struct PipelineConfig {
  std::string id = "id";
  /// Reports use; non-users get an imputed price only.
  std::string consumer = "C";
  /// Variety -> quantity column. A cell equal to `unknown_marker` means the
  /// variety was consumed but only the total is known.
  std::map<std::string, std::string> quantities{{"regular", "q_regular"},
                                                {"corinto", "q_corinto"},
                                                {"creepy", "q_creepy"},
                                                {"other", "q_other"}};
  std::string unknown_marker = "?";
  std::string total_quantity = "q_total";
  std::string price = "price";
  std::string expenditure = "expenditure";
  std::string municipality = "municipality";
  std::string stratum = "stratum";
  std::vector<std::string> match_features;
  std::array<std::string, 3> risk_items{"risk_rarely", "risk_sometimes", "risk_frequently"};
  RiskCutoffs risk_cutoffs;
  PriceTrim trim;
  std::string quantity_output = "Y";
  std::string price_output = "price_imputed";
  std::string risk_output = "risk";

  static PipelineConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct PipelineSummary {
  std::size_t rows = 0;
  std::size_t excluded = 0;
  std::size_t split = 0;
  std::size_t unresolved = 0;
  std::array<std::size_t, 5> price_levels{};
  std::size_t high_risk = 0;
  nlohmann::json to_json() const;
};

struct PipelineOutput {
  CsvTable table;
  PipelineSummary summary;
};

/// Raw survey table -> prepared table with audit columns appended.
PipelineOutput prepare_survey(const CsvTable& raw, const PipelineConfig& config);

}  // namespace tripart::pipeline
