#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tripart/chain_store.hpp"
#include "tripart/dataset.hpp"
#include "tripart/random.hpp"

namespace tripart::policy {

enum class AccessRegime { observed, legalized };

/// A counterfactual setting. Prices and costs are per joint (1 joint = 1 gram)
/// in the units of the fitted price column.
struct Scenario {
  std::string name = "baseline";
  AccessRegime access = AccessRegime::observed;
  std::optional<double> price;
  /// Level of the risk-perception column, e.g. "low".
  std::optional<std::string> risk;
  /// Further raw-column overrides applied to every profile.
  std::map<std::string, std::string> overrides;
  double cost = 1.33;
  /// Defaults to price - cost when a price is set, 0 otherwise.
  std::optional<double> tax;
  double black_market = 0.34;
  /// Price units per US dollar (100 for cents).
  double units_per_usd = 100.0;
  /// Local currency per US dollar.
  double exchange_rate = 3274.0;

  double tax_per_gram() const;
  void validate() const;

  static Scenario tax_scenario(std::string name, double price, double cost = 1.33);
  static Scenario from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct Summary {
  double mean = 0.0;
  /// Spread across posterior draws.
  double sd = 0.0;
  /// Monte-Carlo standard error of `mean`.
  double mc_se = 0.0;
};

struct PredictiveResult {
  Summary p_access;
  Summary p_use;
  Summary p_use_given_access;
  /// Joints per month given use; the mean of exp(log quantity).
  Summary consumption;
  std::size_t draws_used = 0;
  std::size_t draws_skipped = 0;
  /// P(use) below reporting precision (5e-5).
  bool zero_probability = false;

  nlohmann::json to_json() const;
};

struct PredictOptions {
  /// Simulations per posterior draw.
  int simulations = 200;
  /// Cap on the number of posterior draws used (0 = all).
  Eigen::Index max_draws = 0;
  unsigned threads = 0;
};

/// Regressor vectors for one individual.
using Covariates = std::array<Eigen::VectorXd, 3>;

struct ConditionalMoments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Moments of the quantity error given the access and use errors, for an
/// identified covariance; residuals are U - x'beta for access and use.
ConditionalMoments quantity_given_selection(const Eigen::Matrix3d& sigma, double mean_quantity,
                                            double access_residual, double use_residual);

/// P(use = 1 | access = 1) for one parameter value, by Monte Carlo over the
/// access utility truncated to (0, inf). Also returns the per-simulation
/// values' standard error.
struct UseProbability {
  double mean = 0.0;
  double mc_se = 0.0;
};
UseProbability use_given_access(double access_index, double use_index, const Eigen::Matrix3d& sigma,
                                int simulations, RandomStream& rng);

PredictiveResult predict_individual(const Covariates& x, const ChainStore& chain,
                                    AccessRegime regime, const PredictOptions& options,
                                    const RandomStream& rng);

struct LegalizationEffect {
  PredictiveResult observed;
  PredictiveResult legalized;
  /// Change in P(use), percentage points.
  Summary delta_pp;
};

LegalizationEffect legalize_delta(const Covariates& x, const ChainStore& chain,
                                  const PredictOptions& options, const RandomStream& rng);

/// One member of a weighted population: raw cells keyed by column name.
struct PopulationMember {
  std::map<std::string, std::string> cells;
  double weight = 1.0;
};

/// Reads a population CSV; `weight_column` must exist and be positive.
std::vector<PopulationMember> read_population(const CsvTable& table, const std::string& weight_column);

/// Builder for the chain's regressor layout (from the stored column spec).
DesignBuilder design_for(const ChainStore& chain);

/// Raw cells with the scenario's price, risk and overrides applied.
std::map<std::string, std::string> apply_scenario(std::map<std::string, std::string> cells,
                                                  const Scenario& scenario, const ColumnSpec& spec);

Covariates covariates_for(const std::map<std::string, std::string>& cells, const Scenario& scenario,
                          const DesignBuilder& builder);

struct RevenueResult {
  /// Annual revenue in US dollars (mean over posterior draws).
  Summary revenue_usd;
  double revenue_local = 0.0;
  /// Weighted number of users per year-month under the scenario.
  double users = 0.0;
  /// Weighted mean monthly joints among simulated users.
  double consumption_per_user = 0.0;
  double tax_per_gram = 0.0;
  double price = 0.0;
  std::size_t draws_used = 0;

  nlohmann::json to_json() const;
};

/// Annual tax revenue under legal access: simulated use, then simulated
/// monthly quantity x 12 x (1 - black market) x weight x tax.
RevenueResult tax_revenue(const std::vector<PopulationMember>& population, const ChainStore& chain,
                          const Scenario& scenario, const PredictOptions& options,
                          const RandomStream& rng);

/// Same computation on prebuilt covariates.
RevenueResult tax_revenue(const std::vector<Covariates>& x, const std::vector<double>& weights,
                          const ChainStore& chain, const Scenario& scenario,
                          const PredictOptions& options, const RandomStream& rng);

struct ElasticitySummary {
  std::string group;
  double mean = 0.0;
  double sd = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  Eigen::VectorXd draws;
};

/// Price elasticity of quantity per draw: the log-price coefficient plus the
/// interaction with `group` (empty or the base level means no interaction).
ElasticitySummary elasticity(const ChainStore& chain, const std::string& price_term,
                             const std::string& interaction_column = {},
                             const std::string& group = {});

/// Weighted population shares of use before and after legalization.
struct PopulationEffect {
  double p_use_observed = 0.0;
  double p_use_legalized = 0.0;
  double delta_pp = 0.0;
};

PopulationEffect population_legalization(const std::vector<PopulationMember>& population,
                                         const ChainStore& chain, const Scenario& scenario,
                                         const PredictOptions& options, const RandomStream& rng);

}  // namespace tripart::policy
