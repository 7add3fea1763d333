#pragma once

#include <array>
#include <map>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tripart/csv.hpp"
#include "tripart/dataset.hpp"
#include "tripart/model.hpp"

namespace tripart::synthetic {

/// Forward-model settings. Each equation's design is an intercept followed by
/// its named columns; coefficient vectors include the intercept.
struct GeneratorSpec {
  std::size_t n = 2500;
  std::uint64_t seed = 1;
  LocationParams theta;
  /// Identified covariance: SPD with unit access and use variances.
  Eigen::Matrix3d sigma = Eigen::Matrix3d::Identity();
  /// Regressor column names per equation (access, use, quantity). Defaults
  /// to xa1.., xc1.., xy1.. when left empty.
  std::array<std::vector<std::string>, 3> columns;
  /// Columns that enter the design as logs. Without supplied covariates
  /// they are drawn as exp(standard normal).
  std::vector<std::string> log_columns;
  /// Passed through to the column spec (e.g. "price" -> column name).
  std::map<std::string, std::string> roles;

  /// Three regressors plus intercept per equation, sigma with correlations
  /// (0.6, 0.4, 0.7).
  static GeneratorSpec recovery_design(std::uint64_t seed = 1, std::size_t n = 2500);

  static GeneratorSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  /// Throws InvalidArgument when sigma or dimensions are invalid.
  void validate() const;
  const std::vector<std::string>& column_names(Equation e) const;
};

struct SyntheticData {
  /// Schema consumed by build_dataset with `column_spec`.
  CsvTable table;
  ColumnSpec column_spec;
  std::vector<ObservationRecord> records;
  /// Per-row latent (access utility, use utility, log quantity).
  Eigen::MatrixX3d latent;
  std::array<std::size_t, 3> group_sizes{};
  nlohmann::json truth;
};

/// Draws covariates (standard normal unless `covariates` supplies the named
/// columns) and outcomes from the three-part model.
SyntheticData generate(const GeneratorSpec& spec, const CsvTable* covariates = nullptr);

}  // namespace tripart::synthetic
