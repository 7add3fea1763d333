#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tripart/dataset.hpp"
#include "tripart/model.hpp"

namespace tripart {

struct ChainMetadata {
  std::uint64_t seed = 0;
  int iterations = 0;
  int burn_in = 0;
  int thin = 1;
  std::string step2 = "accessed";
  std::size_t group_sizes[3] = {0, 0, 0};
  std::size_t spd_repairs = 0;
  /// Kept in memory only: timing would break byte-identical outputs.
  double wall_time_seconds = 0.0;
  PriorSpec prior;
  /// Resolved column spec the design was built with (null when unknown).
  nlohmann::json column_spec;
};

/// Retained posterior draws, one row per draw, on both scales.
///
/// Row layout: theta (unidentified, stacked a|c|y), omega (6 lower-triangle
/// entries), sigma (6 lower-triangle entries), beta (identified location,
/// stacked a|c|y).
class ChainStore {
 public:
  explicit ChainStore(DesignNames names = {});

  void append(const LocationParams& theta, const Eigen::Matrix3d& omega,
              const Identified& identified);

  Eigen::Index size() const { return static_cast<Eigen::Index>(values_.size() / width()); }
  bool empty() const { return values_.empty(); }
  Eigen::Index width() const { return 2 * names_.total() + 12; }
  const DesignNames& names() const { return names_; }
  ChainMetadata& metadata() { return metadata_; }
  const ChainMetadata& metadata() const { return metadata_; }

  LocationParams theta(Eigen::Index draw) const;
  LocationParams beta(Eigen::Index draw) const;
  Eigen::Matrix3d omega(Eigen::Index draw) const;
  Eigen::Matrix3d sigma(Eigen::Index draw) const;

  std::vector<std::string> column_names() const;
  /// Series of one named column across draws.
  Eigen::VectorXd column(const std::string& name) const;
  Eigen::VectorXd column(Eigen::Index index) const;
  /// Identified location columns (beta_*).
  std::vector<std::string> location_columns() const;
  /// Free identified covariance columns: sigma[2,1], sigma[3,1], sigma[3,2], sigma[3,3].
  std::vector<std::string> scale_columns() const;

  std::string to_csv() const;
  nlohmann::json metadata_json() const;
  static ChainStore from_text(const std::string& csv_text, const nlohmann::json& metadata);

  /// Atomic writes of `<stem>.csv` and `<stem>.json`.
  void save(const std::string& stem) const;
  static ChainStore load(const std::string& stem);

  bool operator==(const ChainStore& other) const;

 private:
  Eigen::Matrix3d packed_matrix(Eigen::Index draw, Eigen::Index offset) const;
  LocationParams packed_location(Eigen::Index draw, Eigen::Index offset) const;

  DesignNames names_;
  std::vector<double> values_;
  ChainMetadata metadata_;
};

}  // namespace tripart
