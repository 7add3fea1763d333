#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "tripart/csv.hpp"
#include "tripart/model.hpp"

namespace tripart {

/// One survey row after design expansion.
struct ObservationRecord {
  std::int64_t id = 0;
  bool access = false;
  /// Absent when access is false.
  std::optional<bool> use;
  /// Log quantity; present only when use is true.
  std::optional<double> log_quantity;
  Eigen::VectorXd x_access;
  Eigen::VectorXd x_use;
  Eigen::VectorXd x_quantity;
  double weight = 1.0;
  std::string market;
};

/// Regressor names per equation, in design-column order.
struct DesignNames {
  std::vector<std::string> access;
  std::vector<std::string> use;
  std::vector<std::string> quantity;

  const std::vector<std::string>& operator[](Equation e) const;
  Eigen::Index total() const {
    return static_cast<Eigen::Index>(access.size() + use.size() + quantity.size());
  }
  bool operator==(const DesignNames&) const = default;
};

/// Exhaustive, disjoint split of a dataset into G1 / G2 / G3.
struct GroupPartition {
  std::vector<Group> group;
  std::vector<Eigen::Index> g1;
  std::vector<Eigen::Index> g2;
  std::vector<Eigen::Index> g3;

  const std::vector<Eigen::Index>& members(Group g) const;
  std::size_t size(Group g) const { return members(g).size(); }
};

/// Immutable columnar store of validated observations.
class Dataset {
 public:
  explicit Dataset(DesignNames names = {});

  /// Validates every record invariant; throws DataIntegrityError naming ids.
  static Dataset from_records(const std::vector<ObservationRecord>& records, DesignNames names);

  Eigen::Index size() const { return static_cast<Eigen::Index>(ids_.size()); }
  const DesignNames& names() const { return names_; }
  const Eigen::MatrixXd& design(Equation e) const { return design_[static_cast<int>(e)]; }
  const std::vector<std::int64_t>& ids() const { return ids_; }
  bool access(Eigen::Index i) const { return access_[i] != 0; }
  std::optional<bool> use(Eigen::Index i) const;
  std::optional<double> log_quantity(Eigen::Index i) const;
  const Eigen::VectorXd& weights() const { return weights_; }
  const std::vector<std::string>& markets() const { return markets_; }
  const GroupPartition& partition() const { return partition_; }

  ObservationRecord record(Eigen::Index i) const;
  std::vector<ObservationRecord> records() const;
  Dataset subset(const std::vector<Eigen::Index>& rows) const;

 private:
  DesignNames names_;
  std::array<Eigen::MatrixXd, 3> design_;
  std::vector<std::int64_t> ids_;
  std::vector<std::uint8_t> access_;
  std::vector<std::int8_t> use_;
  Eigen::VectorXd log_quantity_;
  Eigen::VectorXd weights_;
  std::vector<std::string> markets_;
  GroupPartition partition_;
};

/// One regressor of the column spec.
struct RegressorSpec {
  std::string column;
  std::array<bool, 3> equations{true, true, true};
  bool categorical = false;
  /// "none" or "log" (numeric only).
  std::string transform = "none";
  /// Categorical levels; empty means enumerate from data.
  std::vector<std::string> levels;
  /// Omitted reference level; defaults to the first level.
  std::string base;
  /// Name of a categorical regressor: adds this column times each non-base
  /// dummy of that regressor.
  std::string interact_with;
};

/// Mapping from survey columns to model roles (JSON column-spec file).
struct ColumnSpec {
  std::string id;
  std::string access = "A";
  std::string use = "C";
  std::string quantity = "Y";
  /// "none" if the quantity column is already in logs, "log" to take logs.
  std::string quantity_transform = "none";
  std::string weight;
  std::string market;
  bool intercept = true;
  std::vector<RegressorSpec> regressors;
  /// Named raw columns that scenarios may override ("price", "risk", "age").
  std::map<std::string, std::string> roles;

  static ColumnSpec from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  const RegressorSpec* find(const std::string& column) const;
};

/// Builds per-equation regressor vectors from raw string cells.
class DesignBuilder {
 public:
  /// Returns the raw cell for a column, or nullopt if the column is absent.
  using Lookup = std::function<std::optional<std::string>(const std::string&)>;

  /// `spec` must have categorical levels resolved (see resolve_levels).
  explicit DesignBuilder(ColumnSpec spec);

  const DesignNames& names() const { return names_; }
  const ColumnSpec& spec() const { return spec_; }
  std::array<Eigen::VectorXd, 3> build(const Lookup& lookup) const;

  /// Convenience lookup over a string map.
  static Lookup map_lookup(const std::map<std::string, std::string>& values);

 private:
  ColumnSpec spec_;
  DesignNames names_;
};

/// Fills in categorical levels from data where the spec leaves them open,
/// and checks every declared base exists.
ColumnSpec resolve_levels(ColumnSpec spec, const CsvTable& table);

struct BuildReport {
  /// Rows with use = 1 but access = 0, overwritten to access = 1.
  std::size_t forced_access = 0;
  /// Use reported for rows without access (ignored).
  std::size_t dropped_use = 0;
  /// Quantity reported for non-users (ignored).
  std::size_t dropped_quantity = 0;
};

struct BuiltDataset {
  Dataset dataset;
  ColumnSpec spec;
  BuildReport report;
};

BuiltDataset build_dataset(const CsvTable& table, const ColumnSpec& spec);

}  // namespace tripart
