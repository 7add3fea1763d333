#include "tripart/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "tripart/errors.hpp"
#include "tripart/io.hpp"

namespace tripart {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kEquationNames[] = {"access", "use", "quantity"};

std::string join_ids(const std::vector<std::int64_t>& ids, std::size_t limit = 20) {
  std::ostringstream out;
  for (std::size_t i = 0; i < ids.size() && i < limit; ++i) out << (i ? ", " : "") << ids[i];
  if (ids.size() > limit) out << ", ... (" << ids.size() << " total)";
  return out.str();
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::optional<int> parse_binary(const std::string& raw, const std::string& what) {
  const std::string s = trim(raw);
  if (s.empty() || s == "NA") return std::nullopt;
  const double v = parse_double(s, what);
  if (v == 0.0) return 0;
  if (v == 1.0) return 1;
  throw SchemaError(what + ": expected 0 or 1, got '" + s + "'");
}

}  // namespace

const std::vector<std::string>& DesignNames::operator[](Equation e) const {
  switch (e) {
    case Equation::access:
      return access;
    case Equation::use:
      return use;
    case Equation::quantity:
      break;
  }
  return quantity;
}

const std::vector<Eigen::Index>& GroupPartition::members(Group g) const {
  switch (g) {
    case Group::g1:
      return g1;
    case Group::g2:
      return g2;
    case Group::g3:
      break;
  }
  return g3;
}

Dataset::Dataset(DesignNames names) : names_(std::move(names)) {
  design_[0].resize(0, static_cast<Eigen::Index>(names_.access.size()));
  design_[1].resize(0, static_cast<Eigen::Index>(names_.use.size()));
  design_[2].resize(0, static_cast<Eigen::Index>(names_.quantity.size()));
}

Dataset Dataset::from_records(const std::vector<ObservationRecord>& records, DesignNames names) {
  Dataset d(std::move(names));
  const auto n = static_cast<Eigen::Index>(records.size());
  const Eigen::Index dims[3] = {static_cast<Eigen::Index>(d.names_.access.size()),
                                static_cast<Eigen::Index>(d.names_.use.size()),
                                static_cast<Eigen::Index>(d.names_.quantity.size())};
  for (int e = 0; e < 3; ++e) d.design_[e].resize(n, dims[e]);
  d.ids_.reserve(records.size());
  d.access_.reserve(records.size());
  d.use_.reserve(records.size());
  d.log_quantity_.resize(n);
  d.weights_.resize(n);
  d.markets_.reserve(records.size());
  d.partition_.group.reserve(records.size());

  std::vector<std::int64_t> bad_shape, bad_outcome, bad_value, bad_weight;
  std::set<std::int64_t> seen;
  std::vector<std::int64_t> duplicates;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = records[static_cast<std::size_t>(i)];
    if (!seen.insert(r.id).second) duplicates.push_back(r.id);
    const Eigen::VectorXd* x[3] = {&r.x_access, &r.x_use, &r.x_quantity};
    bool shape_ok = true;
    for (int e = 0; e < 3; ++e) shape_ok = shape_ok && x[e]->size() == dims[e];
    if (!shape_ok) {
      bad_shape.push_back(r.id);
      continue;
    }
    const bool use_ok = r.use.has_value() == r.access;
    const bool qty_ok = r.log_quantity.has_value() == (r.access && r.use.value_or(false));
    if (!use_ok || !qty_ok) bad_outcome.push_back(r.id);
    if (!r.x_access.allFinite() || !r.x_use.allFinite() || !r.x_quantity.allFinite() ||
        (r.log_quantity && !std::isfinite(*r.log_quantity))) {
      bad_value.push_back(r.id);
    }
    if (!(r.weight > 0.0) || !std::isfinite(r.weight)) bad_weight.push_back(r.id);

    for (int e = 0; e < 3; ++e) d.design_[e].row(i) = x[e]->transpose();
    d.ids_.push_back(r.id);
    d.access_.push_back(r.access ? 1 : 0);
    d.use_.push_back(r.use ? static_cast<std::int8_t>(*r.use) : std::int8_t{-1});
    d.log_quantity_(i) = r.log_quantity.value_or(kNaN);
    d.weights_(i) = r.weight;
    d.markets_.push_back(r.market);

    Group g = Group::g1;
    if (r.access) g = r.use.value_or(false) ? Group::g3 : Group::g2;
    d.partition_.group.push_back(g);
    (g == Group::g1 ? d.partition_.g1 : g == Group::g2 ? d.partition_.g2 : d.partition_.g3)
        .push_back(i);
  }
  if (!bad_shape.empty()) {
    throw DataIntegrityError("regressor vector lengths do not match the design for ids " +
                             join_ids(bad_shape));
  }
  if (!duplicates.empty()) throw DataIntegrityError("duplicate record ids " + join_ids(duplicates));
  if (!bad_outcome.empty()) {
    throw DataIntegrityError(
        "outcome pattern violates truncation rules (use present iff access, quantity present iff "
        "use) for ids " +
        join_ids(bad_outcome));
  }
  if (!bad_value.empty()) throw DataIntegrityError("non-finite values for ids " + join_ids(bad_value));
  if (!bad_weight.empty()) {
    throw DataIntegrityError("weights must be positive for ids " + join_ids(bad_weight));
  }
  return d;
}

std::optional<bool> Dataset::use(Eigen::Index i) const {
  if (use_[i] < 0) return std::nullopt;
  return use_[i] != 0;
}

std::optional<double> Dataset::log_quantity(Eigen::Index i) const {
  if (std::isnan(log_quantity_(i))) return std::nullopt;
  return log_quantity_(i);
}

ObservationRecord Dataset::record(Eigen::Index i) const {
  ObservationRecord r;
  r.id = ids_[i];
  r.access = access(i);
  r.use = use(i);
  r.log_quantity = log_quantity(i);
  r.x_access = design_[0].row(i).transpose();
  r.x_use = design_[1].row(i).transpose();
  r.x_quantity = design_[2].row(i).transpose();
  r.weight = weights_(i);
  r.market = markets_[i];
  return r;
}

std::vector<ObservationRecord> Dataset::records() const {
  std::vector<ObservationRecord> out;
  out.reserve(ids_.size());
  for (Eigen::Index i = 0; i < size(); ++i) out.push_back(record(i));
  return out;
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  std::vector<ObservationRecord> out;
  out.reserve(rows.size());
  for (auto i : rows) {
    if (i < 0 || i >= size()) throw InvalidArgument("subset: row index out of range");
    out.push_back(record(i));
  }
  return from_records(out, names_);
}

// ---------------------------------------------------------------------------
// Column spec

ColumnSpec ColumnSpec::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("column spec must be a JSON object");
  ColumnSpec spec;
  try {
    spec.id = j.value("id", std::string{});
    spec.access = j.value("access", spec.access);
    spec.use = j.value("use", spec.use);
    spec.quantity = j.value("quantity", spec.quantity);
    spec.quantity_transform = j.value("quantity_transform", spec.quantity_transform);
    spec.weight = j.value("weight", std::string{});
    spec.market = j.value("market", std::string{});
    spec.intercept = j.value("intercept", true);
    if (j.contains("roles")) spec.roles = j.at("roles").get<std::map<std::string, std::string>>();
    for (const auto& r : j.at("regressors")) {
      RegressorSpec reg;
      reg.column = r.at("column").get<std::string>();
      if (r.contains("equations")) {
        reg.equations = {false, false, false};
        for (const auto& e : r.at("equations")) {
          const auto name = e.get<std::string>();
          bool found = false;
          for (int k = 0; k < 3; ++k) {
            if (name == kEquationNames[k]) {
              reg.equations[k] = true;
              found = true;
            }
          }
          if (!found) throw SchemaError("unknown equation '" + name + "' for " + reg.column);
        }
      }
      reg.categorical = r.value("categorical", false);
      reg.transform = r.value("transform", std::string{"none"});
      if (r.contains("levels")) reg.levels = r.at("levels").get<std::vector<std::string>>();
      reg.base = r.value("base", std::string{});
      reg.interact_with = r.value("interact_with", std::string{});
      spec.regressors.push_back(std::move(reg));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw SchemaError(std::string("column spec: ") + ex.what());
  }
  if (spec.quantity_transform != "none" && spec.quantity_transform != "log") {
    throw SchemaError("quantity_transform must be 'none' or 'log'");
  }
  for (const auto& r : spec.regressors) {
    if (r.transform != "none" && r.transform != "log") {
      throw SchemaError("transform for '" + r.column + "' must be 'none' or 'log'");
    }
    if (r.categorical && r.transform != "none") {
      throw SchemaError("categorical regressor '" + r.column + "' cannot be transformed");
    }
    if (!r.interact_with.empty()) {
      const auto* other = spec.find(r.interact_with);
      if (other == nullptr || !other->categorical) {
        throw SchemaError("'" + r.column + "' interacts with '" + r.interact_with +
                          "', which is not a categorical regressor");
      }
    }
  }
  return spec;
}

nlohmann::json ColumnSpec::to_json() const {
  nlohmann::json j;
  if (!id.empty()) j["id"] = id;
  j["access"] = access;
  j["use"] = use;
  j["quantity"] = quantity;
  j["quantity_transform"] = quantity_transform;
  if (!weight.empty()) j["weight"] = weight;
  if (!market.empty()) j["market"] = market;
  j["intercept"] = intercept;
  if (!roles.empty()) j["roles"] = roles;
  j["regressors"] = nlohmann::json::array();
  for (const auto& r : regressors) {
    nlohmann::json rj;
    rj["column"] = r.column;
    rj["equations"] = nlohmann::json::array();
    for (int k = 0; k < 3; ++k) {
      if (r.equations[k]) rj["equations"].push_back(kEquationNames[k]);
    }
    if (r.categorical) {
      rj["categorical"] = true;
      rj["levels"] = r.levels;
      rj["base"] = r.base;
    }
    if (r.transform != "none") rj["transform"] = r.transform;
    if (!r.interact_with.empty()) rj["interact_with"] = r.interact_with;
    j["regressors"].push_back(std::move(rj));
  }
  return j;
}

const RegressorSpec* ColumnSpec::find(const std::string& column) const {
  for (const auto& r : regressors) {
    if (r.column == column) return &r;
  }
  return nullptr;
}

ColumnSpec resolve_levels(ColumnSpec spec, const CsvTable& table) {
  for (auto& r : spec.regressors) {
    if (!r.categorical) continue;
    if (r.levels.empty()) {
      const auto col = table.require_column(r.column);
      std::set<std::string> seen;
      for (const auto& row : table.rows) seen.insert(trim(row[col]));
      seen.erase("");
      r.levels.assign(seen.begin(), seen.end());
    }
    if (r.levels.empty()) throw SchemaError("categorical '" + r.column + "' has no levels");
    if (r.base.empty()) r.base = r.levels.front();
    if (std::find(r.levels.begin(), r.levels.end(), r.base) == r.levels.end()) {
      throw SchemaError("base level '" + r.base + "' not among the levels of '" + r.column + "'");
    }
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Design builder

namespace {

std::vector<std::string> non_base_levels(const RegressorSpec& r) {
  std::vector<std::string> out;
  for (const auto& l : r.levels) {
    if (l != r.base) out.push_back(l);
  }
  return out;
}

std::string term_name(const RegressorSpec& r) {
  return r.transform == "log" ? "log(" + r.column + ")" : r.column;
}

}  // namespace

DesignBuilder::DesignBuilder(ColumnSpec spec) : spec_(std::move(spec)) {
  std::vector<std::string>* out[3] = {&names_.access, &names_.use, &names_.quantity};
  for (int e = 0; e < 3; ++e) {
    if (spec_.intercept) out[e]->push_back("(intercept)");
    for (const auto& r : spec_.regressors) {
      if (!r.equations[e]) continue;
      if (r.categorical) {
        if (r.levels.empty()) {
          throw SchemaError("categorical '" + r.column + "' has unresolved levels");
        }
        for (const auto& l : non_base_levels(r)) out[e]->push_back(r.column + "=" + l);
      } else {
        out[e]->push_back(term_name(r));
      }
      if (!r.interact_with.empty()) {
        const auto* other = spec_.find(r.interact_with);
        for (const auto& l : non_base_levels(*other)) {
          out[e]->push_back(term_name(r) + ":" + other->column + "=" + l);
        }
      }
    }
  }
}

DesignBuilder::Lookup DesignBuilder::map_lookup(const std::map<std::string, std::string>& values) {
  return [&values](const std::string& column) -> std::optional<std::string> {
    auto it = values.find(column);
    if (it == values.end()) return std::nullopt;
    return it->second;
  };
}

std::array<Eigen::VectorXd, 3> DesignBuilder::build(const Lookup& lookup) const {
  auto cell = [&](const std::string& column) {
    auto v = lookup(column);
    if (!v) throw SchemaError("missing value for column '" + column + "'");
    return trim(*v);
  };
  auto numeric = [&](const RegressorSpec& r) {
    const double v = parse_double(cell(r.column), "column '" + r.column + "'");
    if (r.transform == "log") {
      if (!(v > 0.0)) {
        throw DataIntegrityError("log transform of non-positive value in '" + r.column + "'");
      }
      return std::log(v);
    }
    if (!std::isfinite(v)) throw DataIntegrityError("non-finite value in '" + r.column + "'");
    return v;
  };
  auto level_of = [&](const RegressorSpec& r) {
    std::string v = cell(r.column);
    if (std::find(r.levels.begin(), r.levels.end(), v) == r.levels.end()) {
      throw SchemaError("unknown category '" + v + "' in column '" + r.column + "'");
    }
    return v;
  };

  std::array<std::vector<double>, 3> cols;
  for (int e = 0; e < 3; ++e) {
    if (spec_.intercept) cols[e].push_back(1.0);
    for (const auto& r : spec_.regressors) {
      if (!r.equations[e]) continue;
      double value = 1.0;
      if (r.categorical) {
        const auto level = level_of(r);
        for (const auto& l : non_base_levels(r)) cols[e].push_back(level == l ? 1.0 : 0.0);
      } else {
        value = numeric(r);
        cols[e].push_back(value);
      }
      if (!r.interact_with.empty()) {
        const auto* other = spec_.find(r.interact_with);
        const auto level = level_of(*other);
        for (const auto& l : non_base_levels(*other)) {
          cols[e].push_back(level == l ? value : 0.0);
        }
      }
    }
  }
  std::array<Eigen::VectorXd, 3> x;
  for (int e = 0; e < 3; ++e) {
    x[e] = Eigen::Map<const Eigen::VectorXd>(cols[e].data(), static_cast<Eigen::Index>(cols[e].size()));
  }
  return x;
}

// ---------------------------------------------------------------------------

BuiltDataset build_dataset(const CsvTable& table, const ColumnSpec& raw_spec) {
  ColumnSpec spec = resolve_levels(raw_spec, table);
  DesignBuilder builder(spec);

  const auto a_col = table.require_column(spec.access);
  const auto c_col = table.require_column(spec.use);
  const auto y_col = table.require_column(spec.quantity);
  const auto id_col = spec.id.empty() ? std::nullopt : std::optional(table.require_column(spec.id));
  const auto w_col =
      spec.weight.empty() ? std::nullopt : std::optional(table.require_column(spec.weight));
  const auto m_col =
      spec.market.empty() ? std::nullopt : std::optional(table.require_column(spec.market));
  for (const auto& r : spec.regressors) table.require_column(r.column);

  BuildReport report;
  std::vector<ObservationRecord> records;
  records.reserve(table.rows.size());
  std::vector<std::int64_t> missing_quantity;

  for (std::size_t row = 0; row < table.rows.size(); ++row) {
    const auto& cells = table.rows[row];
    ObservationRecord rec;
    const std::string where = " (row " + std::to_string(row + 1) + ")";
    if (id_col) {
      const double id = parse_double(trim(cells[*id_col]), "id" + where);
      if (id != std::floor(id)) throw SchemaError("non-integer id" + where);
      rec.id = static_cast<std::int64_t>(id);
    } else {
      rec.id = static_cast<std::int64_t>(row);
    }
    auto access = parse_binary(cells[a_col], spec.access + where);
    if (!access) throw DataIntegrityError("missing access outcome for id " + std::to_string(rec.id));
    auto use = parse_binary(cells[c_col], spec.use + where);
    if (use && *use == 1 && *access == 0) {
      access = 1;
      ++report.forced_access;
    }
    rec.access = *access == 1;
    if (!rec.access) {
      if (use) ++report.dropped_use;
      use.reset();
    } else if (!use) {
      throw DataIntegrityError("missing use outcome for id " + std::to_string(rec.id) +
                               " with access = 1");
    }
    if (use) rec.use = *use == 1;

    const std::string qcell = trim(cells[y_col]);
    const bool has_q = !qcell.empty() && qcell != "NA";
    if (rec.use.value_or(false)) {
      if (!has_q) {
        missing_quantity.push_back(rec.id);
      } else {
        double q = parse_double(qcell, spec.quantity + where);
        if (spec.quantity_transform == "log") {
          if (!(q > 0.0)) {
            throw DataIntegrityError("non-positive quantity for id " + std::to_string(rec.id));
          }
          q = std::log(q);
        }
        rec.log_quantity = q;
      }
    } else if (has_q) {
      ++report.dropped_quantity;
    }

    if (w_col) rec.weight = parse_double(trim(cells[*w_col]), spec.weight + where);
    if (m_col) rec.market = trim(cells[*m_col]);

    auto lookup = [&](const std::string& column) -> std::optional<std::string> {
      auto idx = table.column(column);
      if (!idx) return std::nullopt;
      return cells[*idx];
    };
    auto x = builder.build(lookup);
    rec.x_access = std::move(x[0]);
    rec.x_use = std::move(x[1]);
    rec.x_quantity = std::move(x[2]);
    records.push_back(std::move(rec));
  }
  if (!missing_quantity.empty()) {
    throw DataIntegrityError("missing quantity for users (use = 1), ids " +
                             join_ids(missing_quantity));
  }
  return {Dataset::from_records(records, builder.names()), std::move(spec), report};
}

}  // namespace tripart
