#include "tripart/chain_store.hpp"

#include <algorithm>

#include "tripart/csv.hpp"
#include "tripart/errors.hpp"
#include "tripart/io.hpp"

namespace tripart {

namespace {

constexpr int kPacked[6][2] = {{0, 0}, {1, 0}, {1, 1}, {2, 0}, {2, 1}, {2, 2}};

std::vector<double> to_vector(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

nlohmann::json matrix_json(const Eigen::MatrixXd& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) rows.push_back(to_vector(m.row(i).transpose()));
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto n = static_cast<Eigen::Index>(j.size());
  Eigen::MatrixXd m(n, n == 0 ? 0 : static_cast<Eigen::Index>(j.at(0).size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) m(i, k) = j.at(i).at(k).get<double>();
  }
  return m;
}

}  // namespace

ChainStore::ChainStore(DesignNames names) : names_(std::move(names)) {
  metadata_.prior = PriorSpec::noninformative(names_.total());
}

void ChainStore::append(const LocationParams& theta, const Eigen::Matrix3d& omega,
                        const Identified& identified) {
  if (theta.dim() != names_.total()) throw InvalidArgument("chain: theta dimension mismatch");
  const LocationParams beta = rescale_location(theta, identified.rescale);
  const auto push = [this](const Eigen::VectorXd& v) {
    values_.insert(values_.end(), v.data(), v.data() + v.size());
  };
  push(theta.stacked());
  for (const auto& ij : kPacked) values_.push_back(omega(ij[0], ij[1]));
  for (const auto& ij : kPacked) values_.push_back(identified.sigma(ij[0], ij[1]));
  push(beta.stacked());
}

LocationParams ChainStore::packed_location(Eigen::Index draw, Eigen::Index offset) const {
  const double* row = values_.data() + draw * width() + offset;
  const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(row, names_.total());
  return LocationParams::unstack(v, static_cast<Eigen::Index>(names_.access.size()),
                                 static_cast<Eigen::Index>(names_.use.size()),
                                 static_cast<Eigen::Index>(names_.quantity.size()));
}

Eigen::Matrix3d ChainStore::packed_matrix(Eigen::Index draw, Eigen::Index offset) const {
  const double* row = values_.data() + draw * width() + offset;
  Eigen::Matrix3d m;
  for (int k = 0; k < 6; ++k) {
    m(kPacked[k][0], kPacked[k][1]) = row[k];
    m(kPacked[k][1], kPacked[k][0]) = row[k];
  }
  return m;
}

LocationParams ChainStore::theta(Eigen::Index draw) const { return packed_location(draw, 0); }
LocationParams ChainStore::beta(Eigen::Index draw) const {
  return packed_location(draw, names_.total() + 12);
}
Eigen::Matrix3d ChainStore::omega(Eigen::Index draw) const {
  return packed_matrix(draw, names_.total());
}
Eigen::Matrix3d ChainStore::sigma(Eigen::Index draw) const {
  return packed_matrix(draw, names_.total() + 6);
}

std::vector<std::string> ChainStore::column_names() const {
  std::vector<std::string> out;
  auto location = [&](const std::string& prefix) {
    for (const auto& n : names_.access) out.push_back(prefix + "_a[" + n + "]");
    for (const auto& n : names_.use) out.push_back(prefix + "_c[" + n + "]");
    for (const auto& n : names_.quantity) out.push_back(prefix + "_y[" + n + "]");
  };
  auto packed = [&](const std::string& prefix) {
    for (const auto& ij : kPacked) {
      out.push_back(prefix + "[" + std::to_string(ij[0] + 1) + "," + std::to_string(ij[1] + 1) +
                    "]");
    }
  };
  location("theta");
  packed("omega");
  packed("sigma");
  location("beta");
  return out;
}

Eigen::VectorXd ChainStore::column(Eigen::Index index) const {
  if (index < 0 || index >= width()) throw InvalidArgument("chain: column index out of range");
  Eigen::VectorXd out(size());
  for (Eigen::Index d = 0; d < size(); ++d) out(d) = values_[d * width() + index];
  return out;
}

Eigen::VectorXd ChainStore::column(const std::string& name) const {
  const auto names = column_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument("chain: no column named '" + name + "'");
  return column(static_cast<Eigen::Index>(it - names.begin()));
}

std::vector<std::string> ChainStore::location_columns() const {
  auto names = column_names();
  return {names.end() - names_.total(), names.end()};
}

std::vector<std::string> ChainStore::scale_columns() const {
  return {"sigma[2,1]", "sigma[3,1]", "sigma[3,2]", "sigma[3,3]"};
}

std::string ChainStore::to_csv() const {
  CsvTable table;
  table.header = column_names();
  table.rows.reserve(static_cast<std::size_t>(size()));
  for (Eigen::Index d = 0; d < size(); ++d) {
    std::vector<std::string> row;
    row.reserve(static_cast<std::size_t>(width()));
    for (Eigen::Index k = 0; k < width(); ++k) row.push_back(format_double(values_[d * width() + k]));
    table.rows.push_back(std::move(row));
  }
  return format_csv(table);
}

nlohmann::json ChainStore::metadata_json() const {
  nlohmann::json j;
  j["format"] = "tripart-chain/1";
  j["seed"] = metadata_.seed;
  j["iterations"] = metadata_.iterations;
  j["burn_in"] = metadata_.burn_in;
  j["thin"] = metadata_.thin;
  j["retained"] = size();
  j["step2"] = metadata_.step2;
  j["group_sizes"] = {metadata_.group_sizes[0], metadata_.group_sizes[1], metadata_.group_sizes[2]};
  j["spd_repairs"] = metadata_.spd_repairs;
  j["names"] = {{"access", names_.access}, {"use", names_.use}, {"quantity", names_.quantity}};
  j["prior"] = {{"theta0", to_vector(metadata_.prior.theta0)},
                {"Theta0", matrix_json(metadata_.prior.theta_cov)},
                {"R0", matrix_json(metadata_.prior.scale)},
                {"r0", metadata_.prior.dof}};
  j["column_spec"] = metadata_.column_spec;
  return j;
}

ChainStore ChainStore::from_text(const std::string& csv_text, const nlohmann::json& meta) {
  DesignNames names;
  ChainStore store;
  try {
    names.access = meta.at("names").at("access").get<std::vector<std::string>>();
    names.use = meta.at("names").at("use").get<std::vector<std::string>>();
    names.quantity = meta.at("names").at("quantity").get<std::vector<std::string>>();
    store = ChainStore(names);
    auto& m = store.metadata_;
    m.seed = meta.at("seed").get<std::uint64_t>();
    m.iterations = meta.at("iterations").get<int>();
    m.burn_in = meta.at("burn_in").get<int>();
    m.thin = meta.at("thin").get<int>();
    m.step2 = meta.value("step2", std::string{"accessed"});
    for (int g = 0; g < 3; ++g) m.group_sizes[g] = meta.at("group_sizes").at(g).get<std::size_t>();
    m.spd_repairs = meta.value("spd_repairs", std::size_t{0});
    const auto& prior = meta.at("prior");
    const auto theta0 = prior.at("theta0").get<std::vector<double>>();
    m.prior.theta0 = Eigen::Map<const Eigen::VectorXd>(theta0.data(),
                                                       static_cast<Eigen::Index>(theta0.size()));
    m.prior.theta_cov = matrix_from_json(prior.at("Theta0"));
    m.prior.scale = matrix_from_json(prior.at("R0"));
    m.prior.dof = prior.at("r0").get<double>();
    m.column_spec = meta.value("column_spec", nlohmann::json{});
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("chain metadata: ") + ex.what());
  }

  const CsvTable table = parse_csv(csv_text);
  if (table.header != store.column_names()) {
    throw IoError("chain csv header does not match the metadata's parameter names");
  }
  store.values_.reserve(table.rows.size() * static_cast<std::size_t>(store.width()));
  for (const auto& row : table.rows) {
    for (const auto& cell : row) store.values_.push_back(parse_double(cell, "chain value"));
  }
  if (meta.contains("retained") && meta.at("retained").get<Eigen::Index>() != store.size()) {
    throw IoError("chain csv row count does not match metadata 'retained'");
  }
  return store;
}

void ChainStore::save(const std::string& stem) const {
  write_file_atomic(stem + ".csv", to_csv());
  write_file_atomic(stem + ".json", metadata_json().dump(2) + "\n");
}

ChainStore ChainStore::load(const std::string& stem) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(stem + ".json"));
  } catch (const nlohmann::json::parse_error& ex) {
    throw IoError(std::string("chain metadata: ") + ex.what());
  }
  return from_text(read_text_file(stem + ".csv"), meta);
}

bool ChainStore::operator==(const ChainStore& other) const {
  return names_ == other.names_ && values_ == other.values_ &&
         metadata_json() == other.metadata_json();
}

}  // namespace tripart
