#include "tripart/synthetic.hpp"

#include <cmath>

#include "tripart/distributions.hpp"
#include "tripart/errors.hpp"
#include "tripart/io.hpp"
#include "tripart/random.hpp"

namespace tripart::synthetic {

namespace {

std::vector<std::string> default_names(const char* prefix, Eigen::Index regressors) {
  std::vector<std::string> out;
  for (Eigen::Index k = 1; k <= regressors; ++k) out.push_back(prefix + std::to_string(k));
  return out;
}

Eigen::VectorXd vector_from(const nlohmann::json& j, const char* what) {
  const auto v = j.get<std::vector<double>>();
  if (v.empty()) throw SchemaError(std::string("generator spec: '") + what + "' must be non-empty");
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

GeneratorSpec GeneratorSpec::recovery_design(std::uint64_t seed, std::size_t n) {
  GeneratorSpec s;
  s.n = n;
  s.seed = seed;
  s.theta.access = (Eigen::VectorXd(4) << 0.5, 0.8, -0.5, 0.3).finished();
  s.theta.use = (Eigen::VectorXd(4) << 0.2, -0.6, 0.7, 0.4).finished();
  s.theta.quantity = (Eigen::VectorXd(4) << 1.0, 0.5, -0.4, 0.3).finished();
  s.sigma << 1.0, 0.6, 0.4, 0.6, 1.0, 0.7, 0.4, 0.7, 1.0;
  return s;
}

const std::vector<std::string>& GeneratorSpec::column_names(Equation e) const {
  return columns[static_cast<int>(e)];
}

void GeneratorSpec::validate() const {
  if (n == 0) throw InvalidArgument("generator spec: n must be positive");
  for (auto e : {Equation::access, Equation::use, Equation::quantity}) {
    const auto& t = theta[e];
    if (t.size() < 1 || !t.allFinite()) {
      throw InvalidArgument("generator spec: every coefficient vector needs a finite intercept");
    }
    const auto& names = columns[static_cast<int>(e)];
    if (!names.empty() && static_cast<Eigen::Index>(names.size()) != t.size() - 1) {
      throw InvalidArgument("generator spec: column names do not match coefficient count");
    }
  }
  if (!sigma.allFinite() || !is_spd(sigma) || (sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    throw InvalidArgument("generator spec: sigma must be symmetric positive definite");
  }
  if (std::abs(sigma(0, 0) - 1.0) > 1e-12 || std::abs(sigma(1, 1) - 1.0) > 1e-12) {
    throw InvalidArgument("generator spec: sigma must have unit access and use variances");
  }
}

GeneratorSpec GeneratorSpec::from_json(const nlohmann::json& j) {
  GeneratorSpec s;
  try {
    s.n = j.value("n", s.n);
    s.seed = j.value("seed", s.seed);
    const auto& t = j.at("theta");
    s.theta.access = vector_from(t.at("access"), "theta.access");
    s.theta.use = vector_from(t.at("use"), "theta.use");
    s.theta.quantity = vector_from(t.at("quantity"), "theta.quantity");
    if (j.contains("sigma")) {
      const auto rows = j.at("sigma").get<std::vector<std::vector<double>>>();
      if (rows.size() != 3) throw SchemaError("generator spec: sigma must be 3x3");
      for (int r = 0; r < 3; ++r) {
        if (rows[static_cast<std::size_t>(r)].size() != 3) throw SchemaError("generator spec: sigma must be 3x3");
        for (int c = 0; c < 3; ++c) s.sigma(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      }
    }
    if (j.contains("columns")) {
      const auto& c = j.at("columns");
      s.columns[0] = c.value("access", std::vector<std::string>{});
      s.columns[1] = c.value("use", std::vector<std::string>{});
      s.columns[2] = c.value("quantity", std::vector<std::string>{});
    }
    s.log_columns = j.value("log_columns", s.log_columns);
    s.roles = j.value("roles", s.roles);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("generator spec: ") + e.what());
  }
  if (s.columns[0].empty()) s.columns[0] = default_names("xa", s.theta.access.size() - 1);
  if (s.columns[1].empty()) s.columns[1] = default_names("xc", s.theta.use.size() - 1);
  if (s.columns[2].empty()) s.columns[2] = default_names("xy", s.theta.quantity.size() - 1);
  s.validate();
  return s;
}

nlohmann::json GeneratorSpec::to_json() const {
  nlohmann::json sig = nlohmann::json::array();
  for (int r = 0; r < 3; ++r) sig.push_back({sigma(r, 0), sigma(r, 1), sigma(r, 2)});
  return {{"n", n},
          {"seed", seed},
          {"theta",
           {{"access", vector_json(theta.access)},
            {"use", vector_json(theta.use)},
            {"quantity", vector_json(theta.quantity)}}},
          {"sigma", sig},
          {"columns", {{"access", columns[0]}, {"use", columns[1]}, {"quantity", columns[2]}}},
          {"log_columns", log_columns},
          {"roles", roles}};
}

SyntheticData generate(const GeneratorSpec& raw, const CsvTable* covariates) {
  GeneratorSpec spec = raw;
  if (spec.columns[0].empty()) spec.columns[0] = default_names("xa", spec.theta.access.size() - 1);
  if (spec.columns[1].empty()) spec.columns[1] = default_names("xc", spec.theta.use.size() - 1);
  if (spec.columns[2].empty()) spec.columns[2] = default_names("xy", spec.theta.quantity.size() - 1);
  spec.validate();
  if (covariates && covariates->rows.size() < spec.n) {
    throw InvalidArgument("covariate table has fewer rows than n");
  }

  // Distinct raw columns in first-appearance order; a column shared by
  // several equations is drawn once.
  std::vector<std::string> raw_columns;
  std::vector<std::array<bool, 3>> used;
  for (int e = 0; e < 3; ++e) {
    for (const auto& name : spec.columns[static_cast<std::size_t>(e)]) {
      auto it = std::find(raw_columns.begin(), raw_columns.end(), name);
      if (it == raw_columns.end()) {
        raw_columns.push_back(name);
        used.push_back({false, false, false});
        it = raw_columns.end() - 1;
      }
      used[static_cast<std::size_t>(it - raw_columns.begin())][static_cast<std::size_t>(e)] = true;
    }
  }
  for (int e = 0; e < 3; ++e) {
    // The design builder orders columns by regressor list, so each equation's
    // names must follow that order for the coefficients to line up.
    std::vector<std::string> expected;
    for (std::size_t k = 0; k < raw_columns.size(); ++k) {
      if (used[k][static_cast<std::size_t>(e)]) expected.push_back(raw_columns[k]);
    }
    if (expected != spec.columns[static_cast<std::size_t>(e)]) {
      throw InvalidArgument("generator spec: shared columns must appear in the same relative order in every equation");
    }
  }
  std::vector<bool> is_log(raw_columns.size(), false);
  for (const auto& name : spec.log_columns) {
    const auto it = std::find(raw_columns.begin(), raw_columns.end(), name);
    if (it == raw_columns.end()) throw InvalidArgument("generator spec: log column '" + name + "' is not a regressor");
    is_log[static_cast<std::size_t>(it - raw_columns.begin())] = true;
  }
  std::vector<std::size_t> cov_index;
  if (covariates) {
    for (const auto& name : raw_columns) cov_index.push_back(covariates->require_column(name));
  }

  SyntheticData out;
  ColumnSpec& cs = out.column_spec;
  cs.id = "id";
  cs.access = "A";
  cs.use = "C";
  cs.quantity = "Y";
  cs.weight = "weight";
  cs.intercept = true;
  cs.roles = spec.roles;
  for (std::size_t k = 0; k < raw_columns.size(); ++k) {
    RegressorSpec r;
    r.column = raw_columns[k];
    r.equations = used[k];
    if (is_log[k]) r.transform = "log";
    cs.regressors.push_back(r);
  }
  out.table.header = {"id", "A", "C", "Y", "weight"};
  out.table.header.insert(out.table.header.end(), raw_columns.begin(), raw_columns.end());
  out.latent.resize(static_cast<Eigen::Index>(spec.n), 3);

  const Eigen::Matrix3d chol = spec.sigma.llt().matrixL();
  const RandomStream root(spec.seed);
  for (std::size_t i = 0; i < spec.n; ++i) {
    auto rng = root.substream(static_cast<std::uint64_t>(i));
    // Raw cell values, and their design-scale counterparts.
    std::vector<double> values(raw_columns.size());
    std::vector<double> design(raw_columns.size());
    for (std::size_t k = 0; k < raw_columns.size(); ++k) {
      if (covariates) {
        values[k] = parse_double(covariates->rows[i][cov_index[k]], raw_columns[k]);
        if (is_log[k] && !(values[k] > 0.0)) {
          throw DataIntegrityError("log column '" + raw_columns[k] + "' must be positive");
        }
        design[k] = is_log[k] ? std::log(values[k]) : values[k];
      } else {
        design[k] = dist::standard_normal(rng);
        values[k] = is_log[k] ? std::exp(design[k]) : design[k];
      }
    }
    std::array<Eigen::VectorXd, 3> x;
    for (int e = 0; e < 3; ++e) {
      std::vector<double> col{1.0};
      for (std::size_t k = 0; k < raw_columns.size(); ++k) {
        if (used[k][static_cast<std::size_t>(e)]) col.push_back(design[k]);
      }
      x[static_cast<std::size_t>(e)] =
          Eigen::Map<const Eigen::VectorXd>(col.data(), static_cast<Eigen::Index>(col.size()));
    }
    Eigen::Vector3d z;
    for (int k = 0; k < 3; ++k) z[k] = dist::standard_normal(rng);
    const Eigen::Vector3d err = chol * z;
    const double ua = x[0].dot(spec.theta.access) + err[0];
    const double uc = x[1].dot(spec.theta.use) + err[1];
    const double y = x[2].dot(spec.theta.quantity) + err[2];
    const auto row = static_cast<Eigen::Index>(i);
    out.latent.row(row) << ua, uc, y;

    ObservationRecord rec;
    rec.id = static_cast<std::int64_t>(i + 1);
    rec.access = ua > 0.0;
    if (rec.access) rec.use = uc > 0.0;
    if (rec.use.value_or(false)) rec.log_quantity = y;
    rec.x_access = x[0];
    rec.x_use = x[1];
    rec.x_quantity = x[2];
    const int group = !rec.access ? 0 : (!*rec.use ? 1 : 2);
    ++out.group_sizes[static_cast<std::size_t>(group)];

    std::vector<std::string> cells{std::to_string(rec.id), rec.access ? "1" : "0",
                                   rec.use ? (*rec.use ? "1" : "0") : "",
                                   rec.log_quantity ? format_double(*rec.log_quantity) : "", "1"};
    for (double v : values) cells.push_back(format_double(v));
    out.table.add_row(std::move(cells));
    out.records.push_back(std::move(rec));
  }

  out.truth = spec.to_json();
  out.truth["group_sizes"] = {{"g1", out.group_sizes[0]}, {"g2", out.group_sizes[1]}, {"g3", out.group_sizes[2]}};
  return out;
}

}  // namespace tripart::synthetic
