#include "tripart/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <thread>

#include "tripart/chain_store.hpp"
#include "tripart/csv.hpp"
#include "tripart/diagnostics.hpp"
#include "tripart/errors.hpp"
#include "tripart/io.hpp"
#include "tripart/pipeline.hpp"
#include "tripart/policy.hpp"
#include "tripart/synthetic.hpp"

namespace tripart::commands {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kPredictTag = 0x7072656469637400;
constexpr std::uint64_t kRevenueTag = 0x7265760000000000;

nlohmann::json read_json(const std::string& path, const std::string& what) {
  if (path.empty()) throw InvalidArgument(what + " path is required");
  const auto text = read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw SchemaError(what + " '" + path + "' is not valid JSON: " + e.what());
  }
}

std::string prepare_out(const std::string& out) {
  if (out.empty()) throw InvalidArgument("--out directory is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory '" + out + "': " + ec.message());
  return out;
}

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

std::string fixed(double v, int digits) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

nlohmann::json number_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

void write_table(const std::string& stem, const CsvTable& table, const nlohmann::json& json, Format format,
                 CommandResult& r) {
  if (format == Format::csv) {
    write_file_atomic(stem + ".csv", format_csv(table));
    r.written.push_back(stem + ".csv");
  } else {
    write_file_atomic(stem + ".json", json.dump(2) + "\n");
    r.written.push_back(stem + ".json");
  }
}

Eigen::VectorXd expand(const nlohmann::json& j, Eigen::Index dim, const char* what) {
  if (j.is_number()) return Eigen::VectorXd::Constant(dim, j.get<double>());
  const auto v = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(v.size()) != dim) {
    throw SchemaError(std::string("prior '") + what + "' must have " + std::to_string(dim) + " entries");
  }
  return Eigen::Map<const Eigen::VectorXd>(v.data(), dim);
}

PriorSpec load_prior(const std::string& path, Eigen::Index dim) {
  PriorSpec p = PriorSpec::noninformative(dim);
  if (path.empty()) return p;
  const auto j = read_json(path, "prior");
  try {
    if (j.contains("theta_mean")) p.theta0 = expand(j.at("theta_mean"), dim, "theta_mean");
    if (j.contains("theta_variance")) {
      p.theta_cov = expand(j.at("theta_variance"), dim, "theta_variance").asDiagonal();
    }
    if (j.contains("scale")) {
      const auto rows = j.at("scale").get<std::vector<std::vector<double>>>();
      if (rows.size() != 3) throw SchemaError("prior 'scale' must be 3x3");
      for (int r = 0; r < 3; ++r) {
        if (rows[static_cast<std::size_t>(r)].size() != 3) throw SchemaError("prior 'scale' must be 3x3");
        for (int c = 0; c < 3; ++c) p.scale(r, c) = rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
      }
    }
    p.dof = j.value("dof", p.dof);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("prior: ") + e.what());
  }
  p.validate(dim);
  return p;
}

struct ColumnSummary {
  std::string name;
  double mean, sd, lower, upper;
};

ColumnSummary summarize_column(const std::string& name, const std::vector<ChainStore>& chains) {
  std::vector<double> v;
  for (const auto& c : chains) {
    const auto col = c.column(name);
    v.insert(v.end(), col.data(), col.data() + col.size());
  }
  const auto n = static_cast<double>(v.size());
  double m = 0.0;
  for (double x : v) m += x;
  m /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double h = (n - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return {name, m, n > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0, q(0.025), q(0.975)};
}

struct NamedProfile {
  std::string name;
  std::map<std::string, std::string> cells;
};

std::vector<NamedProfile> parse_profiles(const nlohmann::json& j) {
  auto one = [](const nlohmann::json& p, std::size_t k) {
    NamedProfile out;
    out.name = p.value("name", "profile " + std::to_string(k + 1));
    const auto& cells = p.contains("cells") ? p.at("cells") : p;
    for (const auto& [key, v] : cells.items()) {
      if (key == "name" && !p.contains("cells")) continue;
      out.cells[key] = v.is_string() ? v.get<std::string>() : format_double(v.get<double>());
    }
    return out;
  };
  std::vector<NamedProfile> out;
  try {
    if (j.is_array()) {
      for (std::size_t k = 0; k < j.size(); ++k) out.push_back(one(j[k], k));
    } else if (j.contains("profiles")) {
      for (std::size_t k = 0; k < j.at("profiles").size(); ++k) out.push_back(one(j.at("profiles")[k], k));
    } else {
      out.push_back(one(j, 0));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("profile: ") + e.what());
  }
  return out;
}

nlohmann::json merged(const nlohmann::json& defaults, const nlohmann::json& item) {
  nlohmann::json s = defaults.is_object() ? defaults : nlohmann::json::object();
  for (const auto& [k, v] : item.items()) s[k] = v;
  return s;
}

std::vector<policy::Scenario> parse_scenarios(const nlohmann::json& j, const char* key,
                                              const nlohmann::json& defaults) {
  std::vector<policy::Scenario> out;
  if (j.is_array()) {
    for (const auto& s : j) out.push_back(policy::Scenario::from_json(merged(defaults, s)));
  } else if (j.contains(key)) {
    for (const auto& s : j.at(key)) out.push_back(policy::Scenario::from_json(merged(defaults, s)));
  } else {
    out.push_back(policy::Scenario::from_json(merged(defaults, j)));
  }
  return out;
}

policy::PredictOptions predict_options(const MonteCarloOptions& mc) {
  policy::PredictOptions p;
  p.simulations = mc.simulations;
  p.max_draws = mc.draws;
  p.threads = mc.threads;
  return p;
}

// One row per profile and scenario.
void scenario_table(const ChainStore& chain, const std::vector<NamedProfile>& profiles,
                    const std::vector<policy::Scenario>& scenarios, const MonteCarloOptions& mc,
                    CsvTable& table, nlohmann::json& json) {
  const auto builder = policy::design_for(chain);
  const auto options = predict_options(mc);
  const RandomStream root(mc.seed);
  table.header = {"profile",
                  "scenario",
                  "access",
                  "p_access",
                  "p_access_se",
                  "p_use",
                  "p_use_se",
                  "p_use_given_access",
                  "p_use_given_access_se",
                  "change_pp",
                  "change_pp_se",
                  "consumption",
                  "consumption_se",
                  "zero_probability",
                  "draws_skipped"};
  json = nlohmann::json::array();
  std::uint64_t row = 0;
  for (const auto& p : profiles) {
    for (const auto& s : scenarios) {
      const auto x = policy::covariates_for(p.cells, s, builder);
      const auto rng = root.substream(kPredictTag, row++);
      const auto e = policy::legalize_delta(x, chain, options, rng);
      const auto& r = s.access == policy::AccessRegime::legalized ? e.legalized : e.observed;
      // Change relative to the observed regime (zero when the scenario keeps it).
      const double change = s.access == policy::AccessRegime::legalized ? e.delta_pp.mean : 0.0;
      const double change_se = s.access == policy::AccessRegime::legalized ? e.delta_pp.mc_se : 0.0;
      table.add_row({p.name, s.name, s.access == policy::AccessRegime::legalized ? "legalized" : "observed",
                     fixed(100.0 * r.p_access.mean, 2), fixed(100.0 * r.p_access.mc_se, 2),
                     fixed(100.0 * r.p_use.mean, 2), fixed(100.0 * r.p_use.mc_se, 2),
                     fixed(100.0 * r.p_use_given_access.mean, 2), fixed(100.0 * r.p_use_given_access.mc_se, 2),
                     fixed(change, 2), fixed(change_se, 2), fixed(r.consumption.mean, 2),
                     fixed(r.consumption.mc_se, 2), r.zero_probability ? "1" : "0",
                     std::to_string(r.draws_skipped)});
      auto jr = r.to_json();
      jr["profile"] = p.name;
      jr["scenario"] = s.to_json();
      jr["change_pp"] = {{"mean", number_or_null(change)}, {"mc_se", number_or_null(change_se)}};
      json.push_back(std::move(jr));
    }
  }
}

}  // namespace

Format parse_format(const std::string& s) {
  if (s == "csv") return Format::csv;
  if (s == "json") return Format::json;
  throw InvalidArgument("format must be csv or json, got '" + s + "'");
}

// ---------------------------------------------------------------------------

CommandResult cmd_impute(const ImputeOptions& o) {
  const auto config = pipeline::PipelineConfig::from_json(read_json(o.config, "pipeline config"));
  const auto raw = read_csv(o.input);
  const auto out = pipeline::prepare_survey(raw, config);
  const auto dir = prepare_out(o.out);

  CsvTable prepared;
  prepared.header = out.table.header;
  const auto excluded = *out.table.column("audit_excluded");
  for (const auto& row : out.table.rows) {
    if (row[excluded] == "0") prepared.add_row(row);
  }
  CommandResult r;
  write_file_atomic(join(dir, "prepared.csv"), format_csv(prepared));
  write_file_atomic(join(dir, "audit.csv"), format_csv(out.table));
  nlohmann::json summary = out.summary.to_json();
  summary["config"] = config.to_json();
  write_file_atomic(join(dir, "impute_summary.json"), summary.dump(2) + "\n");
  r.written = {join(dir, "prepared.csv"), join(dir, "audit.csv"), join(dir, "impute_summary.json")};
  std::ostringstream rep;
  rep << out.summary.rows << " rows, " << prepared.rows.size() << " model-ready, " << out.summary.excluded
      << " excluded, " << out.summary.split << " variety splits\n";
  r.report = rep.str();
  return r;
}

CommandResult cmd_fit(const FitOptions& o) {
  if (o.chains < 1) throw InvalidArgument("--chains must be at least 1");
  o.sampler.validate();
  const auto spec = ColumnSpec::from_json(read_json(o.columns, "column spec"));
  const auto table = read_csv(o.input);
  const auto built = build_dataset(table, spec);
  const auto prior = load_prior(o.prior, built.dataset.names().total());
  const auto dir = prepare_out(o.out);

  std::vector<ChainStore> chains(static_cast<std::size_t>(o.chains));
  std::vector<std::exception_ptr> errors(chains.size());
  std::vector<std::thread> workers;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t k = 0; k < chains.size(); ++k) {
    workers.emplace_back([&, k] {
      try {
        SamplerConfig cfg = o.sampler;
        cfg.seed = o.sampler.seed + k;
        chains[k] = run_chain(built.dataset, prior, cfg);
        chains[k].metadata().column_spec = built.spec.to_json();
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  CommandResult r;
  for (std::size_t k = 0; k < chains.size(); ++k) {
    const auto stem = join(dir, "chain_" + std::to_string(k + 1));
    chains[k].save(stem);
    r.written.push_back(stem + ".csv");
    r.written.push_back(stem + ".json");
  }

  CsvTable summary;
  summary.header = {"parameter", "mean", "sd", "lower_95", "upper_95"};
  nlohmann::json js = nlohmann::json::array();
  auto names = chains.front().location_columns();
  const auto scale = chains.front().scale_columns();
  names.insert(names.end(), scale.begin(), scale.end());
  std::ostringstream rep;
  char line[256];
  std::snprintf(line, sizeof line, "%-32s %10s %10s %10s %10s\n", "parameter", "mean", "sd", "2.5%", "97.5%");
  rep << line;
  for (const auto& name : names) {
    const auto s = summarize_column(name, chains);
    summary.add_row({s.name, format_double(s.mean), format_double(s.sd), format_double(s.lower),
                     format_double(s.upper)});
    js.push_back({{"parameter", s.name}, {"mean", s.mean}, {"sd", s.sd}, {"lower_95", s.lower}, {"upper_95", s.upper}});
    std::snprintf(line, sizeof line, "%-32s %10.3f %10.3f %10.3f %10.3f\n", s.name.c_str(), s.mean, s.sd,
                  s.lower, s.upper);
    rep << line;
  }
  write_table(join(dir, "fit_summary"), summary, js, o.format, r);
  const auto& meta = chains.front().metadata();
  rep << "groups: G1=" << meta.group_sizes[0] << " G2=" << meta.group_sizes[1] << " G3=" << meta.group_sizes[2]
      << "; rows with use but no access recoded: " << built.report.forced_access << "\n";
  std::snprintf(line, sizeof line, "%d chain(s), %lld retained draws each, %.2f s\n", o.chains,
                static_cast<long long>(chains.front().size()), wall);
  rep << line;
  r.report = rep.str();
  return r;
}

CommandResult cmd_diagnose(const DiagnoseOptions& o) {
  if (o.chains.empty()) throw InvalidArgument("at least one chain is required");
  const auto dir = prepare_out(o.out);
  std::ostringstream text;
  nlohmann::json js = nlohmann::json::array();
  CsvTable table;
  table.header = {"chain", "parameter", "kind", "mean", "sd", "ess", "geweke_z", "geweke_pass",
                  "hw_stationary", "hw_start", "hw_pvalue", "hw_halfwidth_ratio", "hw_halfwidth_pass",
                  "rl_burn_in", "rl_total", "rl_lower_bound", "rl_thin", "rl_dependence_factor"};
  for (const auto& stem : o.chains) {
    auto path = stem;
    for (const char* ext : {".csv", ".json"}) {
      if (path.size() > std::string(ext).size() && path.ends_with(ext)) path.resize(path.size() - std::string(ext).size());
    }
    const auto chain = ChainStore::load(path);
    const auto report = diag::diagnose_chain(chain);
    text << "== " << stem << " (" << chain.size() << " draws)\n" << report.to_text();
    auto j = report.to_json();
    j["chain"] = stem;
    js.push_back(std::move(j));
    for (const auto& p : report.parameters) {
      const auto& hw = p.heidelberger_welch;
      const auto& rl = p.raftery_lewis;
      const bool rla = p.raftery_lewis_available;
      table.add_row({stem, p.name, p.location ? "location" : "scale", format_double(p.mean), format_double(p.sd),
                     format_double(p.ess), format_double(p.geweke.z), p.geweke.pass ? "1" : "0",
                     hw.stationary ? "1" : "0", std::to_string(hw.start), format_double(hw.cvm_pvalue),
                     std::isfinite(hw.halfwidth_ratio) ? format_double(hw.halfwidth_ratio) : "",
                     hw.halfwidth_pass ? "1" : "0", rla ? std::to_string(rl.burn_in) : "",
                     rla ? std::to_string(rl.total) : "", rla ? std::to_string(rl.lower_bound) : "",
                     rla ? std::to_string(rl.thin) : "", rla ? format_double(rl.dependence_factor) : ""});
    }
  }
  CommandResult r;
  write_file_atomic(join(dir, "diagnostics.txt"), text.str());
  r.written.push_back(join(dir, "diagnostics.txt"));
  write_table(join(dir, "diagnostics"), table, js, o.format, r);
  r.report = text.str();
  return r;
}

CommandResult cmd_simulate(const SimulateOptions& o) {
  auto spec = synthetic::GeneratorSpec::from_json(read_json(o.spec, "generator spec"));
  if (o.seed) spec.seed = *o.seed;
  std::optional<CsvTable> covariates;
  if (!o.covariates.empty()) covariates = read_csv(o.covariates);
  const auto data = synthetic::generate(spec, covariates ? &*covariates : nullptr);
  const auto dir = prepare_out(o.out);
  write_file_atomic(join(dir, "data.csv"), format_csv(data.table));
  write_file_atomic(join(dir, "columns.json"), data.column_spec.to_json().dump(2) + "\n");
  write_file_atomic(join(dir, "truth.json"), data.truth.dump(2) + "\n");
  CommandResult r;
  r.written = {join(dir, "data.csv"), join(dir, "columns.json"), join(dir, "truth.json")};
  r.report = std::to_string(spec.n) + " records: G1=" + std::to_string(data.group_sizes[0]) +
             " G2=" + std::to_string(data.group_sizes[1]) + " G3=" + std::to_string(data.group_sizes[2]) + "\n";
  return r;
}

CommandResult cmd_predict(const PredictOptions& o) {
  const auto chain = ChainStore::load(o.chain);
  const auto profiles = parse_profiles(read_json(o.profile, "profile"));
  std::vector<policy::Scenario> scenarios;
  if (o.scenario.empty()) {
    scenarios.push_back(policy::Scenario{});
  } else {
    scenarios = parse_scenarios(read_json(o.scenario, "scenario"), "scenarios", nlohmann::json::object());
  }
  const auto dir = prepare_out(o.out);
  CsvTable table;
  nlohmann::json js;
  scenario_table(chain, profiles, scenarios, o.mc, table, js);
  CommandResult r;
  write_table(join(dir, "predictions"), table, js, o.format, r);
  r.report = format_csv(table);
  return r;
}

CommandResult cmd_policy(const PolicyOptions& o) {
  const auto chain = ChainStore::load(o.chain);
  const auto grid = read_json(o.grid, "scenario grid");
  const nlohmann::json defaults = grid.value("defaults", nlohmann::json::object());
  std::vector<policy::Scenario> tax;
  if (grid.contains("tax_scenarios")) {
    for (const auto& s : grid.at("tax_scenarios")) {
      auto j = merged(defaults, s);
      j["access"] = "legalized";
      tax.push_back(policy::Scenario::from_json(j));
    }
  } else {
    const std::pair<const char*, double> table4[] = {
        {"cigarette tax", 7.3}, {"cigarette price", 11.5}, {"50% price decrease", 39.1}, {"25% price increase", 97.8}};
    for (const auto& [name, price] : table4) {
      auto j = merged(defaults, {{"name", name}, {"price", price}});
      j["access"] = "legalized";
      tax.push_back(policy::Scenario::from_json(j));
    }
  }
  const auto dir = prepare_out(o.out);
  CommandResult r;
  std::ostringstream rep;

  if (!tax.empty()) {
    if (o.population.empty()) throw InvalidArgument("--population is required for tax scenarios");
    const auto members = policy::read_population(read_csv(o.population), grid.value("weight", std::string("weight")));
    const auto options = predict_options(o.mc);
    const RandomStream root(o.mc.seed);
    CsvTable table;
    table.header = {"scenario", "price", "tax_per_gram", "revenue_musd", "revenue_sd_musd",
                    "revenue_mc_se_musd", "users", "joints_per_user_month"};
    nlohmann::json js = nlohmann::json::array();
    rep << "scenario                      price   tax/gram  revenue (M USD)\n";
    for (std::size_t k = 0; k < tax.size(); ++k) {
      const auto res = policy::tax_revenue(members, chain, tax[k], options, root.substream(kRevenueTag, k));
      table.add_row({tax[k].name, fixed(res.price, 1), fixed(res.tax_per_gram, 1),
                     fixed(res.revenue_usd.mean / 1e6, 1), fixed(res.revenue_usd.sd / 1e6, 1),
                     fixed(res.revenue_usd.mc_se / 1e6, 2), fixed(res.users, 0),
                     fixed(res.consumption_per_user, 1)});
      auto j = res.to_json();
      j["scenario"] = tax[k].to_json();
      js.push_back(std::move(j));
      char line[160];
      std::snprintf(line, sizeof line, "%-28s %7.1f %10.1f %16.1f\n", tax[k].name.c_str(), res.price,
                    res.tax_per_gram, res.revenue_usd.mean / 1e6);
      rep << line;
    }
    write_table(join(dir, "tax_revenue"), table, js, o.format, r);
  }

  if (grid.contains("profiles")) {
    const auto profiles = parse_profiles(grid);
    const auto scenarios = grid.contains("scenarios")
                               ? parse_scenarios(grid, "scenarios", defaults)
                               : std::vector<policy::Scenario>{policy::Scenario::from_json(merged(defaults, {{"access", "legalized"}}))};
    CsvTable table;
    nlohmann::json js;
    scenario_table(chain, profiles, scenarios, o.mc, table, js);
    write_table(join(dir, "scenarios"), table, js, o.format, r);
    rep << format_csv(table);
  }
  r.report = rep.str();
  return r;
}

}  // namespace tripart::commands
