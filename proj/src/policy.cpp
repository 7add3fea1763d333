#include "tripart/policy.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "tripart/distributions.hpp"
#include "tripart/errors.hpp"
#include "tripart/io.hpp"

namespace tripart::policy {

namespace {

constexpr double kZeroProbability = 5e-5;

/// Neumaier compensated sum.
struct CompensatedSum {
  double sum = 0.0;
  double carry = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v)) {
      carry += (sum - t) + v;
    } else {
      carry += (v - t) + sum;
    }
    sum = t;
  }
  double value() const { return sum + carry; }
};

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < n; i += threads) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

Eigen::Index draws_to_use(const ChainStore& chain, const PredictOptions& options) {
  if (chain.empty()) throw InvalidArgument("chain has no draws");
  if (options.simulations < 1) throw InvalidArgument("simulations must be positive");
  const Eigen::Index d = chain.size();
  return options.max_draws > 0 ? std::min(d, options.max_draws) : d;
}

void check_covariates(const Covariates& x, const ChainStore& chain) {
  const auto& names = chain.names();
  for (auto e : {Equation::access, Equation::use, Equation::quantity}) {
    if (x[static_cast<int>(e)].size() != static_cast<Eigen::Index>(names[e].size())) {
      throw InvalidArgument("covariate vector length does not match the fitted design");
    }
  }
}

// Per-draw estimates together with their inner Monte-Carlo standard errors.
struct DrawEstimate {
  bool valid = false;
  double value = 0.0;
  double se = 0.0;
};

Summary summarize(const std::vector<DrawEstimate>& draws) {
  Summary s;
  std::size_t n = 0;
  double inner = 0.0;
  for (const auto& d : draws) {
    if (!d.valid) continue;
    ++n;
    s.mean += d.value;
    inner += d.se * d.se;
  }
  if (n == 0) return {std::nan(""), std::nan(""), std::nan("")};
  s.mean /= static_cast<double>(n);
  double ss = 0.0;
  for (const auto& d : draws) {
    if (d.valid) ss += (d.value - s.mean) * (d.value - s.mean);
  }
  const auto nd = static_cast<double>(n);
  s.sd = n > 1 ? std::sqrt(ss / (nd - 1.0)) : 0.0;
  s.mc_se = std::sqrt(s.sd * s.sd / nd + inner / (nd * nd));
  return s;
}

struct SelectionGeometry {
  double access_sd;
  double slope;
  double use_sd;
};

std::optional<SelectionGeometry> geometry(const Eigen::Matrix3d& sigma) {
  const double s_aa = sigma(0, 0);
  const double s_ac = sigma(1, 0);
  const double v = sigma(1, 1) - s_ac * s_ac / s_aa;
  if (!(s_aa > 0.0) || !(v > 0.0)) return std::nullopt;
  return SelectionGeometry{std::sqrt(s_aa), s_ac / s_aa, std::sqrt(v)};
}

// Exact draw of (access, use) utilities given both positive, by rejection on
// the use probability.
std::pair<double, double> draw_selected(double mu_a, double mu_c, const SelectionGeometry& g,
                                        RandomStream& rng) {
  for (int tries = 0; tries < 1'000'000; ++tries) {
    const double ua = dist::sample_truncated_normal(mu_a, g.access_sd * g.access_sd,
                                                    dist::TruncationInterval::positive(), rng);
    const double cond = mu_c + g.slope * (ua - mu_a);
    if (rng.uniform() < dist::normal_cdf(cond / g.use_sd)) {
      const double uc = dist::sample_truncated_normal(cond, g.use_sd * g.use_sd,
                                                      dist::TruncationInterval::positive(), rng);
      return {ua, uc};
    }
  }
  throw NumericalFailure("use probability too small to simulate a user");
}

}  // namespace

// ---------------------------------------------------------------------------

double Scenario::tax_per_gram() const {
  if (tax) return *tax;
  return price ? *price - cost : 0.0;
}

void Scenario::validate() const {
  if (price && !(std::isfinite(*price) && *price > 0.0)) {
    throw InvalidArgument("scenario '" + name + "': price must be positive");
  }
  if (!(std::isfinite(cost) && cost > 0.0)) throw InvalidArgument("scenario '" + name + "': cost must be positive");
  if (!(black_market >= 0.0 && black_market < 1.0)) {
    throw InvalidArgument("scenario '" + name + "': black-market share must be in [0, 1)");
  }
  if (!(units_per_usd > 0.0) || !(exchange_rate > 0.0)) {
    throw InvalidArgument("scenario '" + name + "': currency factors must be positive");
  }
  if (tax && price && std::abs(*price - cost - *tax) > 1e-9 * std::max(1.0, *price)) {
    throw InvalidArgument("scenario '" + name + "': price must equal cost + tax");
  }
  if (!(tax_per_gram() >= 0.0)) {
    throw InvalidArgument("scenario '" + name + "': tax per gram is negative (price below cost)");
  }
}

Scenario Scenario::tax_scenario(std::string name, double price, double cost) {
  Scenario s;
  s.name = std::move(name);
  s.access = AccessRegime::legalized;
  s.price = price;
  s.cost = cost;
  s.validate();
  return s;
}

Scenario Scenario::from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    s.name = j.value("name", s.name);
    const auto access = j.value("access", std::string("observed"));
    if (access == "observed") {
      s.access = AccessRegime::observed;
    } else if (access == "legalized") {
      s.access = AccessRegime::legalized;
    } else {
      throw SchemaError("scenario access must be 'observed' or 'legalized'");
    }
    if (j.contains("price") && !j.at("price").is_null()) s.price = j.at("price").get<double>();
    if (j.contains("risk") && !j.at("risk").is_null()) s.risk = j.at("risk").get<std::string>();
    if (j.contains("overrides")) {
      for (const auto& [k, v] : j.at("overrides").items()) {
        s.overrides[k] = v.is_string() ? v.get<std::string>() : format_double(v.get<double>());
      }
    }
    s.cost = j.value("cost", s.cost);
    if (j.contains("tax") && !j.at("tax").is_null()) s.tax = j.at("tax").get<double>();
    s.black_market = j.value("black_market", s.black_market);
    s.units_per_usd = j.value("units_per_usd", s.units_per_usd);
    s.exchange_rate = j.value("exchange_rate", s.exchange_rate);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("scenario: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json Scenario::to_json() const {
  nlohmann::json j{{"name", name},
                   {"access", access == AccessRegime::legalized ? "legalized" : "observed"},
                   {"cost", cost},
                   {"tax", tax_per_gram()},
                   {"black_market", black_market},
                   {"units_per_usd", units_per_usd},
                   {"exchange_rate", exchange_rate}};
  j["price"] = price ? nlohmann::json(*price) : nlohmann::json(nullptr);
  j["risk"] = risk ? nlohmann::json(*risk) : nlohmann::json(nullptr);
  if (!overrides.empty()) j["overrides"] = overrides;
  return j;
}

nlohmann::json PredictiveResult::to_json() const {
  auto sj = [](const Summary& s) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    return nlohmann::json{{"mean", num(s.mean)}, {"sd", num(s.sd)}, {"mc_se", num(s.mc_se)}};
  };
  return {{"p_access", sj(p_access)},
          {"p_use", sj(p_use)},
          {"p_use_given_access", sj(p_use_given_access)},
          {"consumption", sj(consumption)},
          {"draws_used", draws_used},
          {"draws_skipped", draws_skipped},
          {"zero_probability", zero_probability}};
}

nlohmann::json RevenueResult::to_json() const {
  return {{"price", price},
          {"tax_per_gram", tax_per_gram},
          {"revenue_usd", {{"mean", revenue_usd.mean}, {"sd", revenue_usd.sd}, {"mc_se", revenue_usd.mc_se}}},
          {"revenue_local", revenue_local},
          {"users", users},
          {"consumption_per_user", consumption_per_user},
          {"draws_used", draws_used}};
}

// ---------------------------------------------------------------------------

ConditionalMoments quantity_given_selection(const Eigen::Matrix3d& sigma, double mean_quantity,
                                            double access_residual, double use_residual) {
  const double s_aa = sigma(0, 0);
  const double s_ac = sigma(1, 0);
  const double s_cc = sigma(1, 1);
  const double s_ya = sigma(2, 0);
  const double s_yc = sigma(2, 1);
  const double det = s_aa * s_cc - s_ac * s_ac;
  if (!(det > 0.0)) throw NumericalFailure("selection block of sigma is not positive definite");
  // b' S^{-1} with S^{-1} = [s_cc, -s_ac; -s_ac, s_aa] / det.
  const double wa = (s_ya * s_cc - s_yc * s_ac) / det;
  const double wc = (s_yc * s_aa - s_ya * s_ac) / det;
  ConditionalMoments m;
  m.mean = mean_quantity + wa * access_residual + wc * use_residual;
  m.variance = sigma(2, 2) - (wa * s_ya + wc * s_yc);
  return m;
}

UseProbability use_given_access(double access_index, double use_index, const Eigen::Matrix3d& sigma,
                                int simulations, RandomStream& rng) {
  const auto g = geometry(sigma);
  if (!g) throw NumericalFailure("access-use correlation outside (-1, 1)");
  double sum = 0.0;
  double sq = 0.0;
  for (int m = 0; m < simulations; ++m) {
    const double ua = dist::sample_truncated_normal(access_index, g->access_sd * g->access_sd,
                                                    dist::TruncationInterval::positive(), rng);
    const double p = dist::normal_cdf((use_index + g->slope * (ua - access_index)) / g->use_sd);
    sum += p;
    sq += p * p;
  }
  const double n = simulations;
  const double mean = sum / n;
  const double var = n > 1 ? std::max(0.0, (sq - n * mean * mean) / (n - 1.0)) : 0.0;
  return {mean, std::sqrt(var / n)};
}

namespace {

struct DrawPrediction {
  DrawEstimate access, use, use_given_access, consumption;
};

DrawPrediction predict_draw(const Covariates& x, const LocationParams& beta,
                            const Eigen::Matrix3d& sigma, AccessRegime regime, int simulations,
                            RandomStream& rng) {
  DrawPrediction out;
  const auto g = geometry(sigma);
  if (!g) return out;
  const double mu_a = x[0].dot(beta.access);
  const double mu_c = x[1].dot(beta.use);
  const double mu_y = x[2].dot(beta.quantity);
  const double p_access =
      regime == AccessRegime::legalized ? 1.0 : dist::normal_cdf(mu_a / g->access_sd);

  double sum_p = 0.0;
  double sum_p2 = 0.0;
  double sum_w = 0.0;
  double sum_wq = 0.0;
  std::vector<std::pair<double, double>> weighted;  // (weight, quantity)
  weighted.reserve(static_cast<std::size_t>(simulations));
  for (int m = 0; m < simulations; ++m) {
    const double ua = dist::sample_truncated_normal(mu_a, g->access_sd * g->access_sd,
                                                    dist::TruncationInterval::positive(), rng);
    const double cond = mu_c + g->slope * (ua - mu_a);
    const double p = dist::normal_cdf(cond / g->use_sd);
    sum_p += p;
    sum_p2 += p * p;
    // The use utility conditioned on being positive; weighting by p turns the
    // access draw into one from the access-and-use conditional.
    double uc = 0.0;
    try {
      uc = dist::sample_truncated_normal(cond, g->use_sd * g->use_sd,
                                         dist::TruncationInterval::positive(), rng);
    } catch (const DegenerateTailError&) {
      continue;
    }
    const auto mom = quantity_given_selection(sigma, mu_y, ua - mu_a, uc - mu_c);
    const double y = mom.mean + std::sqrt(std::max(0.0, mom.variance)) * dist::standard_normal(rng);
    const double q = std::exp(y);
    sum_w += p;
    sum_wq += p * q;
    weighted.emplace_back(p, q);
  }
  const double n = simulations;
  const double p_mean = sum_p / n;
  const double p_var = n > 1 ? std::max(0.0, (sum_p2 - n * p_mean * p_mean) / (n - 1.0)) : 0.0;
  const double p_se = std::sqrt(p_var / n);

  out.access = {true, p_access, 0.0};
  out.use_given_access = {true, p_mean, p_se};
  out.use = {true, p_access * p_mean, p_access * p_se};
  if (sum_w > 0.0) {
    const double cons = sum_wq / sum_w;
    double num = 0.0;
    for (const auto& [w, q] : weighted) num += w * w * (q - cons) * (q - cons);
    out.consumption = {true, cons, std::sqrt(num) / sum_w};
  }
  return out;
}

}  // namespace

PredictiveResult predict_individual(const Covariates& x, const ChainStore& chain,
                                    AccessRegime regime, const PredictOptions& options,
                                    const RandomStream& rng) {
  const Eigen::Index draws = draws_to_use(chain, options);
  check_covariates(x, chain);
  std::vector<DrawPrediction> per(static_cast<std::size_t>(draws));
  parallel_for(per.size(), options.threads, [&](std::size_t d) {
    auto stream = rng.substream(static_cast<std::uint64_t>(d));
    const auto idx = static_cast<Eigen::Index>(d);
    per[d] = predict_draw(x, chain.beta(idx), chain.sigma(idx), regime, options.simulations, stream);
  });

  PredictiveResult r;
  std::vector<DrawEstimate> a, u, ua, c;
  for (const auto& p : per) {
    a.push_back(p.access);
    u.push_back(p.use);
    ua.push_back(p.use_given_access);
    c.push_back(p.consumption);
    if (p.access.valid) {
      ++r.draws_used;
    } else {
      ++r.draws_skipped;
    }
  }
  if (r.draws_used == 0) throw NumericalFailure("every posterior draw has an invalid selection block");
  r.p_access = summarize(a);
  r.p_use = summarize(u);
  r.p_use_given_access = summarize(ua);
  r.consumption = summarize(c);
  r.zero_probability = r.p_use.mean < kZeroProbability;
  return r;
}

LegalizationEffect legalize_delta(const Covariates& x, const ChainStore& chain,
                                  const PredictOptions& options, const RandomStream& rng) {
  LegalizationEffect e;
  // Common random numbers: both regimes see the same simulation streams.
  e.observed = predict_individual(x, chain, AccessRegime::observed, options, rng);
  e.legalized = predict_individual(x, chain, AccessRegime::legalized, options, rng);

  const Eigen::Index draws = draws_to_use(chain, options);
  std::vector<DrawEstimate> delta(static_cast<std::size_t>(draws));
  parallel_for(delta.size(), options.threads, [&](std::size_t d) {
    auto stream = rng.substream(static_cast<std::uint64_t>(d));
    const auto idx = static_cast<Eigen::Index>(d);
    const auto p = predict_draw(x, chain.beta(idx), chain.sigma(idx), AccessRegime::observed,
                                options.simulations, stream);
    if (!p.access.valid) return;
    const double gap = 1.0 - p.access.value;
    delta[d] = {true, 100.0 * gap * p.use_given_access.value, 100.0 * gap * p.use_given_access.se};
  });
  e.delta_pp = summarize(delta);
  return e;
}

// ---------------------------------------------------------------------------

std::vector<PopulationMember> read_population(const CsvTable& table, const std::string& weight_column) {
  if (weight_column.empty()) throw SchemaError("population needs a weight column");
  const auto w_col = table.require_column(weight_column);
  std::vector<PopulationMember> out;
  out.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    PopulationMember m;
    for (std::size_t c = 0; c < table.header.size(); ++c) m.cells[table.header[c]] = table.rows[i][c];
    m.weight = parse_double(table.rows[i][w_col], weight_column + " (row " + std::to_string(i + 1) + ")");
    if (!(std::isfinite(m.weight) && m.weight > 0.0)) {
      throw DataIntegrityError("population weight must be positive (row " + std::to_string(i + 1) + ")");
    }
    out.push_back(std::move(m));
  }
  return out;
}

DesignBuilder design_for(const ChainStore& chain) {
  const auto& spec = chain.metadata().column_spec;
  if (spec.is_null()) throw SchemaError("chain metadata has no column spec; cannot build covariates");
  DesignBuilder builder(ColumnSpec::from_json(spec));
  if (!(builder.names() == chain.names())) {
    throw SchemaError("stored column spec does not reproduce the chain's regressor names");
  }
  return builder;
}

std::map<std::string, std::string> apply_scenario(std::map<std::string, std::string> cells,
                                                  const Scenario& scenario, const ColumnSpec& spec) {
  auto role = [&](const char* name) {
    const auto it = spec.roles.find(name);
    if (it == spec.roles.end()) {
      throw SchemaError(std::string("scenario sets '") + name +
                        "' but the column spec has no such role");
    }
    return it->second;
  };
  if (scenario.price) cells[role("price")] = format_double(*scenario.price);
  if (scenario.risk) cells[role("risk")] = *scenario.risk;
  for (const auto& [k, v] : scenario.overrides) cells[k] = v;
  return cells;
}

Covariates covariates_for(const std::map<std::string, std::string>& cells, const Scenario& scenario,
                          const DesignBuilder& builder) {
  const auto applied = apply_scenario(cells, scenario, builder.spec());
  return builder.build(DesignBuilder::map_lookup(applied));
}

// ---------------------------------------------------------------------------

RevenueResult tax_revenue(const std::vector<Covariates>& x, const std::vector<double>& weights,
                          const ChainStore& chain, const Scenario& scenario,
                          const PredictOptions& options, const RandomStream& rng) {
  scenario.validate();
  if (x.size() != weights.size()) throw InvalidArgument("tax_revenue: one weight per individual required");
  for (double w : weights) {
    if (!(std::isfinite(w) && w > 0.0)) throw DataIntegrityError("tax_revenue: weights must be positive");
  }
  for (const auto& xi : x) check_covariates(xi, chain);
  const Eigen::Index draws = draws_to_use(chain, options);
  const double tax = scenario.tax_per_gram();
  const double per_unit = 12.0 * (1.0 - scenario.black_market) * tax / scenario.units_per_usd;

  struct DrawTotals {
    bool valid = false;
    double revenue = 0.0;
    double users = 0.0;
    double joints = 0.0;
  };
  std::vector<DrawTotals> per(static_cast<std::size_t>(draws));
  parallel_for(per.size(), options.threads, [&](std::size_t d) {
    const auto idx = static_cast<Eigen::Index>(d);
    const auto beta = chain.beta(idx);
    const Eigen::Matrix3d sigma = chain.sigma(idx);
    const auto g = geometry(sigma);
    if (!g) return;
    const auto draw_stream = rng.substream(static_cast<std::uint64_t>(d));
    CompensatedSum joints;
    CompensatedSum users;
    for (std::size_t i = 0; i < x.size(); ++i) {
      auto stream = draw_stream.substream(static_cast<std::uint64_t>(i));
      const double mu_a = x[i][0].dot(beta.access);
      const double mu_c = x[i][1].dot(beta.use);
      const double mu_y = x[i][2].dot(beta.quantity);
      const auto p = use_given_access(mu_a, mu_c, sigma, options.simulations, stream);
      if (!(stream.uniform() < p.mean)) continue;
      const auto [ua, uc] = draw_selected(mu_a, mu_c, *g, stream);
      const auto mom = quantity_given_selection(sigma, mu_y, ua - mu_a, uc - mu_c);
      const double y = mom.mean + std::sqrt(std::max(0.0, mom.variance)) * dist::standard_normal(stream);
      joints.add(weights[i] * std::exp(y));
      users.add(weights[i]);
    }
    per[d] = {true, joints.value() * per_unit, users.value(), joints.value()};
  });

  RevenueResult r;
  std::vector<DrawEstimate> revenue;
  CompensatedSum users;
  CompensatedSum joints;
  for (const auto& p : per) {
    revenue.push_back({p.valid, p.revenue, 0.0});
    if (!p.valid) continue;
    ++r.draws_used;
    users.add(p.users);
    joints.add(p.joints);
  }
  if (r.draws_used == 0) throw NumericalFailure("every posterior draw has an invalid selection block");
  r.revenue_usd = summarize(revenue);
  r.revenue_local = r.revenue_usd.mean * scenario.exchange_rate;
  r.users = users.value() / static_cast<double>(r.draws_used);
  r.consumption_per_user = users.value() > 0.0 ? joints.value() / users.value() : 0.0;
  r.tax_per_gram = tax;
  r.price = scenario.price.value_or(std::nan(""));
  return r;
}

RevenueResult tax_revenue(const std::vector<PopulationMember>& population, const ChainStore& chain,
                          const Scenario& scenario, const PredictOptions& options,
                          const RandomStream& rng) {
  const auto builder = design_for(chain);
  std::vector<Covariates> x;
  std::vector<double> w;
  x.reserve(population.size());
  for (const auto& m : population) {
    x.push_back(covariates_for(m.cells, scenario, builder));
    w.push_back(m.weight);
  }
  return tax_revenue(x, w, chain, scenario, options, rng);
}

ElasticitySummary elasticity(const ChainStore& chain, const std::string& price_term,
                             const std::string& interaction_column, const std::string& group) {
  if (chain.empty()) throw InvalidArgument("chain has no draws");
  const auto& names = chain.names().quantity;
  auto index_of = [&](const std::string& term) -> std::optional<Eigen::Index> {
    const auto it = std::find(names.begin(), names.end(), term);
    if (it == names.end()) return std::nullopt;
    return static_cast<Eigen::Index>(it - names.begin());
  };
  const auto main = index_of(price_term);
  if (!main) throw InvalidArgument("quantity equation has no term '" + price_term + "'");
  std::optional<Eigen::Index> inter;
  if (!group.empty()) {
    inter = index_of(price_term + ":" + interaction_column + "=" + group);
    if (!inter) {
      // Acceptable only when `group` is the omitted base level.
      bool is_base = false;
      const auto& spec_json = chain.metadata().column_spec;
      if (!spec_json.is_null()) {
        const auto spec = ColumnSpec::from_json(spec_json);
        if (const auto* r = spec.find(interaction_column)) {
          const std::string base = !r->base.empty() ? r->base : (r->levels.empty() ? "" : r->levels.front());
          is_base = base == group;
        }
      }
      if (!is_base) {
        throw InvalidArgument("no interaction of '" + price_term + "' with " + interaction_column +
                              "=" + group);
      }
    }
  }
  ElasticitySummary s;
  s.group = group;
  s.draws.resize(chain.size());
  for (Eigen::Index d = 0; d < chain.size(); ++d) {
    const auto q = chain.beta(d).quantity;
    s.draws[d] = q[*main] + (inter ? q[*inter] : 0.0);
  }
  s.mean = s.draws.mean();
  const auto n = static_cast<double>(s.draws.size());
  s.sd = n > 1 ? std::sqrt((s.draws.array() - s.mean).square().sum() / (n - 1.0)) : 0.0;
  std::vector<double> sorted(s.draws.data(), s.draws.data() + s.draws.size());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double p) {
    const double h = (n - 1.0) * p;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  s.lower = quantile(0.025);
  s.upper = quantile(0.975);
  return s;
}

PopulationEffect population_legalization(const std::vector<PopulationMember>& population,
                                         const ChainStore& chain, const Scenario& scenario,
                                         const PredictOptions& options, const RandomStream& rng) {
  const auto builder = design_for(chain);
  CompensatedSum observed;
  CompensatedSum legalized;
  CompensatedSum total;
  PredictOptions inner = options;
  for (std::size_t i = 0; i < population.size(); ++i) {
    const auto x = covariates_for(population[i].cells, scenario, builder);
    const auto e = legalize_delta(x, chain, inner, rng.substream(static_cast<std::uint64_t>(i)));
    observed.add(population[i].weight * e.observed.p_use.mean);
    legalized.add(population[i].weight * e.legalized.p_use.mean);
    total.add(population[i].weight);
  }
  PopulationEffect out;
  if (total.value() <= 0.0) throw InvalidArgument("population is empty");
  out.p_use_observed = observed.value() / total.value();
  out.p_use_legalized = legalized.value() / total.value();
  out.delta_pp = 100.0 * (out.p_use_legalized - out.p_use_observed);
  return out;
}

}  // namespace tripart::policy
