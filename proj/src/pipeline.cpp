#include "tripart/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "tripart/errors.hpp"
#include "tripart/io.hpp"

namespace tripart::pipeline {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void check_quantity(double q, const char* variety) {
  if (!std::isfinite(q) || q < 0.0) {
    throw DataIntegrityError(std::string("quantity of variety '") + variety +
                             "' must be finite and non-negative");
  }
}

struct Stats {
  double sum = 0.0;
  std::size_t count = 0;
  void add(double v) {
    sum += v;
    ++count;
  }
  double mean() const { return sum / static_cast<double>(count); }
};

}  // namespace

ThcResult thc_weight(const VarietyQuantities& q) {
  check_quantity(q.regular, "regular");
  check_quantity(q.corinto, "corinto");
  check_quantity(q.creepy, "creepy");
  check_quantity(q.other, "other");
  return {q.regular + q.corinto + 4.0 * q.creepy, q.other > 0.0};
}

std::pair<double, double> split_varieties(double avg_price, double total_quantity, double price_i,
                                          double price_j) {
  if (!std::isfinite(avg_price) || !std::isfinite(price_i) || !std::isfinite(price_j) ||
      !std::isfinite(total_quantity)) {
    throw DataIntegrityError("split_varieties: non-finite input");
  }
  if (total_quantity < 0.0) throw DataIntegrityError("split_varieties: negative total quantity");
  if (price_i == price_j) throw PipelineError("split_varieties: the two variety prices are equal");
  if (avg_price < std::min(price_i, price_j) || avg_price > std::max(price_i, price_j)) {
    throw PipelineError("split_varieties: average price " + format_double(avg_price) +
                        " lies outside [" + format_double(std::min(price_i, price_j)) + ", " +
                        format_double(std::max(price_i, price_j)) + "]");
  }
  const double qi = total_quantity * (price_j - avg_price) / (price_j - price_i);
  return {qi, total_quantity - qi};
}

double nearest_rank_percentile(std::vector<double> values, double percent) {
  if (values.empty()) throw InvalidArgument("percentile of an empty set");
  if (!(percent > 0.0 && percent <= 100.0)) throw InvalidArgument("percentile must be in (0, 100]");
  std::sort(values.begin(), values.end());
  const double n = static_cast<double>(values.size());
  // The small slack keeps exact products such as 10 * 100 / 100 on their rank.
  auto rank = static_cast<std::size_t>(std::ceil(percent * n / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

int ImputedPrice::level() const {
  switch (source) {
    case PriceSource::cell: return 1;
    case PriceSource::municipality: return 2;
    case PriceSource::stratum: return 3;
    case PriceSource::overall: return 4;
    default: return 0;
  }
}

std::vector<ImputedPrice> impute_prices(const std::vector<PriceRecord>& records,
                                        const PriceTrim& trim) {
  if (!(trim.lower_percent > 0.0 && trim.lower_percent < trim.upper_percent &&
        trim.upper_percent <= 100.0)) {
    throw InvalidArgument("impute_prices: invalid trimming percentiles");
  }
  std::vector<ImputedPrice> out(records.size());
  std::vector<std::size_t> consumers;
  std::vector<std::int64_t> bad;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!r.consumer) continue;
    if (r.price && std::isfinite(*r.price) && *r.price > 0.0) {
      out[i] = {*r.price, PriceSource::reported};
    } else if (r.expenditure && r.quantity && *r.quantity > 0.0 && std::isfinite(*r.expenditure) &&
               *r.expenditure >= 0.0) {
      out[i] = {*r.expenditure / *r.quantity, PriceSource::derived};
    } else {
      bad.push_back(r.id);
      continue;
    }
    if (out[i].price > 0.0) consumers.push_back(i);
  }
  if (!bad.empty()) {
    std::ostringstream msg;
    msg << "consumers without a usable price or expenditure and quantity: ids";
    for (std::size_t k = 0; k < bad.size() && k < 20; ++k) msg << ' ' << bad[k];
    if (bad.size() > 20) msg << " ... (" << bad.size() << " total)";
    throw DataIntegrityError(msg.str());
  }
  if (consumers.empty()) throw PipelineError("impute_prices: no consumer reports a valid price");

  std::vector<double> prices;
  prices.reserve(consumers.size());
  for (auto i : consumers) prices.push_back(out[i].price);
  const double lo = nearest_rank_percentile(prices, trim.lower_percent);
  const double hi = nearest_rank_percentile(prices, trim.upper_percent);

  std::map<std::pair<std::string, std::string>, Stats> by_cell;
  std::map<std::string, Stats> by_municipality;
  std::map<std::string, Stats> by_stratum;
  Stats overall;
  for (auto i : consumers) {
    const double p = out[i].price;
    if (p < lo || p > hi) continue;
    const auto& r = records[i];
    by_cell[{r.municipality, r.stratum}].add(p);
    by_municipality[r.municipality].add(p);
    by_stratum[r.stratum].add(p);
    overall.add(p);
  }
  if (overall.count == 0) throw PipelineError("impute_prices: donor pool is empty after trimming");

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.consumer) continue;
    if (auto it = by_cell.find({r.municipality, r.stratum}); it != by_cell.end()) {
      out[i] = {it->second.mean(), PriceSource::cell};
    } else if (auto m = by_municipality.find(r.municipality); m != by_municipality.end()) {
      out[i] = {m->second.mean(), PriceSource::municipality};
    } else if (auto s = by_stratum.find(r.stratum); s != by_stratum.end()) {
      out[i] = {s->second.mean(), PriceSource::stratum};
    } else {
      out[i] = {overall.mean(), PriceSource::overall};
    }
  }
  return out;
}

std::vector<MatchResult> nn_match_variety_price(const std::vector<MatchRecipient>& recipients,
                                                const std::vector<MatchDonor>& donors) {
  Eigen::Index dim = -1;
  auto check_dim = [&](const Eigen::VectorXd& f) {
    if (dim < 0) dim = f.size();
    if (f.size() != dim) throw InvalidArgument("nn_match_variety_price: feature lengths differ");
    if (!f.allFinite()) throw DataIntegrityError("nn_match_variety_price: non-finite feature");
  };
  for (const auto& r : recipients) check_dim(r.features);
  for (const auto& d : donors) check_dim(d.features);
  if (dim < 0) dim = 0;

  // Pooled standardization; constant columns carry no information and are dropped.
  const auto total = static_cast<double>(recipients.size() + donors.size());
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sq = Eigen::VectorXd::Zero(dim);
  for (const auto& r : recipients) mean += r.features;
  for (const auto& d : donors) mean += d.features;
  if (total > 0) mean /= total;
  for (const auto& r : recipients) sq += (r.features - mean).cwiseAbs2();
  for (const auto& d : donors) sq += (d.features - mean).cwiseAbs2();
  Eigen::VectorXd inv_sd = Eigen::VectorXd::Zero(dim);
  for (Eigen::Index k = 0; k < dim; ++k) {
    const double sd = total > 1 ? std::sqrt(sq[k] / (total - 1.0)) : 0.0;
    inv_sd[k] = sd > 0.0 ? 1.0 / sd : 0.0;
  }

  std::vector<MatchResult> out;
  out.reserve(recipients.size());
  for (const auto& r : recipients) {
    MatchResult res;
    res.id = r.id;
    const Eigen::VectorXd zr = (r.features - mean).cwiseProduct(inv_sd);
    for (const auto& variety : r.varieties) {
      const MatchDonor* best = nullptr;
      double best_d = std::numeric_limits<double>::infinity();
      for (const auto& d : donors) {
        if (d.variety != variety) continue;
        const double dist = ((d.features - mean).cwiseProduct(inv_sd) - zr).squaredNorm();
        if (dist < best_d || (dist == best_d && best && d.id < best->id)) {
          best = &d;
          best_d = dist;
        }
      }
      if (best) {
        res.prices[variety] = {best->price, best->id};
      } else {
        res.unmatched.push_back(variety);
      }
    }
    out.push_back(std::move(res));
  }
  return out;
}

std::string to_string(RiskLevel r) {
  switch (r) {
    case RiskLevel::low: return "low";
    case RiskLevel::medium: return "medium";
    case RiskLevel::high: return "high";
  }
  return "high";
}

RiskLevel parse_risk_level(const std::string& s) {
  if (s == "low") return RiskLevel::low;
  if (s == "medium") return RiskLevel::medium;
  if (s == "high") return RiskLevel::high;
  throw InvalidArgument("unknown risk level '" + s + "' (expected low, medium or high)");
}

RiskLevel risk_index(int rarely, int sometimes, int frequently, const RiskCutoffs& cutoffs) {
  for (int v : {rarely, sometimes, frequently}) {
    if (v < 1 || v > 4) {
      throw DataIntegrityError("risk answers must be in 1..4, got " + std::to_string(v));
    }
  }
  // Compare on the sum to keep the boundaries exact.
  const double sum = static_cast<double>(rarely + sometimes + frequently);
  if (sum < 3.0 * cutoffs.medium) return RiskLevel::low;
  if (sum < 3.0 * cutoffs.high) return RiskLevel::medium;
  return RiskLevel::high;
}

// ---------------------------------------------------------------------------

PipelineConfig PipelineConfig::from_json(const nlohmann::json& j) {
  PipelineConfig c;
  try {
    c.id = j.value("id", c.id);
    c.consumer = j.value("consumer", c.consumer);
    if (j.contains("quantities")) {
      c.quantities = j.at("quantities").get<std::map<std::string, std::string>>();
    }
    c.unknown_marker = j.value("unknown_marker", c.unknown_marker);
    c.total_quantity = j.value("total_quantity", c.total_quantity);
    c.price = j.value("price", c.price);
    c.expenditure = j.value("expenditure", c.expenditure);
    c.municipality = j.value("municipality", c.municipality);
    c.stratum = j.value("stratum", c.stratum);
    c.match_features = j.value("match_features", c.match_features);
    if (j.contains("risk_items")) {
      const auto items = j.at("risk_items").get<std::vector<std::string>>();
      if (items.size() != 3) throw SchemaError("risk_items must list three columns");
      std::copy(items.begin(), items.end(), c.risk_items.begin());
    }
    if (j.contains("risk_cutoffs")) {
      const auto cut = j.at("risk_cutoffs").get<std::vector<double>>();
      if (cut.size() != 2 || !(cut[0] < cut[1])) {
        throw SchemaError("risk_cutoffs must be two increasing values");
      }
      c.risk_cutoffs = {cut[0], cut[1]};
    }
    if (j.contains("trim_percentiles")) {
      const auto t = j.at("trim_percentiles").get<std::vector<double>>();
      if (t.size() != 2) throw SchemaError("trim_percentiles must be [lower, upper]");
      c.trim = {t[0], t[1]};
    }
    c.quantity_output = j.value("quantity_output", c.quantity_output);
    c.price_output = j.value("price_output", c.price_output);
    c.risk_output = j.value("risk_output", c.risk_output);
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("pipeline config: ") + e.what());
  }
  for (const auto& [variety, column] : c.quantities) {
    if (variety != "regular" && variety != "corinto" && variety != "creepy" && variety != "other") {
      throw SchemaError("pipeline config: unknown variety '" + variety + "'");
    }
    (void)column;
  }
  return c;
}

nlohmann::json PipelineConfig::to_json() const {
  return {{"id", id},
          {"consumer", consumer},
          {"quantities", quantities},
          {"unknown_marker", unknown_marker},
          {"total_quantity", total_quantity},
          {"price", price},
          {"expenditure", expenditure},
          {"municipality", municipality},
          {"stratum", stratum},
          {"match_features", match_features},
          {"risk_items", risk_items},
          {"risk_cutoffs", {risk_cutoffs.medium, risk_cutoffs.high}},
          {"trim_percentiles", {trim.lower_percent, trim.upper_percent}},
          {"quantity_output", quantity_output},
          {"price_output", price_output},
          {"risk_output", risk_output}};
}

nlohmann::json PipelineSummary::to_json() const {
  return {{"rows", rows},
          {"excluded", excluded},
          {"split", split},
          {"unresolved", unresolved},
          {"price_levels",
           {{"own", price_levels[0]},
            {"municipality_stratum", price_levels[1]},
            {"municipality", price_levels[2]},
            {"stratum", price_levels[3]},
            {"overall", price_levels[4]}}},
          {"high_risk", high_risk}};
}

namespace {

struct RowState {
  std::int64_t id = 0;
  bool consumer = false;
  std::map<std::string, double> known;
  std::vector<std::string> unknown;
  std::optional<double> total;
  std::optional<double> price;
  std::optional<double> expenditure;
  std::string municipality;
  std::string stratum;
  Eigen::VectorXd features;
  std::string split_status = "none";
  std::string matched;
  bool unresolved = false;
};

std::optional<double> optional_number(const CsvTable& t, std::size_t row,
                                      const std::string& column) {
  const auto c = t.column(column);
  if (!c) return std::nullopt;
  const auto cell = trim(t.rows[row][*c]);
  if (cell.empty()) return std::nullopt;
  return parse_double(cell, "column '" + column + "' (row " + std::to_string(row + 1) + ")");
}

std::string cell_or_empty(const CsvTable& t, std::size_t row, const std::string& column) {
  const auto c = t.column(column);
  return c ? trim(t.rows[row][*c]) : std::string{};
}

VarietyQuantities as_varieties(const std::map<std::string, double>& q) {
  VarietyQuantities v;
  auto get = [&](const char* k) {
    auto it = q.find(k);
    return it == q.end() ? 0.0 : it->second;
  };
  v.regular = get("regular");
  v.corinto = get("corinto");
  v.creepy = get("creepy");
  v.other = get("other");
  return v;
}

}  // namespace

PipelineOutput prepare_survey(const CsvTable& raw, const PipelineConfig& config) {
  const auto id_col = raw.require_column(config.id);
  const auto c_col = raw.require_column(config.consumer);
  const std::size_t n = raw.rows.size();
  std::vector<RowState> rows(n);

  for (std::size_t i = 0; i < n; ++i) {
    auto& s = rows[i];
    const std::string where = " (row " + std::to_string(i + 1) + ")";
    const double idv = parse_double(trim(raw.rows[i][id_col]), config.id + where);
    if (idv != std::floor(idv)) throw SchemaError("non-integer id" + where);
    s.id = static_cast<std::int64_t>(idv);
    const auto c = trim(raw.rows[i][c_col]);
    // Blank use is how the survey records individuals without access.
    if (!c.empty() && c != "0" && c != "1") throw SchemaError("consumer column must be 0, 1 or blank" + where);
    s.consumer = c == "1";
    s.municipality = cell_or_empty(raw, i, config.municipality);
    s.stratum = cell_or_empty(raw, i, config.stratum);
    s.features.resize(static_cast<Eigen::Index>(config.match_features.size()));
    for (std::size_t k = 0; k < config.match_features.size(); ++k) {
      const auto col = raw.require_column(config.match_features[k]);
      s.features[static_cast<Eigen::Index>(k)] =
          parse_double(trim(raw.rows[i][col]), config.match_features[k] + where);
    }
    if (!s.consumer) continue;
    for (const auto& [variety, column] : config.quantities) {
      const auto col = raw.column(column);
      if (!col) continue;
      const auto cell = trim(raw.rows[i][*col]);
      if (cell.empty()) continue;
      if (cell == config.unknown_marker) {
        s.unknown.push_back(variety);
        continue;
      }
      const double q = parse_double(cell, column + where);
      if (!std::isfinite(q) || q < 0.0) {
        throw DataIntegrityError("negative or non-finite quantity in '" + column + "'" + where +
                                 ", id " + std::to_string(s.id));
      }
      if (q > 0.0) s.known[variety] = q;
    }
    s.total = optional_number(raw, i, config.total_quantity);
    s.price = optional_number(raw, i, config.price);
    s.expenditure = optional_number(raw, i, config.expenditure);
  }

  // Own prices and cell-mean imputation.
  std::vector<PriceRecord> price_records(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = rows[i];
    double known_sum = 0.0;
    for (const auto& [v, q] : s.known) known_sum += q;
    price_records[i] = {s.id,
                        s.consumer,
                        s.price,
                        s.expenditure,
                        s.total ? s.total : (s.unknown.empty() ? std::optional(known_sum) : std::nullopt),
                        s.municipality,
                        s.stratum};
  }
  const auto prices = impute_prices(price_records, config.trim);

  // Variety prices for two-variety consumers from single-variety donors.
  std::vector<MatchDonor> donors;
  std::vector<MatchRecipient> recipients;
  std::vector<std::size_t> recipient_rows;
  for (std::size_t i = 0; i < n; ++i) {
    auto& s = rows[i];
    if (!s.consumer) continue;
    if (s.unknown.empty() && s.known.size() == 1 && !s.known.count("other")) {
      donors.push_back({s.id, s.known.begin()->first, prices[i].price, s.features});
    }
    if (s.unknown.size() == 2 && s.known.empty() && s.total) {
      recipients.push_back({s.id, s.unknown, s.features});
      recipient_rows.push_back(i);
    }
  }
  const auto matches = nn_match_variety_price(recipients, donors);

  PipelineSummary summary;
  summary.rows = n;
  for (std::size_t k = 0; k < matches.size(); ++k) {
    auto& s = rows[recipient_rows[k]];
    const auto& m = matches[k];
    if (!m.unmatched.empty()) {
      s.unresolved = true;
      s.split_status = "unmatchable";
      continue;
    }
    const auto& [pi, di] = m.prices.at(s.unknown[0]);
    const auto& [pj, dj] = m.prices.at(s.unknown[1]);
    s.matched = s.unknown[0] + ":" + std::to_string(di) + ";" + s.unknown[1] + ":" + std::to_string(dj);
    try {
      const auto [qi, qj] = split_varieties(prices[recipient_rows[k]].price, *s.total, pi, pj);
      s.known[s.unknown[0]] = qi;
      s.known[s.unknown[1]] = qj;
      s.unknown.clear();
      s.split_status = "split";
      ++summary.split;
    } catch (const PipelineError&) {
      s.unresolved = true;
      s.split_status = "infeasible";
    }
  }
  for (auto& s : rows) {
    if (!s.consumer || s.unknown.empty() || s.unresolved) continue;
    if (s.unknown.size() == 1 && s.total) {
      double known_sum = 0.0;
      for (const auto& [v, q] : s.known) known_sum += q;
      if (*s.total >= known_sum) {
        s.known[s.unknown[0]] = *s.total - known_sum;
        s.unknown.clear();
        s.split_status = "remainder";
        continue;
      }
    }
    s.unresolved = true;
    s.split_status = "unresolved";
  }

  // Risk index, when the three items are present.
  const bool have_risk = std::all_of(config.risk_items.begin(), config.risk_items.end(),
                                     [&](const std::string& c) { return raw.column(c).has_value(); });

  PipelineOutput out;
  std::vector<std::string> extra{config.quantity_output, "audit_quantity_raw", "audit_excluded",
                                 "audit_exclusion_reason", "audit_split", "audit_donors",
                                 config.price_output, "audit_price_level"};
  if (have_risk) extra.push_back(config.risk_output);
  for (const auto& name : extra) {
    if (raw.column(name)) throw SchemaError("output column '" + name + "' already exists in the input");
  }
  out.table.header = raw.header;
  out.table.header.insert(out.table.header.end(), extra.begin(), extra.end());

  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = rows[i];
    std::vector<std::string> row = raw.rows[i];
    std::string equiv;
    std::string raw_total;
    std::string reason;
    bool excluded = false;
    if (s.consumer) {
      if (s.unresolved) {
        excluded = true;
        reason = s.split_status;
        ++summary.unresolved;
      } else {
        const auto v = as_varieties(s.known);
        const auto w = thc_weight(v);
        raw_total = format_double(v.regular + v.corinto + v.creepy + v.other);
        if (w.excluded) {
          excluded = true;
          reason = "other_variety";
        } else if (!(w.equivalent > 0.0)) {
          excluded = true;
          reason = "zero_quantity";
        } else {
          equiv = format_double(w.equivalent);
        }
      }
    }
    if (excluded) ++summary.excluded;
    const int level = prices[i].level();
    ++summary.price_levels[static_cast<std::size_t>(level)];
    row.push_back(equiv);
    row.push_back(raw_total);
    row.push_back(excluded ? "1" : "0");
    row.push_back(reason);
    row.push_back(s.split_status);
    row.push_back(s.matched);
    row.push_back(format_double(prices[i].price));
    row.push_back(std::to_string(level));
    if (have_risk) {
      std::array<int, 3> answers{};
      for (int k = 0; k < 3; ++k) {
        const auto& col = config.risk_items[static_cast<std::size_t>(k)];
        const double v = parse_double(trim(raw.rows[i][*raw.column(col)]),
                                      col + " (row " + std::to_string(i + 1) + ")");
        if (v != std::floor(v)) {
          throw DataIntegrityError("risk answer must be an integer in 1..4 (row " +
                                   std::to_string(i + 1) + ")");
        }
        answers[static_cast<std::size_t>(k)] = static_cast<int>(v);
      }
      const auto level_r = risk_index(answers[0], answers[1], answers[2], config.risk_cutoffs);
      if (level_r == RiskLevel::high) ++summary.high_risk;
      row.push_back(to_string(level_r));
    }
    out.table.add_row(std::move(row));
  }
  out.summary = summary;
  return out;
}

}  // namespace tripart::pipeline
