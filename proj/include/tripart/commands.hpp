#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tripart/sampler.hpp"

namespace tripart::commands {

enum class Format { csv, json };

Format parse_format(const std::string& s);

/// Files written and a short human-readable report.
struct CommandResult {
  std::vector<std::string> written;
  std::string report;
};

struct ImputeOptions {
  std::string input;
  std::string config;
  std::string out;
};
/// prepared.csv (model-ready rows), audit.csv (all rows), impute_summary.json.
CommandResult cmd_impute(const ImputeOptions& o);

struct FitOptions {
  std::string input;
  std::string columns;
  std::string prior;
  std::string out;
  SamplerConfig sampler;
  int chains = 1;
  Format format = Format::csv;
};
/// chain_<k>.csv/.json per chain plus fit_summary.{csv,json}. Chain k uses
/// seed + k - 1.
CommandResult cmd_fit(const FitOptions& o);

struct DiagnoseOptions {
  std::vector<std::string> chains;
  std::string out;
  Format format = Format::json;
};
/// diagnostics.txt plus diagnostics.{csv,json}.
CommandResult cmd_diagnose(const DiagnoseOptions& o);

struct SimulateOptions {
  std::string spec;
  std::string covariates;
  std::string out;
  std::optional<std::uint64_t> seed;
};
/// data.csv, columns.json, truth.json.
CommandResult cmd_simulate(const SimulateOptions& o);

struct MonteCarloOptions {
  int simulations = 200;
  long draws = 0;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

struct PredictOptions {
  std::string chain;
  std::string profile;
  std::string scenario;
  std::string out;
  Format format = Format::csv;
  MonteCarloOptions mc;
};
/// predictions.{csv,json}: one row per profile and scenario.
CommandResult cmd_predict(const PredictOptions& o);

struct PolicyOptions {
  std::string chain;
  std::string population;
  std::string grid;
  std::string out;
  Format format = Format::csv;
  MonteCarloOptions mc;
};
/// tax_revenue.{csv,json} and, when the grid lists profiles, scenarios.{csv,json}.
CommandResult cmd_policy(const PolicyOptions& o);

}  // namespace tripart::commands
