#include <iostream>

#include <CLI11.hpp>

#include "tripart/commands.hpp"
#include "tripart/errors.hpp"

namespace cmd = tripart::commands;

namespace {

void add_mc(CLI::App* app, cmd::MonteCarloOptions& mc) {
  app->add_option("--simulations", mc.simulations, "Simulations per posterior draw")->check(CLI::PositiveNumber);
  app->add_option("--draws", mc.draws, "Use at most this many posterior draws (0 = all)")->check(CLI::NonNegativeNumber);
  app->add_option("--seed", mc.seed, "Seed for the predictive simulations");
  app->add_option("--threads", mc.threads, "Worker threads (0 = hardware concurrency)");
}

int run(int argc, char** argv) {
  CLI::App app{"Bayesian three-part demand model: access, use and quantity"};
  app.require_subcommand(1);
  std::string format = "csv";

  cmd::ImputeOptions impute;
  auto* s_impute = app.add_subcommand("impute", "Prepare raw survey data (quality weighting, prices, risk index)");
  s_impute->add_option("--input", impute.input, "Raw survey CSV")->required();
  s_impute->add_option("--columns,--config", impute.config, "Pipeline config JSON")->required();
  s_impute->add_option("--out", impute.out, "Output directory")->required();

  cmd::FitOptions fit;
  std::string step2 = "accessed";
  auto* s_fit = app.add_subcommand("fit", "Run the Gibbs sampler");
  s_fit->add_option("--input", fit.input, "Prepared CSV")->required();
  s_fit->add_option("--columns", fit.columns, "Column spec JSON")->required();
  s_fit->add_option("--prior", fit.prior, "Prior overrides JSON");
  s_fit->add_option("--iterations", fit.sampler.iterations, "Total iterations")->capture_default_str();
  s_fit->add_option("--burn-in", fit.sampler.burn_in, "Burn-in iterations")->capture_default_str();
  s_fit->add_option("--thin", fit.sampler.thin, "Thinning interval")->capture_default_str();
  s_fit->add_option("--chains", fit.chains, "Chains, run concurrently")->capture_default_str();
  s_fit->add_option("--seed", fit.sampler.seed, "Seed of the first chain")->capture_default_str();
  s_fit->add_option("--step2", step2, "Covariance step-2 set: accessed or g2_only")
      ->check(CLI::IsMember({"accessed", "g2_only"}));
  s_fit->add_option("--out", fit.out, "Output directory")->required();
  s_fit->add_option("--format", format, "Summary format")->check(CLI::IsMember({"csv", "json"}));

  cmd::DiagnoseOptions diagnose;
  auto* s_diag = app.add_subcommand("diagnose", "Convergence diagnostics for saved chains");
  s_diag->add_option("--input", diagnose.chains, "Chain file stem(s)")->required();
  s_diag->add_option("--out", diagnose.out, "Output directory")->required();
  s_diag->add_option("--format", format, "Table format")->check(CLI::IsMember({"csv", "json"}));

  cmd::SimulateOptions simulate;
  std::uint64_t sim_seed = 0;
  auto* s_sim = app.add_subcommand("simulate", "Generate synthetic data from the forward model");
  s_sim->add_option("--input", simulate.spec, "Generator spec JSON")->required();
  s_sim->add_option("--covariates", simulate.covariates, "CSV supplying the regressor columns");
  auto* seed_opt = s_sim->add_option("--seed", sim_seed, "Override the spec's seed");
  s_sim->add_option("--out", simulate.out, "Output directory")->required();

  cmd::PredictOptions predict;
  auto* s_pred = app.add_subcommand("predict", "Posterior predictive probabilities for covariate profiles");
  s_pred->add_option("--input", predict.chain, "Chain file stem")->required();
  s_pred->add_option("--profile", predict.profile, "Covariate profile JSON")->required();
  s_pred->add_option("--scenario", predict.scenario, "Scenario JSON");
  s_pred->add_option("--out", predict.out, "Output directory")->required();
  s_pred->add_option("--format", format, "Table format")->check(CLI::IsMember({"csv", "json"}));
  add_mc(s_pred, predict.mc);

  cmd::PolicyOptions pol;
  auto* s_pol = app.add_subcommand("policy", "Tax-revenue and legalization scenario tables");
  s_pol->add_option("--input", pol.chain, "Chain file stem")->required();
  s_pol->add_option("--population", pol.population, "Weighted population CSV");
  s_pol->add_option("--scenario", pol.grid, "Scenario grid JSON")->required();
  s_pol->add_option("--out", pol.out, "Output directory")->required();
  s_pol->add_option("--format", format, "Table format")->check(CLI::IsMember({"csv", "json"}));
  add_mc(s_pol, pol.mc);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  cmd::CommandResult result;
  if (*s_impute) {
    result = cmd::cmd_impute(impute);
  } else if (*s_fit) {
    fit.format = cmd::parse_format(format);
    fit.sampler.step2 = step2 == "g2_only" ? tripart::Step2Set::g2_only : tripart::Step2Set::accessed;
    result = cmd::cmd_fit(fit);
  } else if (*s_diag) {
    diagnose.format = cmd::parse_format(format);
    result = cmd::cmd_diagnose(diagnose);
  } else if (*s_sim) {
    if (*seed_opt) simulate.seed = sim_seed;
    result = cmd::cmd_simulate(simulate);
  } else if (*s_pred) {
    predict.format = cmd::parse_format(format);
    result = cmd::cmd_predict(predict);
  } else if (*s_pol) {
    pol.format = cmd::parse_format(format);
    result = cmd::cmd_policy(pol);
  }
  std::cout << result.report;
  for (const auto& f : result.written) std::cerr << "wrote " << f << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const tripart::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const tripart::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const tripart::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
}
