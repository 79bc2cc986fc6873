// Command-line front end for the experiment runners.
//
//   taylor_ode_cli --experiment vdp-adaptive --scheme SI_T2 --ic unprepared --out out/
//   taylor_ode_cli --config run.json --tol 1e-6
//
// Exit codes: 0 success, 2 bad configuration, 3 numerical abort in some run.

#include "taylor_ode/experiments.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace ex = taylor_ode::experiments;

int main(int argc, char** argv) {
  CLI::App app{"Taylor-type IMEX schemes for stiff split ODEs"};

  std::optional<std::string> config_file, experiment, ic, out, format;
  std::vector<std::string> schemes;
  std::optional<double> mu, tol, kappa, dt0, t_end_mult;
  std::optional<int> q;

  app.add_option("--config", config_file, "JSON file with defaults; flags override it");
  app.add_option("--experiment", experiment,
                 "vdp-adaptive | convergence | stability-region | reference");
  app.add_option("--scheme,--schemes", schemes, "scheme name(s); default depends on experiment")
      ->delimiter(',');
  app.add_option("--ic", ic, "well-prepared | unprepared | both");
  app.add_option("--mu", mu, "stiffness parameter");
  app.add_option("--tol", tol, "controller tolerance");
  app.add_option("--kappa", kappa, "controller safety factor");
  app.add_option("--q", q, "controller exponent denominator");
  app.add_option("--dt0", dt0, "initial step");
  app.add_option("--t-end-mult", t_end_mult, "t_end as a multiple of mu");
  app.add_option("--out", out, "output directory");
  app.add_option("--format", format, "csv | json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  ex::ExperimentConfig cfg;
  try {
    if (config_file) {
      std::ifstream in(*config_file);
      if (!in) throw ex::ConfigError("cannot read config file " + *config_file);
      ex::json j;
      try {
        j = ex::json::parse(in);
      } catch (const ex::json::exception& e) {
        throw ex::ConfigError(std::string("config file is not valid JSON: ") + e.what());
      }
      ex::apply_json(cfg, j);
    }
    ex::json flags = ex::json::object();
    if (experiment) flags["experiment"] = *experiment;
    if (!schemes.empty()) flags["schemes"] = schemes;
    if (ic) flags["ic"] = *ic;
    if (mu) flags["mu"] = *mu;
    if (tol) flags["tol"] = *tol;
    if (kappa) flags["kappa"] = *kappa;
    if (q) flags["q"] = *q;
    if (dt0) flags["dt0"] = *dt0;
    if (t_end_mult) flags["t_end_mult"] = *t_end_mult;
    if (out) flags["out"] = *out;
    if (format) flags["format"] = *format;
    ex::apply_json(cfg, flags);

    const ex::ExperimentOutcome outcome = ex::run_experiment(cfg, std::cout);
    for (const auto& f : outcome.failures) std::cerr << "aborted: " << f << '\n';
    return outcome.ok() ? 0 : 3;
  } catch (const ex::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const taylor_ode::ContractError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}
