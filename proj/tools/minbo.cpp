// Command-line front end. Talks to the library only through minbo.h.
#include "minbo/minbo.h"

#include <CLI11.hpp>
#include <json.hpp>

#include <iostream>
#include <string>

namespace {

int report(minbo_status status) {
  if (status == MINBO_OK) return 0;
  nlohmann::ordered_json err;
  err["error"] = {{"code", minbo_status_string(status)}, {"message", minbo_last_error()}};
  std::cerr << err.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Empirical-likelihood information borrowing for logistic regression"};
  app.set_version_flag("--version", std::string(minbo_version()));
  app.require_subcommand(1);

  std::string config;
  std::string out;
  int threads = -1;

  auto* simulate = app.add_subcommand("simulate", "Run the Monte Carlo cells of a config");
  simulate->add_option("config", config, "INI or JSON config")->required()->check(CLI::ExistingFile);
  simulate->add_option("--threads", threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  simulate->add_option("--out", out, "Output directory");

  auto* estimate = app.add_subcommand("estimate", "Fit the main model with borrowed information");
  estimate->add_option("config", config, "INI or JSON config")->required()->check(CLI::ExistingFile);
  estimate->add_option("--out", out, "Report file (.csv or .json)");

  auto* validate = app.add_subcommand("validate", "Check a config and its data files");
  validate->add_option("config", config, "INI or JSON config")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  if (*simulate) return report(minbo_cmd_simulate(config.c_str(), threads, out.c_str()));
  if (*estimate) return report(minbo_cmd_estimate(config.c_str(), out.c_str()));
  return report(minbo_cmd_validate(config.c_str()));
}
