#pragma once

#include "minbo/schemes.hpp"
#include "minbo/simulation.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace minbo::cli {

struct MainSection {
  std::string file;
  std::string id = "id";
  std::string outcome = "y";
  std::vector<std::string> covariates;

  bool operator==(const MainSection&) const = default;
};

struct SecondarySection {
  std::string name;
  std::string file;
  std::string kind = "longitudinal";  // longitudinal | cross_sectional
  std::string id = "id";
  std::string time = "time";  // longitudinal only
  std::string outcome = "y";
  std::vector<std::string> covariates;
  std::vector<std::string> redundant;  // cross-sectional only
  bool intercept = true;
  // identity, exchangeable, band1, corners; longitudinal only
  std::vector<std::string> basis = {"identity", "exchangeable", "band1", "corners"};
  std::string link;  // empty: identity for longitudinal, logit for cross-sectional
  std::string variance_mode = "residual";  // residual | unit

  bool operator==(const SecondarySection&) const = default;
};

struct SchemeSection {
  std::string name;
  std::string kind = "averaging";  // averaging | aggregating | custom
  std::vector<std::string> datasets;  // averaging/aggregating; empty means all
  std::vector<std::vector<double>> omega;  // custom: one row per group, K columns
  std::string weight_mode = "iib";  // iib | fixed
  std::vector<double> weights;  // averaging with fixed weights

  bool operator==(const SchemeSection&) const = default;
};

struct OutputSection {
  std::string format = "json";  // json | csv
  std::string path;

  bool operator==(const OutputSection&) const = default;
};

struct OptionsSection {
  double confidence = 0.95;
  double lambda_tol = 1e-10;
  double theta_tol = 1e-8;
  double beta_tol = 1e-10;
  int max_inner = 100;
  int max_outer = 200;
  int max_newton = 100;
  unsigned threads = 0;  // 0: all cores
  std::uint64_t seed = 20240607;

  bool operator==(const OptionsSection&) const = default;
};

struct SimulationSection {
  std::vector<long> n = {600};
  std::vector<double> rho = {0.8};
  std::vector<std::string> missingness = {"full"};
  std::vector<double> eta = {0.6, 0.7, 0.5};
  std::vector<double> alpha = {0.5, 1.0, 1.0, 1.0};
  bool misspecified = false;
  std::string variance_mode = "residual";
  int reps = 1000;
  std::vector<std::string> estimators = SimulationConfig::default_estimators();

  bool operator==(const SimulationSection&) const = default;
};

struct Config {
  std::optional<MainSection> main;
  std::vector<SecondarySection> secondary;
  std::vector<SchemeSection> schemes;
  OutputSection output;
  OptionsSection options;
  std::optional<SimulationSection> simulation;
  // Directory that relative file paths resolve against. Not serialized.
  std::string base_dir;

  bool operator==(const Config& o) const {
    return main == o.main && secondary == o.secondary && schemes == o.schemes &&
           output == o.output && options == o.options && simulation == o.simulation;
  }
};

/// Parses INI-style text, or JSON when `json` is set. Unknown sections or
/// keys are ConfigError so typos do not silently fall back to defaults.
Config parse_config(std::string_view text, bool json = false);

/// Reads a file (JSON when the extension is .json), records its directory
/// as base_dir and applies the MINBO_SEED environment override.
Config load_config(const std::string& path);

/// INI rendering with every key written out; parse_config inverts it.
std::string serialize_config(const Config& config);

/// Cross-field checks: dataset references, enum values, weights.
void validate_config(const Config& config);

std::string resolve_path(const Config& config, const std::string& path);

/// Scheme specs over the configured secondary datasets, in config order.
std::vector<SchemeSpec> scheme_specs(const Config& config);

/// One Monte Carlo cell of the [simulation] grid.
SimulationConfig simulation_cell(const Config& config, long n, double rho,
                                 const std::string& missingness);

}  // namespace minbo::cli
