#include "minbo/cli/commands.hpp"

#include "minbo/cli/csv.hpp"
#include "minbo/error.hpp"

#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>

namespace minbo::cli {

AnalysisOptions analysis_options(const Config& config) {
  const auto& o = config.options;
  AnalysisOptions opts;
  opts.el.inner.tol = o.lambda_tol;
  opts.el.inner.max_iter = o.max_inner;
  opts.el.outer_tol = o.theta_tol;
  opts.el.max_outer = o.max_outer;
  opts.beta.tol = o.beta_tol;
  opts.beta.max_iter = o.max_newton;
  opts.confidence = o.confidence;
  return opts;
}

std::vector<SchemeSpec> requested_schemes(const Config& config) {
  if (!config.schemes.empty()) return scheme_specs(config);
  const auto k = static_cast<Index>(config.secondary.size());
  std::vector<Index> all;
  for (Index m = 0; m < k; ++m) all.push_back(m);
  SchemeSpec ave = averaging_over(k, all, WeightMode::IIB);
  ave.label = "averaging";
  SchemeSpec agg = aggregating_over(k, all);
  agg.label = "aggregating";
  return {ave, agg};
}

EstimateRun run_estimate(const Config& config) {
  validate_config(config);
  EstimateRun run;
  run.data = load_datasets(config);
  run.result = run_analysis(run.data.input, requested_schemes(config), analysis_options(config));
  run.rows = report_rows(run.result, run.data.coefficients);
  return run;
}

namespace {

std::string extension_of(const std::string& path) {
  std::string ext = std::filesystem::path(path).extension().string();
  for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  return ext;
}

}  // namespace

void cmd_estimate(const std::string& config_path, const std::string& out, std::ostream& log) {
  const Config config = load_config(config_path);
  const EstimateRun run = run_estimate(config);

  std::string path = out;
  if (path.empty() && !config.output.path.empty()) path = resolve_path(config, config.output.path);
  std::string format = config.output.format;
  if (const auto ext = extension_of(path); ext == ".csv" || ext == ".json") format = ext.substr(1);

  const std::string body = format == "csv" ? estimate_csv(run.rows)
                                           : estimate_json(run.result, run.rows, run.data.input.names);
  if (path.empty()) {
    log << body;
  } else {
    write_file(path, body);
    log << "wrote " << path << " (" << run.rows.size() << " rows)\n";
  }
}

void cmd_simulate(const std::string& config_path, int threads, const std::string& out_dir,
                  std::ostream& log) {
  const Config config = load_config(config_path);
  validate_config(config);
  if (!config.simulation) throw Error(ErrorCode::ConfigError, "config has no [simulation] section");
  const auto& sim = *config.simulation;

  std::string dir = out_dir;
  if (dir.empty()) dir = config.output.path.empty() ? "." : resolve_path(config, config.output.path);
  const unsigned workers = threads >= 0 ? static_cast<unsigned>(threads) : config.options.threads;

  std::vector<ManifestCell> cells;
  std::optional<Error> first_error;
  for (long n : sim.n) {
    for (double rho : sim.rho) {
      for (const auto& miss : sim.missingness) {
        ManifestCell cell;
        cell.config = simulation_cell(config, n, rho, miss);
        const std::string stem = cell_stem(cell.config);
        cell.file = stem + ".csv";
        log << "cell " << stem << ": " << cell.config.reps << " replicates" << std::endl;
        try {
          cell.summary = monte_carlo(cell.config, workers);
          const SummaryTable table = summary_table(cell.summary);
          write_file((std::filesystem::path(dir) / cell.file).string(), summary_csv(table));
          write_file((std::filesystem::path(dir) / (stem + "_table.csv")).string(),
                     summary_human_csv(table));
          log << "  " << cell.summary.succeeded << " succeeded, " << cell.summary.failures.size()
              << " failed, " << format_short(cell.summary.wall_seconds) << " s" << std::endl;
        } catch (const Error& e) {
          if (e.code() != ErrorCode::TooManyFailures && e.code() != ErrorCode::NonPositiveVariance) throw;
          cell.error = std::string(to_string(e.code())) + ": " + e.what();
          if (!first_error) first_error = Error(e.code(), stem + ": " + e.what());
          log << "  " << cell.error << std::endl;
        }
        cells.push_back(std::move(cell));
      }
    }
  }
  write_file((std::filesystem::path(dir) / "manifest.json").string(),
             manifest_json(cells, config.options.seed));
  if (first_error) throw *first_error;
}

void cmd_validate(const std::string& config_path, std::ostream& log) {
  const Config config = load_config(config_path);
  validate_config(config);
  nlohmann::ordered_json out;
  out["valid"] = true;
  if (config.main) {
    out["secondary"] = nlohmann::ordered_json::array();
    const LoadedData data = load_datasets(config);
    out["main"] = {{"subjects", data.input.main.n()}, {"coefficients", data.coefficients}};
    for (std::size_t k = 0; k < data.input.secondary.size(); ++k) {
      const auto& d = data.input.secondary[k];
      const auto spec = prepare_spec(d, data.input.specs[k]);
      out["secondary"].push_back({{"name", data.input.names[k]},
                                  {"kind", config.secondary[k].kind},
                                  {"observed", d.observed_count()},
                                  {"visits", d.m},
                                  {"moments", spec.moment_dim(d.q())},
                                  {"theta_dim", spec.theta_dim}});
    }
    out["schemes"] = nlohmann::ordered_json::array();
    for (const auto& s : requested_schemes(config)) {
      out["schemes"].push_back({{"label", s.label},
                                {"rows", s.rows()},
                                {"weight_mode", s.mode == WeightMode::IIB ? "iib" : "fixed"}});
    }
  }
  if (config.simulation) {
    const auto& sim = *config.simulation;
    out["simulation"] = {{"cells", sim.n.size() * sim.rho.size() * sim.missingness.size()},
                         {"reps", sim.reps},
                         {"estimators", sim.estimators},
                         {"seed", config.options.seed}};
  }
  log << out.dump(2) << "\n";
}

}  // namespace minbo::cli
