#pragma once

#include "minbo/cli/config.hpp"
#include "minbo/cli/datasets.hpp"
#include "minbo/cli/reports.hpp"

#include <iosfwd>
#include <string>

namespace minbo::cli {

AnalysisOptions analysis_options(const Config& config);

/// Schemes from the config; with none configured, IIB averaging and
/// aggregating over every secondary dataset.
std::vector<SchemeSpec> requested_schemes(const Config& config);

struct EstimateRun {
  LoadedData data;
  AnalysisResult result;
  std::vector<ReportRow> rows;
};

EstimateRun run_estimate(const Config& config);

/// Fits and writes the report to `out` (or [output] path; stdout when both
/// are empty). The format follows a .csv/.json extension, else [output] format.
void cmd_estimate(const std::string& config_path, const std::string& out, std::ostream& log);

/// Runs every (n, rho, missingness) cell of [simulation] and writes
/// <stem>.csv, <stem>_table.csv and manifest.json into `out_dir` (or
/// [output] path, or the current directory). threads < 0 takes the config value.
/// Throws TooManyFailures after writing outputs when any cell failed too often.
void cmd_simulate(const std::string& config_path, int threads, const std::string& out_dir,
                  std::ostream& log);

/// Parses and checks the config, loads data when [main] is present, and
/// prints a JSON summary to `log`.
void cmd_validate(const std::string& config_path, std::ostream& log);

}  // namespace minbo::cli
