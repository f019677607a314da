#pragma once

#include "minbo/pipeline.hpp"
#include "minbo/simulation.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace minbo::cli {

/// One line of the estimate report (one estimator, one coefficient).
struct ReportRow {
  std::string estimator;
  std::string coefficient;
  double estimate = 0, ase = 0, ere = 0;
  double odds_ratio = 0, or_lower = 0, or_upper = 0;  // exp scale
  double ci_lower = 0, ci_upper = 0;                  // natural scale
  double p_value = 0;

  bool operator==(const ReportRow&) const = default;
};

/// MLE rows first, then every scheme in order.
std::vector<ReportRow> report_rows(const AnalysisResult& result,
                                   const std::vector<std::string>& coefficients);

std::string estimate_csv(const std::vector<ReportRow>& rows);
/// Rows plus dataset diagnostics, IIB values and resolved scheme weights.
std::string estimate_json(const AnalysisResult& result, const std::vector<ReportRow>& rows,
                          const std::vector<std::string>& dataset_names);

std::vector<ReportRow> parse_estimate_csv(std::string_view text);
std::vector<ReportRow> parse_estimate_json(std::string_view text);

/// The per-cell simulation table exactly as written: Bias, MCSD and ASE are
/// multiplied by 100, CP is a percentage.
struct SummaryRow {
  std::string estimator;
  std::string coefficient;
  double bias = 0, mcsd = 0, ase = 0, cp = 0, ere = 0;

  bool operator==(const SummaryRow&) const = default;
};

struct SummaryTable {
  bool has_spread = true;  // MCSD and ERE columns present
  std::vector<SummaryRow> rows;

  bool operator==(const SummaryTable&) const = default;
};

SummaryTable summary_table(const MonteCarloSummary& summary);
/// 17 significant digits; parse_summary_csv inverts it exactly.
std::string summary_csv(const SummaryTable& table);
/// 4 significant digits for reading.
std::string summary_human_csv(const SummaryTable& table);
SummaryTable parse_summary_csv(std::string_view text);

/// File stem for one grid cell, e.g. "n600_rho0.8_full".
std::string cell_stem(const SimulationConfig& cell);

struct ManifestCell {
  std::string file;
  SimulationConfig config;
  MonteCarloSummary summary;
  std::string error;  // set when the cell produced no summary
};

std::string manifest_json(const std::vector<ManifestCell>& cells, std::uint64_t seed);

/// {"error": {"code": ..., "message": ...}}
std::string error_json(std::string_view code, std::string_view message);

}  // namespace minbo::cli
