#include "minbo/cli/reports.hpp"

#include "minbo/cli/csv.hpp"
#include "minbo/error.hpp"

#include <json.hpp>

#include <cmath>
#include <sstream>

namespace minbo::cli {

namespace {

const char* const kEstimateHeader[] = {"Estimator", "Coefficient", "Estimate", "ASE",
                                       "ERE",       "OR",          "LL",       "UL",
                                       "CI_Lower",  "CI_Upper",    "PValue"};

std::string quote(std::string_view s) { return nlohmann::json(std::string(s)).dump(); }

// JSON has no infinities or NaN; they never occur in reports, but keep the
// output valid if one slips through.
std::string jnum(double v) { return std::isfinite(v) ? format_number(v) : "null"; }

std::string jarray(const Vector& v) {
  std::string out = "[";
  for (Index i = 0; i < v.size(); ++i) out += (i ? ", " : "") + jnum(v[i]);
  return out + "]";
}

void append_rows(const EstimateReport& rep, const std::vector<std::string>& names,
                 std::vector<ReportRow>& out) {
  for (Index j = 0; j < rep.beta.size(); ++j) {
    ReportRow r;
    r.estimator = rep.label;
    r.coefficient = static_cast<std::size_t>(j) < names.size() ? names[static_cast<std::size_t>(j)]
                                                               : "beta" + std::to_string(j);
    r.estimate = rep.beta[j];
    r.ase = rep.ase[j];
    r.ere = rep.ere.size() ? rep.ere[j] : 1.0;
    r.odds_ratio = std::exp(rep.beta[j]);
    r.or_lower = std::exp(rep.ci_lower[j]);
    r.or_upper = std::exp(rep.ci_upper[j]);
    r.ci_lower = rep.ci_lower[j];
    r.ci_upper = rep.ci_upper[j];
    r.p_value = rep.p_value[j];
    out.push_back(std::move(r));
  }
}

[[noreturn]] void bad_report(const std::string& what) { throw Error(ErrorCode::ParseError, what); }

}  // namespace

std::vector<ReportRow> report_rows(const AnalysisResult& result,
                                   const std::vector<std::string>& coefficients) {
  std::vector<ReportRow> rows;
  append_rows(result.mle_report, coefficients, rows);
  for (const auto& s : result.schemes) append_rows(s.report, coefficients, rows);
  return rows;
}

std::string estimate_csv(const std::vector<ReportRow>& rows) {
  std::string out;
  for (std::size_t j = 0; j < std::size(kEstimateHeader); ++j) out += (j ? "," : "") + std::string(kEstimateHeader[j]);
  out += "\n";
  for (const auto& r : rows) {
    out += csv_field(r.estimator) + "," + csv_field(r.coefficient);
    for (double v : {r.estimate, r.ase, r.ere, r.odds_ratio, r.or_lower, r.or_upper, r.ci_lower,
                     r.ci_upper, r.p_value}) {
      out += "," + format_number(v);
    }
    out += "\n";
  }
  return out;
}

std::string estimate_json(const AnalysisResult& result, const std::vector<ReportRow>& rows,
                          const std::vector<std::string>& dataset_names) {
  std::ostringstream o;
  o << "{\n  \"command\": \"estimate\",\n"
    << "  \"n\": " << result.mle_report.n << ",\n"
    << "  \"confidence\": " << jnum(result.mle_report.confidence) << ",\n"
    << "  \"datasets\": [";
  for (std::size_t k = 0; k < result.fits.size(); ++k) {
    const ELFit& f = result.fits[k];
    o << (k ? ",\n" : "\n") << "    {\"name\": "
      << quote(k < dataset_names.size() ? dataset_names[k] : "D" + std::to_string(k + 1))
      << ", \"moments\": " << f.h.rows() << ", \"theta\": " << jarray(f.theta)
      << ", \"no_information\": " << (f.no_information ? "true" : "false")
      << ", \"outer_iterations\": " << f.outer_iterations
      << ", \"constraint_residual\": " << jnum(f.constraint_residual)
      << ", \"theta_residual\": " << jnum(f.theta_residual) << "}";
  }
  o << "\n  ],\n  \"iib\": " << jarray(result.iib) << ",\n  \"schemes\": [";
  for (std::size_t s = 0; s < result.schemes.size(); ++s) {
    const auto& sr = result.schemes[s];
    o << (s ? ",\n" : "\n") << "    {\"label\": " << quote(sr.resolved.label)
      << ", \"weight_mode\": " << quote(sr.requested.mode == WeightMode::IIB ? "iib" : "fixed")
      << ", \"omega\": [";
    for (Index row = 0; row < sr.resolved.omega.rows(); ++row) {
      o << (row ? ", " : "") << jarray(sr.resolved.omega.row(row).transpose());
    }
    o << "], \"iterations\": " << sr.solution.iterations << "}";
  }
  o << "\n  ],\n  \"rows\": [";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    o << (i ? ",\n" : "\n") << "    {\"Estimator\": " << quote(r.estimator)
      << ", \"Coefficient\": " << quote(r.coefficient) << ", \"Estimate\": " << jnum(r.estimate)
      << ", \"ASE\": " << jnum(r.ase) << ", \"ERE\": " << jnum(r.ere)
      << ", \"OR\": " << jnum(r.odds_ratio) << ", \"LL\": " << jnum(r.or_lower)
      << ", \"UL\": " << jnum(r.or_upper) << ", \"CI_Lower\": " << jnum(r.ci_lower)
      << ", \"CI_Upper\": " << jnum(r.ci_upper) << ", \"PValue\": " << jnum(r.p_value) << "}";
  }
  o << "\n  ]\n}\n";
  return o.str();
}

std::vector<ReportRow> parse_estimate_csv(std::string_view text) {
  const CsvTable t = parse_csv(text, "<estimate report>");
  std::vector<std::size_t> col;
  for (const char* h : kEstimateHeader) col.push_back(t.column(h));
  std::vector<ReportRow> rows;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    ReportRow r;
    r.estimator = t.rows[i][col[0]];
    r.coefficient = t.rows[i][col[1]];
    double* fields[] = {&r.estimate, &r.ase,      &r.ere,      &r.odds_ratio, &r.or_lower,
                        &r.or_upper, &r.ci_lower, &r.ci_upper, &r.p_value};
    for (std::size_t j = 0; j < std::size(fields); ++j) *fields[j] = t.number(i, col[j + 2]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ReportRow> parse_estimate_json(std::string_view text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    bad_report(std::string("estimate JSON: ") + e.what());
  }
  if (!doc.contains("rows") || !doc["rows"].is_array()) bad_report("estimate JSON: missing rows");
  std::vector<ReportRow> rows;
  for (const auto& j : doc["rows"]) {
    try {
      ReportRow r;
      r.estimator = j.at("Estimator").get<std::string>();
      r.coefficient = j.at("Coefficient").get<std::string>();
      r.estimate = j.at("Estimate").get<double>();
      r.ase = j.at("ASE").get<double>();
      r.ere = j.at("ERE").get<double>();
      r.odds_ratio = j.at("OR").get<double>();
      r.or_lower = j.at("LL").get<double>();
      r.or_upper = j.at("UL").get<double>();
      r.ci_lower = j.at("CI_Lower").get<double>();
      r.ci_upper = j.at("CI_Upper").get<double>();
      r.p_value = j.at("PValue").get<double>();
      rows.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      bad_report(std::string("estimate JSON row: ") + e.what());
    }
  }
  return rows;
}

SummaryTable summary_table(const MonteCarloSummary& summary) {
  SummaryTable t;
  t.has_spread = summary.has_spread;
  for (const auto& e : summary.estimators) {
    for (std::size_t j = 0; j < e.coef.size(); ++j) {
      const auto& c = e.coef[j];
      SummaryRow r;
      r.estimator = e.name;
      r.coefficient = "beta" + std::to_string(j);
      r.bias = 100.0 * c.bias;
      r.mcsd = summary.has_spread ? 100.0 * c.mcsd : 0.0;
      r.ase = 100.0 * c.mean_ase;
      r.cp = c.cp;
      r.ere = summary.has_spread ? c.ere : 0.0;
      t.rows.push_back(std::move(r));
    }
  }
  return t;
}

namespace {

std::string render_summary(const SummaryTable& t, std::string (*fmt)(double)) {
  std::string out = t.has_spread ? "Estimator,Coefficient,Bias,MCSD,ASE,CP,ERE\n"
                                 : "Estimator,Coefficient,Bias,ASE,CP\n";
  for (const auto& r : t.rows) {
    out += csv_field(r.estimator) + "," + csv_field(r.coefficient) + "," + fmt(r.bias) + ",";
    if (t.has_spread) out += fmt(r.mcsd) + ",";
    out += fmt(r.ase) + "," + fmt(r.cp);
    if (t.has_spread) out += "," + fmt(r.ere);
    out += "\n";
  }
  return out;
}

}  // namespace

std::string summary_csv(const SummaryTable& table) { return render_summary(table, format_number); }

std::string summary_human_csv(const SummaryTable& table) { return render_summary(table, format_short); }

SummaryTable parse_summary_csv(std::string_view text) {
  const CsvTable t = parse_csv(text, "<simulation summary>");
  SummaryTable out;
  out.has_spread = t.has_column("MCSD");
  const std::size_t ce = t.column("Estimator"), cc = t.column("Coefficient"), cb = t.column("Bias"),
                    ca = t.column("ASE"), cp = t.column("CP");
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    SummaryRow r;
    r.estimator = t.rows[i][ce];
    r.coefficient = t.rows[i][cc];
    r.bias = t.number(i, cb);
    r.ase = t.number(i, ca);
    r.cp = t.number(i, cp);
    if (out.has_spread) {
      r.mcsd = t.number(i, t.column("MCSD"));
      r.ere = t.number(i, t.column("ERE"));
    }
    out.rows.push_back(std::move(r));
  }
  return out;
}

std::string cell_stem(const SimulationConfig& cell) {
  char rho[32];
  std::snprintf(rho, sizeof rho, "%g", cell.rho);
  return "n" + std::to_string(cell.n) + "_rho" + rho + "_" + to_string(cell.missingness) +
         (cell.misspecified ? "_misspecified" : "");
}

std::string manifest_json(const std::vector<ManifestCell>& cells, std::uint64_t seed) {
  std::ostringstream o;
  o << "{\n  \"command\": \"simulate\",\n  \"seed\": " << seed << ",\n  \"cells\": [";
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const auto& cell = cells[c];
    const auto& s = cell.summary;
    o << (c ? ",\n" : "\n") << "    {\"file\": " << quote(cell.file) << ", \"n\": " << cell.config.n
      << ", \"rho\": " << jnum(cell.config.rho)
      << ", \"missingness\": " << quote(to_string(cell.config.missingness))
      << ", \"misspecified\": " << (cell.config.misspecified ? "true" : "false");
    if (!cell.error.empty()) {
      o << ", \"reps\": " << cell.config.reps << ", \"error\": " << quote(cell.error) << "}";
      continue;
    }
    o << ", \"reps\": " << s.reps << ", \"succeeded\": " << s.succeeded
      << ", \"failure_count\": " << s.failures.size() << ", \"failures\": [";
    for (std::size_t f = 0; f < s.failures.size(); ++f) {
      o << (f ? ", " : "") << "{\"replicate\": " << s.failures[f].first
        << ", \"message\": " << quote(s.failures[f].second) << "}";
    }
    o << "], \"wall_seconds\": " << jnum(s.wall_seconds) << "}";
  }
  o << "\n  ]\n}\n";
  return o.str();
}

std::string error_json(std::string_view code, std::string_view message) {
  return "{\"error\": {\"code\": " + quote(code) + ", \"message\": " + quote(message) + "}}";
}

}  // namespace minbo::cli
