#include "minbo/cli/config.hpp"

#include "minbo/cli/csv.hpp"
#include "minbo/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <set>
#include <sstream>

namespace minbo::cli {

namespace {

using Entries = std::vector<std::pair<std::string, std::string>>;

struct Section {
  std::string name;
  Entries entries;
  std::size_t line = 0;
};

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<Section> parse_ini(std::string_view text) {
  std::vector<Section> sections;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']') config_error("line " + std::to_string(line_no) + ": unterminated section header");
      sections.push_back({trim(std::string_view(line).substr(1, line.size() - 2)), {}, line_no});
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      config_error("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    if (sections.empty()) config_error("line " + std::to_string(line_no) + ": key outside any section");
    sections.back().entries.emplace_back(trim(std::string_view(line).substr(0, eq)),
                                         trim(std::string_view(line).substr(eq + 1)));
    if (start > text.size()) break;
  }
  return sections;
}

std::string json_scalar(const nlohmann::ordered_json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  if (v.is_number_unsigned()) return std::to_string(v.get<unsigned long long>());
  if (v.is_number()) return format_number(v.get<double>());
  config_error("unsupported JSON value " + v.dump());
}

std::string json_value(const nlohmann::ordered_json& v) {
  if (!v.is_array()) return json_scalar(v);
  std::string out;
  bool rows = false;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i].is_array()) {
      rows = true;
      if (i) out += "; ";
      for (std::size_t j = 0; j < v[i].size(); ++j) out += (j ? ", " : "") + json_scalar(v[i][j]);
    } else {
      if (rows) config_error("mixed nested and flat arrays in " + v.dump());
      out += (i ? ", " : "") + json_scalar(v[i]);
    }
  }
  return out;
}

std::vector<Section> parse_json(std::string_view text) {
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("config JSON: ") + e.what());
  }
  if (!doc.is_object()) config_error("config JSON must be an object");
  std::vector<Section> sections;
  auto add = [&](const std::string& name, const nlohmann::ordered_json& obj) {
    if (!obj.is_object()) config_error("section '" + name + "' must be an object");
    Section s{name, {}, 0};
    for (const auto& [k, v] : obj.items()) s.entries.emplace_back(k, json_value(v));
    sections.push_back(std::move(s));
  };
  for (const auto& [key, value] : doc.items()) {
    if (key == "secondary" || key == "scheme") {
      if (!value.is_object()) config_error("'" + key + "' must map names to objects");
      for (const auto& [name, obj] : value.items()) add(key + "." + name, obj);
    } else {
      add(key, value);
    }
  }
  return sections;
}

class Reader {
 public:
  explicit Reader(const Section& s) : s_(s) {
    for (const auto& [k, v] : s.entries) {
      if (!seen_.insert(k).second) config_error(where() + "duplicate key '" + k + "'");
    }
  }

  const std::string* find(const std::string& key) {
    used_.insert(key);
    for (const auto& [k, v] : s_.entries) {
      if (k == key) return &v;
    }
    return nullptr;
  }

  void str(const std::string& key, std::string& out) {
    if (const auto* v = find(key)) out = *v;
  }

  void list(const std::string& key, std::vector<std::string>& out) {
    if (const auto* v = find(key)) {
      out.clear();
      if (v->empty()) return;
      for (auto& item : split(*v, ',')) {
        if (item.empty()) config_error(where() + "empty entry in '" + key + "'");
        out.push_back(std::move(item));
      }
    }
  }

  double to_double(const std::string& key, const std::string& text) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = first + text.size();
    if (first < last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, v);
    if (first == last || res.ec != std::errc() || res.ptr != last || !std::isfinite(v)) {
      config_error(where() + "'" + key + "' expects a number, got '" + text + "'");
    }
    return v;
  }

  long to_long(const std::string& key, const std::string& text) {
    long v = 0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc() || res.ptr != text.data() + text.size()) {
      config_error(where() + "'" + key + "' expects an integer, got '" + text + "'");
    }
    return v;
  }

  void num(const std::string& key, double& out) {
    if (const auto* v = find(key)) out = to_double(key, *v);
  }

  template <class Int>
  void integer(const std::string& key, Int& out) {
    if (const auto* v = find(key)) {
      const long x = to_long(key, *v);
      if (x < 0 && std::is_unsigned_v<Int>) config_error(where() + "'" + key + "' must be nonnegative");
      out = static_cast<Int>(x);
    }
  }

  void seed(const std::string& key, std::uint64_t& out) {
    if (const auto* v = find(key)) {
      std::uint64_t x = 0;
      const auto res = std::from_chars(v->data(), v->data() + v->size(), x);
      if (v->empty() || res.ec != std::errc() || res.ptr != v->data() + v->size()) {
        config_error(where() + "'" + key + "' expects an unsigned 64-bit integer, got '" + *v + "'");
      }
      out = x;
    }
  }

  void flag(const std::string& key, bool& out) {
    if (const auto* v = find(key)) {
      if (*v == "true" || *v == "1" || *v == "yes") out = true;
      else if (*v == "false" || *v == "0" || *v == "no") out = false;
      else config_error(where() + "'" + key + "' expects true or false, got '" + *v + "'");
    }
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (const auto* v = find(key)) {
      out.clear();
      if (v->empty()) return;
      for (const auto& item : split(*v, ',')) out.push_back(to_double(key, item));
    }
  }

  void longs(const std::string& key, std::vector<long>& out) {
    if (const auto* v = find(key)) {
      out.clear();
      for (const auto& item : split(*v, ',')) out.push_back(to_long(key, item));
    }
  }

  void rows(const std::string& key, std::vector<std::vector<double>>& out) {
    if (const auto* v = find(key)) {
      out.clear();
      for (const auto& row : split(*v, ';')) {
        std::vector<double> r;
        for (const auto& item : split(row, ',')) r.push_back(to_double(key, item));
        out.push_back(std::move(r));
      }
    }
  }

  void finish() {
    for (const auto& [k, v] : s_.entries) {
      if (!used_.count(k)) config_error(where() + "unknown key '" + k + "'");
    }
  }

 private:
  std::string where() const {
    return "[" + s_.name + "]" + (s_.line ? " (line " + std::to_string(s_.line) + ")" : "") + ": ";
  }

  const Section& s_;
  std::set<std::string> seen_, used_;
};

Config build(const std::vector<Section>& sections) {
  Config c;
  std::set<std::string> names;
  for (const auto& s : sections) {
    if (!names.insert(s.name).second) config_error("section [" + s.name + "] appears twice");
    Reader r(s);
    if (s.name == "main") {
      MainSection m;
      r.str("file", m.file);
      r.str("id", m.id);
      r.str("outcome", m.outcome);
      r.list("covariates", m.covariates);
      c.main = m;
    } else if (s.name.rfind("secondary.", 0) == 0) {
      SecondarySection d;
      d.name = s.name.substr(10);
      if (d.name.empty()) config_error("secondary section needs a name: [secondary.NAME]");
      r.str("file", d.file);
      r.str("kind", d.kind);
      r.str("id", d.id);
      r.str("time", d.time);
      r.str("outcome", d.outcome);
      r.list("covariates", d.covariates);
      r.list("redundant", d.redundant);
      r.flag("intercept", d.intercept);
      r.list("basis", d.basis);
      r.str("link", d.link);
      r.str("variance_mode", d.variance_mode);
      c.secondary.push_back(std::move(d));
    } else if (s.name.rfind("scheme.", 0) == 0) {
      SchemeSection sc;
      sc.name = s.name.substr(7);
      if (sc.name.empty()) config_error("scheme section needs a name: [scheme.NAME]");
      r.str("kind", sc.kind);
      r.list("datasets", sc.datasets);
      r.rows("omega", sc.omega);
      r.str("weight_mode", sc.weight_mode);
      r.numbers("weights", sc.weights);
      c.schemes.push_back(std::move(sc));
    } else if (s.name == "output") {
      r.str("format", c.output.format);
      r.str("path", c.output.path);
    } else if (s.name == "options") {
      auto& o = c.options;
      r.num("confidence", o.confidence);
      r.num("lambda_tol", o.lambda_tol);
      r.num("theta_tol", o.theta_tol);
      r.num("beta_tol", o.beta_tol);
      r.integer("max_inner", o.max_inner);
      r.integer("max_outer", o.max_outer);
      r.integer("max_newton", o.max_newton);
      r.integer("threads", o.threads);
      r.seed("seed", o.seed);
    } else if (s.name == "simulation") {
      SimulationSection sim;
      r.longs("n", sim.n);
      r.numbers("rho", sim.rho);
      r.list("missingness", sim.missingness);
      r.numbers("eta", sim.eta);
      r.numbers("alpha", sim.alpha);
      r.flag("misspecified", sim.misspecified);
      r.str("variance_mode", sim.variance_mode);
      r.integer("reps", sim.reps);
      r.list("estimators", sim.estimators);
      c.simulation = sim;
    } else {
      config_error("unknown section [" + s.name + "]");
    }
    r.finish();
  }
  return c;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + v[i];
  return out;
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_number(v[i]);
  return out;
}

std::string join(const std::vector<long>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? ", " : "") + std::to_string(v[i]);
  return out;
}

VarianceMode variance_mode_from(const std::string& s, const std::string& where) {
  if (s == "residual") return VarianceMode::PreliminaryResidual;
  if (s == "unit") return VarianceMode::Unit;
  config_error(where + ": variance_mode must be residual or unit, got '" + s + "'");
}

}  // namespace

Config parse_config(std::string_view text, bool json) {
  return build(json ? parse_json(text) : parse_ini(text));
}

Config load_config(const std::string& path) {
  const std::filesystem::path p(path);
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
  Config c = parse_config(read_file(path), ext == ".json");
  c.base_dir = p.has_parent_path() ? p.parent_path().string() : ".";
  if (const char* env = std::getenv("MINBO_SEED"); env && *env) {
    std::uint64_t seed = 0;
    const std::string s(env);
    const auto res = std::from_chars(s.data(), s.data() + s.size(), seed);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
      config_error("MINBO_SEED must be an unsigned integer, got '" + s + "'");
    }
    c.options.seed = seed;
  }
  return c;
}

std::string serialize_config(const Config& c) {
  std::ostringstream out;
  if (c.main) {
    out << "[main]\n"
        << "file = " << c.main->file << "\n"
        << "id = " << c.main->id << "\n"
        << "outcome = " << c.main->outcome << "\n"
        << "covariates = " << join(c.main->covariates) << "\n\n";
  }
  for (const auto& d : c.secondary) {
    out << "[secondary." << d.name << "]\n"
        << "file = " << d.file << "\n"
        << "kind = " << d.kind << "\n"
        << "id = " << d.id << "\n"
        << "time = " << d.time << "\n"
        << "outcome = " << d.outcome << "\n"
        << "covariates = " << join(d.covariates) << "\n"
        << "redundant = " << join(d.redundant) << "\n"
        << "intercept = " << (d.intercept ? "true" : "false") << "\n"
        << "basis = " << join(d.basis) << "\n"
        << "link = " << d.link << "\n"
        << "variance_mode = " << d.variance_mode << "\n\n";
  }
  for (const auto& s : c.schemes) {
    out << "[scheme." << s.name << "]\n"
        << "kind = " << s.kind << "\n"
        << "datasets = " << join(s.datasets) << "\n";
    if (!s.omega.empty()) {
      out << "omega = ";
      for (std::size_t i = 0; i < s.omega.size(); ++i) out << (i ? "; " : "") << join(s.omega[i]);
      out << "\n";
    }
    out << "weight_mode = " << s.weight_mode << "\n"
        << "weights = " << join(s.weights) << "\n\n";
  }
  out << "[output]\n"
      << "format = " << c.output.format << "\n"
      << "path = " << c.output.path << "\n\n";
  const auto& o = c.options;
  out << "[options]\n"
      << "confidence = " << format_number(o.confidence) << "\n"
      << "lambda_tol = " << format_number(o.lambda_tol) << "\n"
      << "theta_tol = " << format_number(o.theta_tol) << "\n"
      << "beta_tol = " << format_number(o.beta_tol) << "\n"
      << "max_inner = " << o.max_inner << "\n"
      << "max_outer = " << o.max_outer << "\n"
      << "max_newton = " << o.max_newton << "\n"
      << "threads = " << o.threads << "\n"
      << "seed = " << o.seed << "\n";
  if (c.simulation) {
    const auto& s = *c.simulation;
    out << "\n[simulation]\n"
        << "n = " << join(s.n) << "\n"
        << "rho = " << join(s.rho) << "\n"
        << "missingness = " << join(s.missingness) << "\n"
        << "eta = " << join(s.eta) << "\n"
        << "alpha = " << join(s.alpha) << "\n"
        << "misspecified = " << (s.misspecified ? "true" : "false") << "\n"
        << "variance_mode = " << s.variance_mode << "\n"
        << "reps = " << s.reps << "\n"
        << "estimators = " << join(s.estimators) << "\n";
  }
  return out.str();
}

void validate_config(const Config& c) {
  const auto& o = c.options;
  if (!(o.confidence > 0.0 && o.confidence < 1.0)) config_error("[options] confidence must lie in (0, 1)");
  if (!(o.lambda_tol > 0.0) || !(o.theta_tol > 0.0) || !(o.beta_tol > 0.0)) {
    config_error("[options] tolerances must be positive");
  }
  if (o.max_inner < 1 || o.max_outer < 1 || o.max_newton < 1) {
    config_error("[options] iteration limits must be at least 1");
  }
  if (c.output.format != "json" && c.output.format != "csv") {
    config_error("[output] format must be json or csv, got '" + c.output.format + "'");
  }

  std::set<std::string> names;
  for (const auto& d : c.secondary) {
    const std::string where = "[secondary." + d.name + "]";
    if (!names.insert(d.name).second) config_error(where + " defined twice");
    if (d.file.empty()) config_error(where + " needs a file");
    variance_mode_from(d.variance_mode, where);
    if (d.kind == "longitudinal") {
      if (!d.link.empty() && d.link != "identity") {
        config_error(where + ": longitudinal working models use the identity link");
      }
      if (!d.redundant.empty()) config_error(where + ": redundant covariates apply to cross_sectional data");
      if (d.basis.empty()) config_error(where + ": basis must name at least one matrix");
      for (const auto& b : d.basis) {
        if (b != "identity" && b != "exchangeable" && b != "band1" && b != "corners") {
          config_error(where + ": unknown basis '" + b + "' (identity, exchangeable, band1, corners)");
        }
      }
    } else if (d.kind == "cross_sectional") {
      if (!d.link.empty() && d.link != "logit" && d.link != "identity") {
        config_error(where + ": link must be logit or identity");
      }
      if (d.redundant.empty()) config_error(where + ": cross_sectional data need redundant covariates");
    } else {
      config_error(where + ": kind must be longitudinal or cross_sectional, got '" + d.kind + "'");
    }
    if (d.covariates.empty() && !d.intercept) config_error(where + ": no covariates and no intercept");
  }
  if (c.main) {
    if (c.main->file.empty()) config_error("[main] needs a file");
    if (c.secondary.empty()) config_error("estimation needs at least one [secondary.NAME] section");
  }
  for (const auto& s : c.schemes) {
    const std::string where = "[scheme." + s.name + "]";
    for (const auto& d : s.datasets) {
      if (!names.count(d)) config_error(where + ": unknown dataset '" + d + "'");
    }
    if (s.weight_mode != "iib" && s.weight_mode != "fixed") {
      config_error(where + ": weight_mode must be iib or fixed");
    }
    if (s.kind == "custom") {
      if (s.omega.empty()) config_error(where + ": custom schemes need omega rows");
      for (const auto& row : s.omega) {
        if (row.size() != c.secondary.size()) {
          config_error(where + ": each omega row needs one entry per secondary dataset");
        }
      }
    } else if (s.kind != "averaging" && s.kind != "aggregating") {
      config_error(where + ": kind must be averaging, aggregating or custom");
    }
    if (!s.weights.empty()) {
      if (s.kind != "averaging" || s.weight_mode != "fixed") {
        config_error(where + ": weights apply to averaging schemes with weight_mode = fixed");
      }
      const std::size_t used = s.datasets.empty() ? c.secondary.size() : s.datasets.size();
      if (s.weights.size() != used) config_error(where + ": one weight per dataset is required");
    }
  }
  if (c.main) scheme_specs(c);  // weight validation

  if (c.simulation) {
    const auto& s = *c.simulation;
    if (s.n.empty() || s.rho.empty() || s.missingness.empty()) {
      config_error("[simulation] n, rho and missingness need at least one value");
    }
    for (long n : s.n) {
      for (double rho : s.rho) {
        for (const auto& m : s.missingness) simulation_cell(c, n, rho, m).validate();
      }
    }
  }
}

std::string resolve_path(const Config& config, const std::string& path) {
  const std::filesystem::path p(path);
  if (p.is_absolute() || config.base_dir.empty()) return path;
  return (std::filesystem::path(config.base_dir) / p).lexically_normal().string();
}

std::vector<SchemeSpec> scheme_specs(const Config& c) {
  const auto k = static_cast<Index>(c.secondary.size());
  auto index_of = [&](const std::string& name) -> Index {
    for (Index m = 0; m < k; ++m) {
      if (c.secondary[static_cast<std::size_t>(m)].name == name) return m;
    }
    config_error("unknown dataset '" + name + "'");
  };
  std::vector<SchemeSpec> out;
  for (const auto& s : c.schemes) {
    std::vector<Index> ds;
    for (const auto& name : s.datasets) ds.push_back(index_of(name));
    if (ds.empty()) {
      for (Index m = 0; m < k; ++m) ds.push_back(m);
    }
    const WeightMode mode = s.weight_mode == "iib" ? WeightMode::IIB : WeightMode::Fixed;
    SchemeSpec spec;
    try {
      if (s.kind == "custom") {
        Matrix w(static_cast<Index>(s.omega.size()), k);
        for (std::size_t row = 0; row < s.omega.size(); ++row) {
          if (s.omega[row].size() != static_cast<std::size_t>(k)) {
            config_error("[scheme." + s.name + "]: each omega row needs one entry per secondary dataset");
          }
          for (Index m = 0; m < k; ++m) w(static_cast<Index>(row), m) = s.omega[row][static_cast<std::size_t>(m)];
        }
        spec = build_scheme(w, mode);
      } else if (s.kind == "aggregating") {
        spec = aggregating_over(k, ds);
      } else if (!s.weights.empty()) {
        Matrix w = Matrix::Zero(1, k);
        for (std::size_t j = 0; j < ds.size(); ++j) w(0, ds[j]) = s.weights[j];
        spec = build_scheme(w, WeightMode::Fixed);
      } else {
        spec = averaging_over(k, ds, mode);
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ConfigError) throw;
      throw Error(e.code(), "[scheme." + s.name + "]: " + e.what());
    }
    spec.label = s.name;
    out.push_back(std::move(spec));
  }
  return out;
}

SimulationConfig simulation_cell(const Config& c, long n, double rho, const std::string& missingness) {
  if (!c.simulation) config_error("config has no [simulation] section");
  const auto& s = *c.simulation;
  SimulationConfig sim;
  sim.n = n;
  sim.rho = rho;
  sim.missingness = missingness_from_string(missingness);
  sim.eta = Eigen::Map<const Vector>(s.eta.data(), static_cast<Index>(s.eta.size()));
  sim.alpha = Eigen::Map<const Vector>(s.alpha.data(), static_cast<Index>(s.alpha.size()));
  sim.misspecified = s.misspecified;
  sim.reps = s.reps;
  sim.seed = c.options.seed;
  sim.estimators = s.estimators;
  sim.variance_mode = variance_mode_from(s.variance_mode, "[simulation]");
  sim.confidence = c.options.confidence;
  return sim;
}

}  // namespace minbo::cli
