#include "minbo/cli/datasets.hpp"

#include "minbo/cli/csv.hpp"
#include "minbo/error.hpp"

#include <algorithm>
#include <map>
#include <unordered_map>

namespace minbo::cli {

namespace {

Matrix basis_matrix(const std::string& name, Index m) {
  const auto all = default_basis(m);
  if (name == "identity") return all[0];
  if (name == "exchangeable") return all[1];
  if (name == "band1") return all[2];
  if (name == "corners") return all[3];
  throw Error(ErrorCode::ConfigError, "unknown basis '" + name + "'");
}

std::vector<std::size_t> columns(const CsvTable& t, const std::vector<std::string>& names) {
  std::vector<std::size_t> out;
  for (const auto& n : names) out.push_back(t.column(n));
  return out;
}

}  // namespace

WorkingModelSpec working_spec(const SecondarySection& s, Index r, Index m) {
  const VarianceMode mode = s.variance_mode == "unit" ? VarianceMode::Unit : VarianceMode::PreliminaryResidual;
  if (s.kind == "longitudinal") {
    std::vector<Matrix> basis;
    for (const auto& b : s.basis) basis.push_back(basis_matrix(b, m));
    return longitudinal_spec(r, std::move(basis), mode);
  }
  WorkingModelSpec spec = cross_sectional_spec(r);
  spec.link = s.link == "identity" ? Link::Identity : Link::Logit;
  return spec;
}

LoadedData load_datasets(const Config& config) {
  if (!config.main) throw Error(ErrorCode::ConfigError, "config has no [main] section");
  LoadedData out;
  const auto& mc = *config.main;

  const CsvTable main = read_csv(resolve_path(config, mc.file));
  const std::size_t id_col = main.column(mc.id);
  const std::size_t y_col = main.column(mc.outcome);
  const auto x_cols = columns(main, mc.covariates);
  const auto n = static_cast<Index>(main.rows.size());
  if (n == 0) throw Error(ErrorCode::ParseError, main.source + ": no subjects");

  std::unordered_map<std::string, Index> index;
  Vector y(n);
  Matrix x(n, static_cast<Index>(x_cols.size()) + 1);
  for (Index i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const std::string& id = main.rows[ui][id_col];
    if (!index.emplace(id, i).second) {
      throw Error(ErrorCode::ParseError, main.source + ":" + std::to_string(ui + 2) +
                                             ": duplicate subject id '" + id + "'");
    }
    out.ids.push_back(id);
    y[i] = main.number(ui, y_col);
    if (y[i] != 0.0 && y[i] != 1.0) {
      throw Error(ErrorCode::ParseError, main.source + ":" + std::to_string(ui + 2) + ":" +
                                             std::to_string(y_col + 1) + ": outcome must be 0 or 1");
    }
    x(i, 0) = 1.0;
    for (std::size_t j = 0; j < x_cols.size(); ++j) {
      x(i, static_cast<Index>(j) + 1) = main.number(ui, x_cols[j]);
    }
  }
  out.coefficients.push_back("(Intercept)");
  for (const auto& c : mc.covariates) out.coefficients.push_back(c);
  out.input.main = MainDataset::create(std::move(y), std::move(x));

  auto lookup = [&](const CsvTable& t, std::size_t row, std::size_t col) -> Index {
    const std::string& id = t.rows[row][col];
    const auto it = index.find(id);
    if (it == index.end()) {
      throw Error(ErrorCode::UnknownSubject,
                  t.source + ":" + std::to_string(row + 2) + ": subject '" + id + "' is not in the main file");
    }
    return it->second;
  };

  for (const auto& sc : config.secondary) {
    const CsvTable t = read_csv(resolve_path(config, sc.file));
    const std::size_t sid = t.column(sc.id);
    const std::size_t sy = t.column(sc.outcome);
    const auto sx = columns(t, sc.covariates);
    const Index r = static_cast<Index>(sx.size()) + (sc.intercept ? 1 : 0);
    std::vector<std::uint8_t> observed(static_cast<std::size_t>(n), 0);
    auto fill_row = [&](auto&& dest, std::size_t row) {
      Index j = 0;
      if (sc.intercept) dest(j++) = 1.0;
      for (std::size_t c : sx) dest(j++) = t.number(row, c);
    };

    if (sc.kind == "longitudinal") {
      const std::size_t st = t.column(sc.time);
      // subject -> (time, row), sorted by time below
      std::map<Index, std::vector<std::pair<double, std::size_t>>> visits;
      for (std::size_t row = 0; row < t.rows.size(); ++row) {
        visits[lookup(t, row, sid)].emplace_back(t.number(row, st), row);
      }
      Index m = 0;
      for (const auto& [i, v] : visits) m = std::max<Index>(m, static_cast<Index>(v.size()));
      Matrix ys = Matrix::Zero(n, m);
      Matrix xs = Matrix::Zero(n * m, r);
      for (auto& [i, v] : visits) {
        const std::string& id = out.ids[static_cast<std::size_t>(i)];
        if (static_cast<Index>(v.size()) != m) {
          throw Error(ErrorCode::UnbalancedLongitudinal,
                      t.source + ": subject '" + id + "' has " + std::to_string(v.size()) +
                          " visits, expected " + std::to_string(m));
        }
        std::stable_sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (std::size_t k = 1; k < v.size(); ++k) {
          if (v[k].first == v[k - 1].first) {
            throw Error(ErrorCode::UnbalancedLongitudinal,
                        t.source + ": subject '" + id + "' repeats time " + format_number(v[k].first));
          }
        }
        for (Index k = 0; k < m; ++k) {
          const std::size_t row = v[static_cast<std::size_t>(k)].second;
          ys(i, k) = t.number(row, sy);
          fill_row([&](Index j) -> double& { return xs(i * m + k, j); }, row);
        }
        observed[static_cast<std::size_t>(i)] = 1;
      }
      if (m == 0) throw Error(ErrorCode::ParseError, t.source + ": no visits");
      out.input.secondary.push_back(SecondaryDataset::longitudinal(std::move(ys), std::move(xs), observed));
      out.input.specs.push_back(working_spec(sc, r, m));
    } else {
      const auto sz = columns(t, sc.redundant);
      Vector ys = Vector::Zero(n);
      Matrix xs = Matrix::Zero(n, r);
      Matrix zs = Matrix::Zero(n, static_cast<Index>(sz.size()));
      for (std::size_t row = 0; row < t.rows.size(); ++row) {
        const Index i = lookup(t, row, sid);
        if (observed[static_cast<std::size_t>(i)]) {
          throw Error(ErrorCode::ParseError, t.source + ":" + std::to_string(row + 2) +
                                                 ": duplicate subject id '" + t.rows[row][sid] + "'");
        }
        observed[static_cast<std::size_t>(i)] = 1;
        ys[i] = t.number(row, sy);
        fill_row([&](Index j) -> double& { return xs(i, j); }, row);
        for (std::size_t j = 0; j < sz.size(); ++j) zs(i, static_cast<Index>(j)) = t.number(row, sz[j]);
      }
      out.input.secondary.push_back(
          SecondaryDataset::cross_sectional(std::move(ys), std::move(xs), std::move(zs), observed));
      out.input.specs.push_back(working_spec(sc, r, 1));
    }
    out.input.names.push_back(sc.name);
  }
  return out;
}

}  // namespace minbo::cli
