// Acceptance suite: one PASS/FAIL line per criterion.
//
//   acceptance            run every criterion
//   acceptance 3 8        run the listed criteria
//
// Exit status is nonzero when any selected criterion fails.
#include "minbo/cli/commands.hpp"
#include "minbo/cli/csv.hpp"
#include "minbo/error.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <unistd.h>
#include <vector>

using namespace minbo;
namespace fs = std::filesystem;

namespace {

constexpr int kReps = 1000;
constexpr Index kN = 600;

// Collects sub-check results for one criterion.
struct Verdict {
  bool ok = true;
  std::vector<std::string> notes;

  void check(bool cond, const std::string& what) {
    if (!cond) {
      ok = false;
      notes.push_back("FAILED " + what);
    }
  }
  void note(const std::string& what) { notes.push_back(what); }
};

std::string fmt(double v, int digits = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

const char* coef_name(std::size_t j) {
  static const char* names[] = {"beta0", "beta1", "beta2", "beta3"};
  return names[j];
}

MonteCarloSummary run_cell(double rho, Missingness miss, bool misspecified,
                           std::vector<std::string> estimators = SimulationConfig::default_estimators()) {
  SimulationConfig cfg;
  cfg.n = kN;
  cfg.rho = rho;
  cfg.missingness = miss;
  cfg.misspecified = misspecified;
  cfg.reps = kReps;
  cfg.estimators = std::move(estimators);
  const auto s = monte_carlo(cfg, 0);
  std::cout << "  [cell n=" << kN << " rho=" << rho << " " << to_string(miss) << (misspecified ? " misspecified" : "")
            << ": " << s.succeeded << "/" << s.reps << " replicates, " << fmt(s.wall_seconds, 3) << " s]\n";
  return s;
}

const EstimatorSummary& find(const MonteCarloSummary& s, const std::string& name) {
  for (const auto& e : s.estimators)
    if (e.name == name) return e;
  throw std::runtime_error("estimator " + name + " missing from summary");
}

const std::vector<std::string> kMisEstimators = {"ave111", "ave101", "agg111", "agg101", "omn111"};

// ---- criteria --------------------------------------------------------------

// Table 1: bias, coverage and ASE vs MCSD at n = 600, rho = 0.8.
Verdict criterion1() {
  Verdict v;
  for (auto miss : {Missingness::Full, Missingness::MCAR}) {
    const auto s = run_cell(0.8, miss, false);
    double worst_bias = 0, worst_gap = 0, cp_lo = 100, cp_hi = 0;
    for (const auto& e : s.estimators)
      for (std::size_t j = 0; j < 4; ++j) {
        const auto& c = e.coef[j];
        const std::string tag = std::string(to_string(miss)) + " " + e.name + " " + coef_name(j);
        v.check(std::abs(c.bias) <= 0.035, tag + " |bias| " + fmt(std::abs(c.bias)) + " > 0.035");
        v.check(c.cp >= 92 && c.cp <= 97, tag + " CP " + fmt(c.cp) + " outside [92, 97]");
        v.check(std::abs(c.mean_ase - c.mcsd) <= 0.03, tag + " |ASE - MCSD| " + fmt(std::abs(c.mean_ase - c.mcsd)));
        worst_bias = std::max(worst_bias, std::abs(c.bias));
        worst_gap = std::max(worst_gap, std::abs(c.mean_ase - c.mcsd));
        cp_lo = std::min(cp_lo, c.cp);
        cp_hi = std::max(cp_hi, c.cp);
      }
    v.note(std::string(to_string(miss)) + ": max|bias| " + fmt(worst_bias) + ", CP in [" + fmt(cp_lo) + ", " +
           fmt(cp_hi) + "], max|ASE-MCSD| " + fmt(worst_gap));
  }
  return v;
}

// Table 2 spot values and orderings, fully observed.
Verdict criterion2() {
  Verdict v;
  const auto high = run_cell(0.8, Missingness::Full, false);
  const auto none = run_cell(0.0, Missingness::Full, false);
  const double ave110_b1 = find(high, "ave110").coef[1].ere;
  const double agg110_b1_0 = find(none, "agg110").coef[1].ere;
  const double ave110_b1_0 = find(none, "ave110").coef[1].ere;
  const double agg110_b2 = find(high, "agg110").coef[2].ere;
  const double ave110_b2 = find(high, "ave110").coef[2].ere;
  const double ave111_b3 = find(high, "ave111").coef[3].ere;
  v.check(std::abs(ave110_b1 - 1.28) <= 0.12, "ave110 beta1 ERE at rho=0.8: " + fmt(ave110_b1) + " (target 1.28 +- 0.12)");
  v.check(std::abs(agg110_b1_0 - 1.24) <= 0.12, "agg110 beta1 ERE at rho=0: " + fmt(agg110_b1_0) + " (target 1.24 +- 0.12)");
  v.check(agg110_b2 <= 1.10, "agg110 beta2 ERE at rho=0.8: " + fmt(agg110_b2) + " (limit 1.10)");
  v.check(std::abs(ave111_b3 - 1.17) <= 0.12, "ave111 beta3 ERE at rho=0.8: " + fmt(ave111_b3) + " (target 1.17 +- 0.12)");
  v.check(agg110_b1_0 >= ave110_b1_0 - 0.05,
          "ordering agg110 >= ave110 - 0.05 (beta1, rho=0): " + fmt(agg110_b1_0) + " vs " + fmt(ave110_b1_0));
  v.check(ave110_b2 >= agg110_b2 + 0.10,
          "ordering ave110 >= agg110 + 0.10 (beta2, rho=0.8): " + fmt(ave110_b2) + " vs " + fmt(agg110_b2));
  v.note("ave110 b1 " + fmt(ave110_b1) + ", agg110 b1(rho0) " + fmt(agg110_b1_0) + ", ave110 b1(rho0) " +
         fmt(ave110_b1_0) + ", agg110 b2 " + fmt(agg110_b2) + ", ave110 b2 " + fmt(ave110_b2) + ", ave111 b3 " +
         fmt(ave111_b3));
  return v;
}

// Table 3: misspecified working models at rho = 0.4.
Verdict criterion3() {
  Verdict v;
  const auto s = run_cell(0.4, Missingness::Full, true, kMisEstimators);
  for (const char* name : {"ave111", "agg111", "omn111"}) {
    const auto& e = find(s, name);
    for (std::size_t j = 0; j < 4; ++j) {
      const auto& c = e.coef[j];
      const std::string tag = std::string(name) + " " + coef_name(j);
      v.check(std::abs(c.bias) <= 0.035, tag + " |bias| " + fmt(std::abs(c.bias)));
      v.check(c.cp >= 92 && c.cp <= 97, tag + " CP " + fmt(c.cp));
    }
  }
  const double omn = find(s, "omn111").coef[1].ere;
  v.check(std::abs(omn - 1.28) <= 0.12, "omn111 beta1 ERE " + fmt(omn) + " (target 1.28 +- 0.12)");
  v.note("omn111 beta1 ERE " + fmt(omn));
  return v;
}

// Table S5: informative missingness with misspecified working models.
Verdict criterion4() {
  Verdict v;
  const auto s = run_cell(0.4, Missingness::Informative, true, kMisEstimators);
  double min_ere = 1e9, cp_lo = 100, cp_hi = 0;
  for (const auto& e : s.estimators) {
    for (std::size_t j = 0; j < 4; ++j) {
      v.check(e.coef[j].cp >= 92 && e.coef[j].cp <= 97, e.name + " " + coef_name(j) + " CP " + fmt(e.coef[j].cp));
      cp_lo = std::min(cp_lo, e.coef[j].cp);
      cp_hi = std::max(cp_hi, e.coef[j].cp);
    }
    v.check(e.coef[1].ere >= 1.05, e.name + " beta1 ERE " + fmt(e.coef[1].ere) + " < 1.05");
    min_ere = std::min(min_ere, e.coef[1].ere);
  }
  v.note("CP in [" + fmt(cp_lo) + ", " + fmt(cp_hi) + "], min beta1 ERE " + fmt(min_ere));
  return v;
}

Matrix random_matrix(Index rows, Index cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

Matrix random_spd(Index d, RngStream& rng, double shift) {
  const Matrix a = random_matrix(d, d + 2, rng);
  return a * a.transpose() / static_cast<double>(d + 2) + shift * Matrix::Identity(d, d);
}

double rel(const Matrix& a, const Matrix& b) { return (a - b).norm() / b.norm(); }

// Reduction identities on randomized components.
Verdict criterion5() {
  Verdict v;
  RngStream rng(55, 5);
  double worst = 0;
  for (int trial = 0; trial < 50; ++trial) {
    const Index p = 2 + trial % 4, d1 = 3 + trial % 5, d2 = 4 + trial % 3, r = 1 + trial % 2;
    const Matrix gamma = -random_spd(p, rng, 0.5);
    const Matrix sigma = random_spd(p, rng, 0.5);
    const Matrix s11a = random_spd(d1, rng, 0.3), s11b = random_spd(d2, rng, 0.3);
    const Matrix sa = efficiency_matrices(s11a, random_matrix(d1, r, rng)).s;
    const Matrix sb = efficiency_matrices(s11b, random_matrix(d2, r, rng)).s;
    const Matrix la = random_matrix(p, d1, rng) * 0.3, lb = random_matrix(p, d2, rng) * 0.3;
    const Matrix gi = gamma.inverse();
    auto direct = [&](const Matrix& mid) { return Matrix(gi * mid * gi.transpose()); };

    VarianceComponents same;
    same.n = 100;
    same.gamma = gamma;
    same.sigma = sigma;
    same.lambda = {la, la};
    same.s = {sa, sa};
    same.cross = {{s11a, s11a}, {s11a, s11a}};

    VarianceComponents indep = same;
    indep.lambda = {la, lb};
    indep.s = {sa, sb};
    indep.cross = {{s11a, Matrix::Zero(d1, d2)}, {Matrix::Zero(d2, d1), s11b}};

    const double w = rng.uniform();
    const double errs[] = {
        rel(sa * s11a * sa, sa),
        rel(scheme_variance(same, build_scheme((Matrix(1, 2) << w, 1 - w).finished())),
            direct(sigma - la * sa * la.transpose())),
        rel(scheme_variance(same, build_scheme(SchemeKind::Aggregating, 2)), direct(sigma)),
        rel(scheme_variance(indep, build_scheme(SchemeKind::Aggregating, 2)),
            direct(sigma - la * sa * la.transpose() - lb * sb * lb.transpose())),
    };
    for (double e : errs) worst = std::max(worst, e);
  }
  v.check(worst <= 1e-10, "max relative error " + fmt(worst, 3));
  v.note("50 trials, max relative error " + fmt(worst, 3));
  return v;
}

// EL solver oracles and fit invariants.
Verdict criterion6() {
  Verdict v;
  {
    const std::vector<double> hv = {-1.0, -0.2, 0.5, 1.1};
    double lo = -1.0 / 1.1, hi = 1.0;
    for (int it = 0; it < 400; ++it) {
      const double mid = 0.5 * (lo + hi);
      double f = 0;
      for (double h : hv) f += h / (1 + mid * h);
      (f > 0 ? lo : hi) = mid;
    }
    Matrix h(4, 1);
    for (Index i = 0; i < 4; ++i) h(i, 0) = hv[static_cast<std::size_t>(i)];
    const double got = solve_lambda(h, Vector::Zero(1)).lambda[0];
    v.check(std::abs(got - 0.5 * (lo + hi)) <= 1e-10, "lambda vs bisection: " + fmt(std::abs(got - lo), 3));
    v.note("lambda error " + fmt(std::abs(got - 0.5 * (lo + hi)), 3));
  }
  {
    RngStream rng(606, 0);
    const Index n = 30;
    Matrix y(n, 2);
    for (Index i = 0; i < n; ++i) {
      const double u = rng.normal();
      y(i, 0) = 0.6 + u + 0.6 * rng.normal();
      y(i, 1) = 0.6 + 0.5 * u + 0.6 * rng.normal();
    }
    const auto d = SecondaryDataset::longitudinal(y, Matrix::Ones(2 * n, 1), std::vector<std::uint8_t>(n, 1));
    auto spec = longitudinal_spec(1, {(Matrix(2, 2) << 1, 0, 0, 0).finished(), (Matrix(2, 2) << 0, 0, 0, 1).finished()}, VarianceMode::Unit);
    spec.inv_sqrt_variance = Vector::Ones(2);
    const MomentModel model(d, spec);
    const auto fit = fit_el(model, two_step_gmm_init(model));
    double best = 1e300, arg = 0;
    for (int k = -4000; k <= 4000; ++k) {
      const double t = 0.6 + 1e-4 * k;
      const double val = profile_log_el(model, Vector::Constant(1, t));
      if (val < best) {
        best = val;
        arg = t;
      }
    }
    v.check(std::abs(fit.theta[0] - arg) <= 2e-4, "theta vs grid: " + fmt(std::abs(fit.theta[0] - arg), 3));
    v.note("theta grid gap " + fmt(std::abs(fit.theta[0] - arg), 3));
  }
  int fits = 0;
  double worst_resid = 0, worst_norm = 0, min_w = 1;
  struct Scenario {
    Missingness miss;
    bool mis;
    double rho;
  };
  for (const Scenario sc : {Scenario{Missingness::Full, false, 0.8}, Scenario{Missingness::MCAR, false, 0.8},
                            Scenario{Missingness::Full, true, 0.4}, Scenario{Missingness::Informative, true, 0.4}}) {
    SimulationConfig cfg;
    cfg.n = kN;
    cfg.rho = sc.rho;
    cfg.missingness = sc.miss;
    cfg.misspecified = sc.mis;
    for (std::uint64_t rep = 0; rep < 50; ++rep) {
      RngStream rng(cfg.seed, rep);
      const auto in = gen_scenario(cfg, rng);
      for (std::size_t k = 0; k < 3; ++k) {
        const auto spec = prepare_spec(in.secondary[k], in.specs[k]);
        const auto fit = fit_el(in.secondary[k], spec, two_step_gmm_init(in.secondary[k], spec));
        ++fits;
        worst_resid = std::max(worst_resid, (fit.h * fit.weights).cwiseAbs().maxCoeff());
        worst_norm = std::max(worst_norm, std::abs(fit.weights.sum() - 1.0));
        min_w = std::min(min_w, fit.weights.minCoeff());
      }
    }
  }
  v.check(min_w > 0, "non-positive EL weight");
  v.check(worst_norm <= 1e-10, "weight normalization " + fmt(worst_norm, 3));
  v.check(worst_resid <= 1e-8, "constraint residual " + fmt(worst_resid, 3));
  v.note(std::to_string(fits) + " simulated fits, max residual " + fmt(worst_resid, 3) + ", max |sum p - 1| " +
         fmt(worst_norm, 3));
  return v;
}

// Jacobians against central differences.
Verdict criterion7() {
  Verdict v;
  RngStream rng(77, 7);
  const double h = 1e-6;
  double worst_main = 0, worst_h = 0;
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = 50, p = 4;
    Matrix x(n, p);
    Vector y(n);
    for (Index i = 0; i < n; ++i) {
      x(i, 0) = 1;
      for (Index j = 1; j < p; ++j) x(i, j) = rng.normal();
      y[i] = rng.uniform() < 0.5;
    }
    const auto d = MainDataset::create(y, x);
    const Vector beta = random_matrix(p, 1, rng) * 0.5;
    Matrix fd(p, p);
    for (Index j = 0; j < p; ++j) {
      Vector bp = beta, bm = beta;
      bp[j] += h;
      bm[j] -= h;
      fd.col(j) = (main_score(d, bp).colwise().mean() - main_score(d, bm).colwise().mean()).transpose() / (2 * h);
    }
    worst_main = std::max(worst_main, rel(main_score_jacobian(d, beta), fd));
  }
  for (int trial = 0; trial < 20; ++trial) {
    SecondaryDataset d;
    WorkingModelSpec spec;
    Index r = 0;
    if (trial % 2 == 0) {
      const Index n = 8, m = 4;
      r = 4;
      Matrix y(n, m), x(n * m, r);
      for (Index i = 0; i < n * m; ++i) {
        x(i, 0) = 1;
        for (Index j = 1; j < r; ++j) x(i, j) = rng.normal();
      }
      for (Index i = 0; i < n; ++i)
        for (Index t = 0; t < m; ++t) y(i, t) = rng.normal();
      d = SecondaryDataset::longitudinal(y, x, std::vector<std::uint8_t>(n, 1));
      spec = prepare_spec(d, longitudinal_spec(m, r, VarianceMode::PreliminaryResidual));
    } else {
      const Index n = 8;
      r = 3;
      Vector y(n);
      Matrix x(n, r), z(n, 2);
      for (Index i = 0; i < n; ++i) {
        x(i, 0) = 1;
        for (Index j = 1; j < r; ++j) x(i, j) = rng.normal();
        z.row(i) << rng.normal(), rng.normal();
        y[i] = rng.uniform() < 0.5;
      }
      d = SecondaryDataset::cross_sectional(y, x, z, std::vector<std::uint8_t>(n, 1));
      spec = cross_sectional_spec(r);
    }
    const Vector theta = random_matrix(r, 1, rng) * 0.4;
    for (Index i = 0; i < 3; ++i) {
      Matrix fd(h_eval(d, i, theta, spec).size(), r);
      for (Index j = 0; j < r; ++j) {
        Vector tp = theta, tm = theta;
        tp[j] += h;
        tm[j] -= h;
        fd.col(j) = (h_eval(d, i, tp, spec) - h_eval(d, i, tm, spec)) / (2 * h);
      }
      worst_h = std::max(worst_h, rel(h_jacobian(d, i, theta, spec), fd));
    }
  }
  v.check(worst_main <= 1e-6, "main_score_jacobian relative error " + fmt(worst_main, 3));
  v.check(worst_h <= 1e-6, "h_jacobian relative error " + fmt(worst_h, 3));
  v.note("max relative error: main " + fmt(worst_main, 3) + ", h " + fmt(worst_h, 3));
  return v;
}

fs::path scratch_dir(const std::string& tag) {
  const auto p = fs::temp_directory_path() / ("minbo_acceptance_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + MINBO_CLI + "\" " + args;
  std::cout << "  $ minbo " << args << std::endl;
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// CLI determinism across worker counts.
Verdict criterion8() {
  Verdict v;
  const std::string preset = std::string(MINBO_SOURCE_DIR) + "/presets/table2.cfg";
  const auto dir = scratch_dir("det");
  const auto a = dir / "threads1", b = dir / "threads2";
  v.check(run_cli("simulate \"" + preset + "\" --threads 1 --out \"" + a.string() + "\" 2>/dev/null") == 0,
          "first run exited nonzero");
  v.check(run_cli("simulate \"" + preset + "\" --threads 2 --out \"" + b.string() + "\" 2>/dev/null") == 0,
          "second run exited nonzero");
  int compared = 0;
  std::size_t cells = 0;
  for (const auto& entry : fs::directory_iterator(a)) {
    if (entry.path().extension() != ".csv") continue;
    const auto other = b / entry.path().filename();
    v.check(fs::exists(other), "missing " + other.filename().string());
    if (!fs::exists(other)) continue;
    v.check(cli::read_file(entry.path().string()) == cli::read_file(other.string()),
            entry.path().filename().string() + " differs");
    ++compared;
    const std::string stem = entry.path().stem().string();
    if (stem.size() < 6 || stem.substr(stem.size() - 6) != "_table") {
      const auto table = cli::parse_summary_csv(cli::read_file(entry.path().string()));
      v.check(table.rows.size() == 32, stem + " has " + std::to_string(table.rows.size()) + " rows, expected 8 x 4");
      ++cells;
    }
  }
  v.check(cells == 6, std::to_string(cells) + " cells, expected 6");
  v.note(std::to_string(compared) + " CSV files byte-identical, " + std::to_string(cells) + " cells x 32 rows");
  fs::remove_all(dir);
  return v;
}

// Shipped CSV fixture against the in-memory pipeline.
Verdict criterion9() {
  Verdict v;
  const std::string cfg_path = std::string(MINBO_SOURCE_DIR) + "/tests/data/fixture/fixture.cfg";
  const auto dir = scratch_dir("fixture");
  const auto out = dir / "report.csv";
  v.check(run_cli("estimate \"" + cfg_path + "\" --out \"" + out.string() + "\" > /dev/null") == 0,
          "estimate exited nonzero");
  if (!fs::exists(out)) {
    v.check(false, "no report written");
    return v;
  }
  const std::string text = cli::read_file(out.string());
  const auto cli_rows = cli::parse_estimate_csv(text);

  const auto config = cli::load_config(cfg_path);
  SimulationConfig sim;
  sim.n = 300;
  sim.seed = config.options.seed;
  sim.missingness = Missingness::MCAR;
  RngStream rng(sim.seed, 0);
  const auto input = gen_scenario(sim, rng);
  const auto result = run_analysis(input, cli::requested_schemes(config), cli::analysis_options(config));
  const auto mem_rows = cli::report_rows(result, {"(Intercept)", "xb", "xn", "xc"});

  v.check(cli_rows.size() == mem_rows.size(), "row count " + std::to_string(cli_rows.size()));
  std::size_t identical = 0;
  for (std::size_t i = 0; i < std::min(cli_rows.size(), mem_rows.size()); ++i) identical += cli_rows[i] == mem_rows[i];
  v.check(identical == mem_rows.size(), std::to_string(mem_rows.size() - identical) + " rows differ from memory");

  const auto header = cli::parse_csv(text).header;
  for (const char* col : {"Estimate", "ASE", "ERE", "OR", "LL", "UL", "PValue"})
    v.check(std::find(header.begin(), header.end(), col) != header.end(), std::string("missing column ") + col);
  v.note(std::to_string(identical) + "/" + std::to_string(mem_rows.size()) + " rows bit-identical, header: " +
         [&] {
           std::string h;
           for (const auto& c : header) h += (h.empty() ? "" : ",") + c;
           return h;
         }());
  fs::remove_all(dir);
  return v;
}

const std::map<int, std::pair<const char*, std::function<Verdict()>>>& criteria() {
  static const std::map<int, std::pair<const char*, std::function<Verdict()>>> c = {
      {1, {"Table 1 bias/CP/ASE, n=600 rho=0.8, full and MCAR", criterion1}},
      {2, {"Table 2 ERE spot values and orderings, n=600", criterion2}},
      {3, {"Table 3 misspecified working models, n=600 rho=0.4", criterion3}},
      {4, {"Table S5 informative missingness, n=600 rho=0.4", criterion4}},
      {5, {"variance reduction identities, 50 random trials", criterion5}},
      {6, {"EL solver oracles and fit invariants", criterion6}},
      {7, {"Jacobians vs central differences", criterion7}},
      {8, {"simulate determinism across --threads (table2 preset)", criterion8}},
      {9, {"estimate on CSV fixture equals in-memory pipeline", criterion9}},
  };
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  set_warning_sink([](std::string_view) {});
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty())
    for (const auto& [k, _] : criteria()) selected.push_back(k);

  int failures = 0;
  for (int k : selected) {
    const auto it = criteria().find(k);
    if (it == criteria().end()) {
      std::cerr << "unknown criterion " << k << "\n";
      return 2;
    }
    std::cout << "criterion " << k << ": " << it->second.first << std::endl;
    Verdict v;
    try {
      v = it->second.second();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    for (const auto& n : v.notes) std::cout << "  " << n << "\n";
    std::cout << (v.ok ? "PASS" : "FAIL") << " criterion " << k << ": " << it->second.first << std::endl;
    failures += !v.ok;
  }
  return failures ? 1 : 0;
}
