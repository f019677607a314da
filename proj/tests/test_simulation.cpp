#include "helpers.hpp"
#include "minbo/error.hpp"
#include "minbo/simulation.hpp"

#include <numbers>

using namespace minbo;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::InvalidArgument;
}

AnalysisInput large(Missingness miss, std::uint64_t stream) {
  SimulationConfig cfg;
  cfg.n = 100000;
  cfg.rho = 0.8;
  cfg.missingness = miss;
  RngStream rng(cfg.seed, stream);
  return gen_scenario(cfg, rng);
}

}  // namespace

TEST_CASE("copula correlation reproduces binary correlation 0.3") {
  const double r = copula_correlation();
  // P11 = 1/4 + asin(r) / (2 pi) at p = 1/2; correlation = 4 P11 - 1.
  CHECK(std::abs(4.0 * (0.25 + std::asin(r) / (2 * std::numbers::pi)) - 1.0 - 0.3) < 1e-15);
  CHECK(std::abs(r - 0.45399049973954675) < 1e-15);
}

TEST_CASE("generator marginals on 1e5 subjects") {
  const auto in = large(Missingness::MCAR, 0);
  const Index n = in.main.n();

  SUBCASE("cross-sectional outcome follows expit(X3' theta3)") {
    const auto& d3 = in.secondary[2];
    double y[2] = {0, 0}, c[2] = {0, 0};
    for (Index i = 0; i < n; ++i) {
      if (!d3.observed[static_cast<std::size_t>(i)]) continue;
      const int g = d3.x(i, 1) > 0.5;
      y[g] += d3.y(i, 0);
      c[g] += 1;
    }
    CHECK(std::abs(y[0] / c[0] - expit(-1.0)) < 0.02);
    CHECK(std::abs(y[1] / c[1] - expit(0.0)) < 0.02);
  }
  SUBCASE("MCAR observation rates") {
    const double eta[3] = {0.6, 0.7, 0.5};
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(std::abs(static_cast<double>(in.secondary[k].observed_count()) / n - eta[k]) < 0.02);
  }
  SUBCASE("correlated Bernoulli covariates") {
    const auto& d1 = in.secondary[0];
    double s01 = 0, s0 = 0, s1 = 0, cnt = 0;
    for (Index i = 0; i < n; ++i) {
      if (!d1.observed[static_cast<std::size_t>(i)]) continue;
      const double a = d1.x(i * 4, 1), b = d1.x(i * 4 + 1, 1);
      s01 += a * b;
      s0 += a;
      s1 += b;
      cnt += 1;
    }
    const double p0 = s0 / cnt, p1 = s1 / cnt;
    const double corr = (s01 / cnt - p0 * p1) / std::sqrt(p0 * (1 - p0) * p1 * (1 - p1));
    CHECK(std::abs(corr - 0.3) < 0.02);
    CHECK(std::abs(p0 - 0.5) < 0.02);
  }
  SUBCASE("main outcome follows the logistic model (scale sqrt(2 + 2 rho))") {
    const auto fit = fit_unweighted(in.main);
    CHECK((fit.beta - true_beta()).cwiseAbs().maxCoeff() < 0.06);
  }
}

TEST_CASE("full observation") {
  SimulationConfig cfg;
  cfg.n = 200;
  RngStream rng(cfg.seed, 0);
  const auto in = gen_scenario(cfg, rng);
  for (const auto& d : in.secondary) CHECK(d.observed_count() == 200);
}

TEST_CASE("informative missingness rates") {
  SimulationConfig cfg;
  cfg.n = 20000;
  cfg.missingness = Missingness::Informative;
  cfg.misspecified = true;
  RngStream rng(cfg.seed, 0);
  const auto in = gen_scenario(cfg, rng);
  double expected = 0;
  for (Index i = 0; i < cfg.n; ++i) expected += expit(in.main.x.row(i).dot(cfg.alpha));
  expected /= static_cast<double>(cfg.n);
  for (const auto& d : in.secondary)
    CHECK(std::abs(static_cast<double>(d.observed_count()) / cfg.n - expected) < 0.02);
  CHECK(in.specs[0].theta_dim == 3);
  CHECK(in.secondary[2].q() == 1);
}

TEST_CASE("replicates are deterministic") {
  SimulationConfig cfg;
  cfg.n = 300;
  const auto a = run_replicate(cfg, 5);
  const auto b = run_replicate(cfg, 5);
  REQUIRE(a.ok);
  CHECK(a.mle_beta == b.mle_beta);
  REQUIRE(a.draws.size() == cfg.estimators.size());
  for (std::size_t e = 0; e < a.draws.size(); ++e) {
    CHECK(a.draws[e].beta == b.draws[e].beta);
    CHECK(a.draws[e].ase == b.draws[e].ase);
  }
  const auto c = run_replicate(cfg, 6);
  CHECK(a.mle_beta != c.mle_beta);
}

TEST_CASE("monte_carlo does not depend on the worker count") {
  SimulationConfig cfg;
  cfg.n = 300;
  cfg.reps = 6;
  const auto one = monte_carlo(cfg, 1);
  const auto three = monte_carlo(cfg, 3);
  REQUIRE(one.estimators.size() == three.estimators.size());
  for (std::size_t e = 0; e < one.estimators.size(); ++e)
    for (std::size_t j = 0; j < 4; ++j) {
      const auto& x = one.estimators[e].coef[j];
      const auto& y = three.estimators[e].coef[j];
      CHECK(x.bias == y.bias);
      CHECK(x.mcsd == y.mcsd);
      CHECK(x.mean_ase == y.mean_ase);
      CHECK(x.cp == y.cp);
      CHECK(x.ere == y.ere);
    }
}

TEST_CASE("summaries of degenerate replicate sets") {
  SimulationConfig cfg;
  cfg.n = 300;
  const auto r = run_replicate(cfg, 0);
  REQUIRE(r.ok);
  auto twin = r;
  twin.index = 1;
  CHECK(code_of([&] { summarize_replicates(cfg, {r, twin}); }) == ErrorCode::NonPositiveVariance);

  const auto single = summarize_replicates(cfg, {r});
  CHECK_FALSE(single.has_spread);

  std::vector<ReplicateResult> batch;
  for (int i = 0; i < 20; ++i) {
    ReplicateResult f;
    f.index = i;
    f.ok = false;
    f.error = "HullViolation: synthetic";
    batch.push_back(i < 18 ? run_replicate(cfg, i) : f);
  }
  CHECK(code_of([&] { summarize_replicates(cfg, batch); }) == ErrorCode::TooManyFailures);
  batch.pop_back();
  batch.push_back(run_replicate(cfg, 19));
  const auto ok = summarize_replicates(cfg, batch);
  CHECK(ok.failures.size() == 1);
  CHECK(ok.succeeded == 19);
}

TEST_CASE("a forced single-dataset average equals single100") {
  SimulationConfig cfg;
  cfg.n = 300;
  RngStream rng(cfg.seed, 2);
  const auto in = gen_scenario(cfg, rng);
  auto forced = build_scheme((Matrix(1, 3) << 1, 0, 0).finished());
  forced.label = "ave111_forced";
  auto single = estimator_scheme("single100");
  const auto res = run_analysis(in, {forced, single});
  CHECK(res.schemes[0].solution.beta == res.schemes[1].solution.beta);
  CHECK(res.schemes[0].report.v == res.schemes[1].report.v);
}

TEST_CASE("SimulationConfig validation") {
  SimulationConfig cfg;
  cfg.rho = 1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.rho = 0.4;
  cfg.reps = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.reps = 10;
  cfg.estimators = {"ave111", "nonsense"};
  CHECK_THROWS_AS(cfg.validate(), Error);
  CHECK(missingness_from_string("mcar") == Missingness::MCAR);
  CHECK_THROWS_AS(missingness_from_string("sometimes"), Error);
}
