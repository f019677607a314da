#include "helpers.hpp"
#include "minbo/el.hpp"
#include "minbo/error.hpp"
#include "minbo/estimator.hpp"

using namespace minbo;
using minbo::test::rel_diff;

namespace {

MainDataset random_main(Index n, Index p, RngStream& rng) {
  Matrix x(n, p);
  Vector y(n);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (Index j = 1; j < p; ++j) x(i, j) = rng.normal();
    y[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
  }
  return MainDataset::create(y, x);
}

SecondaryDataset random_longitudinal(Index n, Index m, Index r, RngStream& rng, double missing = 0.0) {
  Matrix y(n, m), x(n * m, r);
  std::vector<std::uint8_t> obs(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    obs[static_cast<std::size_t>(i)] = rng.uniform() >= missing;
    for (Index t = 0; t < m; ++t) {
      x(i * m + t, 0) = 1.0;
      for (Index j = 1; j < r; ++j) x(i * m + t, j) = rng.normal();
      y(i, t) = rng.normal();
    }
  }
  return SecondaryDataset::longitudinal(y, x, obs);
}

SecondaryDataset random_cross_sectional(Index n, Index r, Index q, RngStream& rng) {
  Vector y(n);
  Matrix x(n, r), z(n, q);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (Index j = 1; j < r; ++j) x(i, j) = rng.normal();
    for (Index j = 0; j < q; ++j) z(i, j) = rng.normal();
    y[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
  }
  return SecondaryDataset::cross_sectional(y, x, z, std::vector<std::uint8_t>(static_cast<std::size_t>(n), 1));
}

WorkingModelSpec unit_spec(Index m, Index r, std::vector<Matrix> basis) {
  WorkingModelSpec s = longitudinal_spec(r, std::move(basis), VarianceMode::Unit);
  s.inv_sqrt_variance = Vector::Ones(m);
  return s;
}

}  // namespace

TEST_CASE("main_score examples") {
  // Two intercept-only subjects (a design needs more rows than columns).
  const Vector beta0 = Vector::Zero(1);
  const auto d = MainDataset::create((Vector(2) << 1, 0).finished(), Matrix::Ones(2, 1));
  const Matrix g = main_score(d, beta0);
  CHECK(g(0, 0) == 0.5);
  CHECK(g(1, 0) == -0.5);
  CHECK(main_score_jacobian(d, beta0)(0, 0) == -0.25);
  CHECK(main_score_jacobian(d, Vector::Constant(1, 800.0)).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("MainDataset validation") {
  CHECK_THROWS_AS(MainDataset::create(Vector::Constant(2, 0.5), Matrix::Ones(2, 1)), Error);
  // Rank-deficient design.
  CHECK_THROWS_AS(MainDataset::create(Vector::Ones(3), Matrix::Ones(3, 2)), Error);
}

TEST_CASE("score columns vanish at the MLE") {
  RngStream rng(5, 0);
  const auto d = random_main(200, 4, rng);
  const auto fit = fit_unweighted(d);
  CHECK(main_score(d, fit.beta).colwise().sum().cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("main_score_jacobian matches central differences") {
  RngStream rng(17, 0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = random_main(50, 4, rng);
    const Vector beta = test::random_matrix(4, 1, rng) * 0.5;
    Matrix fd(4, 4);
    const double h = 1e-6;
    for (Index j = 0; j < 4; ++j) {
      Vector bp = beta, bm = beta;
      bp[j] += h;
      bm[j] -= h;
      fd.col(j) = (main_score(d, bp).colwise().mean() - main_score(d, bm).colwise().mean()).transpose() / (2 * h);
    }
    const Matrix jac = main_score_jacobian(d, beta);
    CHECK(rel_diff(jac, fd) < 1e-6);
    CHECK(rel_diff(jac, jac.transpose()) == 0.0);
    CHECK(min_eigenvalue_symmetric(-jac) > 0.0);
  }
}

TEST_CASE("h_eval reductions") {
  RngStream rng(3, 0);
  SUBCASE("identity basis gives the OLS score") {
    const auto d = random_longitudinal(5, 4, 3, rng);
    auto spec = unit_spec(4, 3, {Matrix::Identity(4, 4)});
    spec.allow_just_identified = true;
    const Vector theta = (Vector(3) << 0.3, -1.0, 2.0).finished();
    for (Index i = 0; i < 5; ++i) {
      const Matrix xi = d.subject_design(i);
      const Vector resid = d.y.row(i).transpose() - xi * theta;
      CHECK(rel_diff(h_eval(d, i, theta, spec), xi.transpose() * resid) < 1e-15);
    }
  }
  SUBCASE("permutation basis swaps the residual") {
    const double a = 0.7, b = -1.9;
    const auto d = SecondaryDataset::longitudinal((Matrix(1, 2) << a, b).finished(), Matrix::Identity(2, 2), {1});
    const Matrix swap = (Matrix(2, 2) << 0, 1, 1, 0).finished();
    const auto spec = unit_spec(2, 2, {Matrix::Identity(2, 2), swap});
    const Vector h = h_eval(d, 0, Vector::Zero(2), spec);
    CHECK(h.size() == 4);
    CHECK(h[2] == b);
    CHECK(h[3] == a);
  }
  SUBCASE("cross-sectional at theta = 0") {
    const double z1 = 2.0;
    const auto d = SecondaryDataset::cross_sectional(Vector::Ones(1), Matrix::Ones(1, 1), Matrix::Constant(1, 1, z1), {1});
    const auto spec = cross_sectional_spec(1);
    const Vector h = h_eval(d, 0, Vector::Zero(1), spec);
    CHECK(h[0] == 0.5);
    CHECK(h[1] == 0.5 * z1);
    const Matrix j = h_jacobian(d, 0, Vector::Zero(1), spec);
    CHECK(j(0, 0) == -0.25);
    CHECK(j(1, 0) == -0.5);
  }
}

TEST_CASE("h_jacobian matches central differences") {
  RngStream rng(23, 0);
  const double step = 1e-6;
  auto fd_check = [&](const SecondaryDataset& d, const WorkingModelSpec& spec, Index r) {
    const Vector theta = test::random_matrix(r, 1, rng) * 0.4;
    for (Index i = 0; i < std::min<Index>(d.n(), 3); ++i) {
      Matrix fd(h_eval(d, i, theta, spec).size(), r);
      for (Index j = 0; j < r; ++j) {
        Vector tp = theta, tm = theta;
        tp[j] += step;
        tm[j] -= step;
        fd.col(j) = (h_eval(d, i, tp, spec) - h_eval(d, i, tm, spec)) / (2 * step);
      }
      CHECK(rel_diff(h_jacobian(d, i, theta, spec), fd) < 1e-6);
    }
  };
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = random_longitudinal(6, 4, 4, rng);
    const auto spec = prepare_spec(d, longitudinal_spec(4, 4, VarianceMode::PreliminaryResidual));
    fd_check(d, spec, 4);
    const Vector t1 = Vector::Zero(4), t2 = Vector::Constant(4, 3.0);
    CHECK(h_jacobian(d, 0, t1, spec) == h_jacobian(d, 0, t2, spec));
  }
  for (int trial = 0; trial < 20; ++trial) {
    const auto d = random_cross_sectional(6, 3, 2, rng);
    fd_check(d, cross_sectional_spec(3), 3);
  }
}

TEST_CASE("over-identification is enforced") {
  RngStream rng(9, 0);
  const auto d = random_longitudinal(10, 4, 3, rng);
  CHECK_THROWS_AS(validate_spec(d, unit_spec(4, 3, {Matrix::Identity(4, 4)})), Error);
  CHECK_NOTHROW(validate_spec(d, longitudinal_spec(4, 3, VarianceMode::Unit)));
  CHECK(longitudinal_spec(4, 3, VarianceMode::Unit).moment_dim() == 12);
  const auto cs = random_cross_sectional(10, 2, 1, rng);
  CHECK(cross_sectional_spec(2).moment_dim(cs.q()) == 3);
}

TEST_CASE("default basis") {
  const auto v = default_basis(4);
  REQUIRE(v.size() == 4);
  CHECK(v[0] == Matrix::Identity(4, 4));
  CHECK(v[1] == Matrix::Ones(4, 4) - Matrix::Identity(4, 4));
  CHECK(v[2](0, 1) == 1.0);
  CHECK(v[2](1, 0) == 1.0);
  CHECK(v[2](0, 2) == 0.0);
  CHECK(v[2].diagonal().sum() == 0.0);
  CHECK(v[3].sum() == 2.0);
  CHECK(v[3](0, 0) == 1.0);
  CHECK(v[3](3, 3) == 1.0);
  for (const auto& b : v) CHECK(b == b.transpose());
}

TEST_CASE("unobserved subjects contribute zero columns") {
  RngStream rng(31, 0);
  const auto d = random_longitudinal(40, 4, 3, rng, 0.3);
  const auto spec = prepare_spec(d, longitudinal_spec(4, 3, VarianceMode::PreliminaryResidual));
  const MomentModel model(d, spec);
  const Matrix h = model.values(Vector::Constant(3, 0.2));
  for (Index i = 0; i < d.n(); ++i) {
    if (!d.observed[static_cast<std::size_t>(i)]) CHECK(h.col(i).cwiseAbs().maxCoeff() == 0.0);
    else CHECK(rel_diff(h.col(i), h_eval(d, i, Vector::Constant(3, 0.2), spec)) < 1e-14);
  }
}

TEST_CASE("preliminary residual variances") {
  RngStream rng(37, 0);
  const auto d = random_longitudinal(300, 4, 2, rng);
  const auto spec = prepare_spec(d, longitudinal_spec(4, 2, VarianceMode::PreliminaryResidual));
  REQUIRE(spec.inv_sqrt_variance.size() == 4);
  // Outcomes are pure N(0,1) noise, so each R~ entry is near one.
  for (Index t = 0; t < 4; ++t) CHECK(std::abs(spec.inv_sqrt_variance[t] - 1.0) < 0.15);
  const auto unit = prepare_spec(d, longitudinal_spec(4, 2, VarianceMode::Unit));
  CHECK(unit.inv_sqrt_variance == Vector::Ones(4));
}
