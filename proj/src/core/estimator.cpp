#include "minbo/estimator.hpp"

#include "minbo/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace minbo {

namespace {

Vector weighted_score(const MainDataset& data, const Vector& w, const Vector& beta) {
  const Vector eta = data.x * beta;
  Vector r(data.n());
  for (Index i = 0; i < data.n(); ++i) r[i] = w[i] * (data.y[i] - expit(eta[i]));
  return data.x.transpose() * r;
}

}  // namespace

BetaSolution fit_weighted(const MainDataset& data, const Vector& weights, const Vector& beta0,
                          const BetaOptions& opts) {
  const Index n = data.n();
  if (weights.size() != n) throw Error(ErrorCode::LengthMismatch, "weights length is not n");
  if (beta0.size() != data.p()) throw Error(ErrorCode::DimensionMismatch, "beta0 length is not p");
  if (!weights.allFinite() || (weights.array() <= 0.0).any()) {
    throw Error(ErrorCode::InvalidWeights, "integrated scores must be positive and finite");
  }
  const double mean_w = weights.sum() / static_cast<double>(n);

  BetaSolution sol;
  Vector beta = beta0;
  Vector score = weighted_score(data, weights, beta);
  double norm = score.norm();
  for (int it = 0; it <= opts.max_iter; ++it) {
    sol.iterations = it;
    const Vector eta = data.x * beta;
    Vector v(n);
    for (Index i = 0; i < n; ++i) {
      const double mu = expit(eta[i]);
      v[i] = weights[i] * mu * (1.0 - mu);
    }
    const Matrix info = symmetrized(data.x.transpose() * v.asDiagonal() * data.x);
    Vector step;
    try {
      step = Cholesky(info).solve(score);
    } catch (const Error&) {
      throw Error(ErrorCode::Separation,
                  "weighted information matrix became singular (fitted probabilities saturate)");
    }
    // A small score alone is not enough: on separated data the score decays
    // while the Newton step stays O(1).
    if (score.lpNorm<Eigen::Infinity>() / mean_w <= opts.tol &&
        step.lpNorm<Eigen::Infinity>() <= 1e-6 * (1.0 + beta.lpNorm<Eigen::Infinity>())) {
      sol.converged = true;
      break;
    }
    if (it == opts.max_iter) break;
    double t = 1.0;
    Vector beta_new = beta + step;
    Vector score_new = weighted_score(data, weights, beta_new);
    for (int k = 0; k < opts.max_halvings && !(score_new.norm() < norm); ++k) {
      t *= 0.5;
      beta_new = beta + t * step;
      score_new = weighted_score(data, weights, beta_new);
    }
    if (!(score_new.norm() < norm)) {
      // At the rounding floor: no step reduces the score further. Accept only
      // inside the 1e-8 residual that a converged solution promises.
      sol.converged = score.lpNorm<Eigen::Infinity>() / mean_w <= std::max(opts.tol, 1e-8);
      break;
    }
    beta = beta_new;
    score = score_new;
    norm = score.norm();
    if (beta.lpNorm<Eigen::Infinity>() > opts.separation_bound) {
      throw Error(ErrorCode::Separation,
                  "|beta| exceeded " + std::to_string(opts.separation_bound) +
                      "; the data appear to be separated");
    }
  }
  sol.beta = beta;
  sol.score_residual = score.lpNorm<Eigen::Infinity>() / mean_w;
  if (!sol.converged) {
    throw Error(ErrorCode::NotConverged,
                "weighted logistic fit did not converge (score residual " +
                    std::to_string(sol.score_residual) + ")");
  }
  return sol;
}

BetaSolution fit_unweighted(const MainDataset& data, const BetaOptions& opts) {
  return fit_weighted(data, Vector::Ones(data.n()), Vector::Zero(data.p()), opts);
}

}  // namespace minbo
