#pragma once

#include "minbo/model.hpp"

namespace minbo {

struct BetaOptions {
  double tol = 1e-10;
  int max_iter = 100;
  int max_halvings = 30;
  double separation_bound = 30.0;
};

struct BetaSolution {
  Vector beta;
  // max-norm of sum_i p_i g_i(beta) divided by the mean weight, so the scale
  // matches the unweighted score sum.
  double score_residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// Logistic MLE (all weights one), started at zero.
BetaSolution fit_unweighted(const MainDataset& data, const BetaOptions& opts = {});

/// Solves sum_i p_i x_i (y_i - expit(x_i' beta)) = 0 by damped Newton.
/// Throws Separation when |beta|_inf exceeds the bound, NotConverged after
/// max_iter steps.
BetaSolution fit_weighted(const MainDataset& data, const Vector& weights, const Vector& beta0,
                          const BetaOptions& opts = {});

}  // namespace minbo
