#pragma once

#include "minbo/model.hpp"

#include <vector>

namespace minbo {

struct LambdaOptions {
  double tol = 1e-10;
  int max_iter = 100;
  // |lambda| beyond this means the dual is unbounded (0 outside the hull).
  double divergence = 1e10;
};

struct LambdaResult {
  Vector lambda;
  int iterations = 0;
  bool all_zero = false;
  // Constraint residual max |(1/n) sum H_i / (1 + lambda'H_i)|.
  double residual = 0.0;
  // Dual objective -(1/n) sum log*(1 + lambda'H_i) after every accepted step,
  // starting with the value at lambda0.
  std::vector<double> objective;
};

/// Lagrange multiplier for fixed constraint vectors. `h` is d x n with one
/// column per subject (R_i h_i, zero for unobserved subjects).
///
/// Newton descent on the convex dual with Owen's pseudo-logarithm (quadratic
/// below 1/n) and Armijo backtracking. Throws HullViolation when the dual is
/// unbounded or the solution leaves 1 + lambda'H_i > 1/(2n).
LambdaResult solve_lambda_columns(const Matrix& h, const Vector& lambda0,
                                  const LambdaOptions& opts = {});

/// Same, with subjects in rows (n x d).
LambdaResult solve_lambda(const Matrix& h_rows, const Vector& lambda0,
                          const LambdaOptions& opts = {});

/// Pseudo-logarithm with threshold eps, and its first two derivatives.
double log_star(double z, double eps);
double log_star_d1(double z, double eps);
double log_star_d2(double z, double eps);

struct ELOptions {
  LambdaOptions inner;
  double outer_tol = 1e-8;
  int max_outer = 200;
  // Outer steps without residual decrease before switching to the
  // derivative-free fallback.
  int stall_window = 10;
};

struct EfficiencyMatrices {
  Matrix s11, s12, omega, s;
};

/// S11 = (1/n) sum H H', S12 = mean Jacobian, Omega = (S12' S11^-1 S12)^-1,
/// S = S11^-1 - S11^-1 S12 Omega S12' S11^-1.
EfficiencyMatrices efficiency_matrices(const Matrix& s11, const Matrix& s12);

struct ELFit {
  Vector theta;
  Vector lambda;
  Vector weights;  // p_i = (1/n) / (1 + lambda' R_i h_i)
  bool converged = false;
  bool no_information = false;
  bool used_fallback = false;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double constraint_residual = 0.0;  // max-norm of sum_i p_i R_i h_i
  double theta_residual = 0.0;       // max-norm of the theta equation
  Matrix s11, s12, omega, s;
  Matrix h;  // d x n, R_i h_i at theta

  Index n() const { return weights.size(); }
};

/// Joint (theta, lambda) solve. Outer Newton on the profile log empirical
/// likelihood with a full inner lambda solve per step.
ELFit fit_el(const MomentModel& model, const Vector& theta0, const ELOptions& opts = {});
ELFit fit_el(const SecondaryDataset& data, const WorkingModelSpec& spec, const Vector& theta0,
             const ELOptions& opts = {});

/// Initializer: Gauss-Newton GMM with W = I, then W = S11(theta_1)^-1.
Vector two_step_gmm_init(const MomentModel& model);
Vector two_step_gmm_init(const SecondaryDataset& data, const WorkingModelSpec& spec);

/// max_lambda (1/n) sum log(1 + lambda'H_i(theta)); +inf outside the hull.
double profile_log_el(const MomentModel& model, const Vector& theta);

}  // namespace minbo
