#include "minbo/el.hpp"

#include "minbo/error.hpp"

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>

namespace minbo {

double log_star(double z, double eps) {
  if (z >= eps) return std::log(z);
  const double u = z / eps;
  return std::log(eps) - 1.5 + 2.0 * u - 0.5 * u * u;
}

double log_star_d1(double z, double eps) {
  if (z >= eps) return 1.0 / z;
  return 2.0 / eps - z / (eps * eps);
}

double log_star_d2(double z, double eps) {
  if (z >= eps) return -1.0 / (z * z);
  return -1.0 / (eps * eps);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Neumaier-compensated sum, so the line search sees decreases close to the
// rounding level of a single log term.
double compensated_sum(const Vector& v) {
  double sum = 0.0, c = 0.0;
  for (Index i = 0; i < v.size(); ++i) {
    const double t = sum + v[i];
    if (std::abs(sum) >= std::abs(v[i])) c += (sum - t) + v[i];
    else c += (v[i] - t) + sum;
    sum = t;
  }
  return sum + c;
}

double dual_value(const Vector& z, double eps) {
  Vector l(z.size());
  for (Index i = 0; i < z.size(); ++i) l[i] = log_star(z[i], eps);
  return -compensated_sum(l) / static_cast<double>(z.size());
}

// Armijo test. Once the predicted decrease is at the rounding level of f the
// comparison carries no information, and a step is taken unless f rises by
// more than that rounding level.
std::string format_g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

bool sufficient_decrease(double f_new, double f, double t, double slope) {
  if (!std::isfinite(f_new)) return false;
  if (f_new <= f + 1e-4 * t * slope) return true;
  const double scale = 1.0 + std::abs(f);
  return std::abs(t * slope) <= 1e-12 * scale && f_new <= f + 1e-14 * scale;
}

}  // namespace

LambdaResult solve_lambda_columns(const Matrix& h, const Vector& lambda0,
                                  const LambdaOptions& opts) {
  const Index d = h.rows();
  const Index n = h.cols();
  if (lambda0.size() != d) {
    throw Error(ErrorCode::DimensionMismatch, "solve_lambda: lambda0 length does not match h");
  }
  if (n == 0 || !h.allFinite() || !lambda0.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "solve_lambda: empty or non-finite constraint matrix");
  }
  LambdaResult res;
  if (h.cwiseAbs().maxCoeff() == 0.0) {
    warn("solve_lambda: every constraint row is zero; returning lambda = 0");
    res.lambda = Vector::Zero(d);
    res.all_zero = true;
    res.objective.push_back(0.0);
    return res;
  }

  const double nn = static_cast<double>(n);
  const double eps = 1.0 / nn;
  Vector lambda = lambda0;
  Vector z = Vector::Ones(n) + h.transpose() * lambda;
  double f = dual_value(z, eps);
  res.objective.push_back(f);

  Vector d1(n), w(n);
  for (int it = 0; it < opts.max_iter; ++it) {
    for (Index i = 0; i < n; ++i) {
      d1[i] = log_star_d1(z[i], eps);
      w[i] = -log_star_d2(z[i], eps);
    }
    const Vector grad = -(h * d1) / nn;
    if (grad.lpNorm<Eigen::Infinity>() <= opts.tol) break;

    const Matrix hess = (h * w.asDiagonal() * h.transpose()) / nn;
    Vector step;
    try {
      step = Cholesky(hess).solve(Vector(-grad));
    } catch (const Error&) {
      throw Error(ErrorCode::RankDeficient,
                  "solve_lambda: constraint vectors do not span their space");
    }
    const double slope = grad.dot(step);
    double t = 1.0;
    bool accepted = false;
    Vector lambda_new, z_new;
    double f_new = kInf;
    for (int k = 0; k < 60; ++k) {
      lambda_new = lambda + t * step;
      z_new = Vector::Ones(n) + h.transpose() * lambda_new;
      f_new = dual_value(z_new, eps);
      if (sufficient_decrease(f_new, f, t, slope)) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) break;
    lambda = lambda_new;
    z = z_new;
    f = f_new;
    res.objective.push_back(f);
    res.iterations = it + 1;
    if (lambda.norm() > opts.divergence) {
      throw Error(ErrorCode::HullViolation,
                  "solve_lambda: multiplier diverges; zero lies outside the convex hull");
    }
  }

  // Polish with undamped Newton steps while they still shrink the gradient.
  // The theta equation sees lambda's error amplified by the conditioning of
  // (1/n) sum h h', so stopping at tol is not enough there.
  auto gradient_at = [&](const Vector& zz) {
    for (Index i = 0; i < n; ++i) d1[i] = log_star_d1(zz[i], eps);
    return Vector(-(h * d1) / nn);
  };
  Vector grad = gradient_at(z);
  for (int k = 0; k < 3 && z.minCoeff() > eps; ++k) {
    for (Index i = 0; i < n; ++i) w[i] = -log_star_d2(z[i], eps);
    const Matrix hess = (h * w.asDiagonal() * h.transpose()) / nn;
    const Vector lambda_new = lambda + Cholesky(hess).solve(Vector(-grad));
    const Vector z_new = Vector::Ones(n) + h.transpose() * lambda_new;
    if (!(z_new.minCoeff() > eps)) break;
    const Vector grad_new = gradient_at(z_new);
    if (!(grad_new.lpNorm<Eigen::Infinity>() < grad.lpNorm<Eigen::Infinity>())) break;
    lambda = lambda_new;
    z = z_new;
    grad = grad_new;
  }

  if (z.minCoeff() <= 0.5 * eps) {
    throw Error(ErrorCode::HullViolation,
                "solve_lambda: 1 + lambda'h fell below 1/(2n); zero is not inside the convex hull");
  }
  const Vector resid = (h * z.cwiseInverse()) / nn;
  res.residual = resid.lpNorm<Eigen::Infinity>();
  if (res.residual > opts.tol) {
    throw Error(ErrorCode::HullViolation,
                "solve_lambda: constraint residual " + std::to_string(res.residual) +
                    " above tolerance; zero is on or outside the convex hull");
  }
  res.lambda = std::move(lambda);
  return res;
}

LambdaResult solve_lambda(const Matrix& h_rows, const Vector& lambda0, const LambdaOptions& opts) {
  return solve_lambda_columns(h_rows.transpose(), lambda0, opts);
}

EfficiencyMatrices efficiency_matrices(const Matrix& s11, const Matrix& s12) {
  EfficiencyMatrices e;
  e.s11 = s11;
  e.s12 = s12;
  const Cholesky c11(s11);
  const Matrix k = c11.solve(s12);
  const Matrix info = symmetrized(s12.transpose() * k);
  try {
    e.omega = symmetrized(Cholesky(info).inverse());
  } catch (const Error&) {
    throw Error(ErrorCode::RankDeficient,
                "S12 has lost column rank; the working model is not identified");
  }
  e.s = symmetrized(c11.inverse() - k * e.omega * k.transpose());
  return e;
}

namespace {

// Inner solution and profile quantities at one theta.
struct ProfileState {
  Vector theta;
  Matrix h;
  Vector lambda;
  Vector z;
  double value = kInf;  // (1/n) sum log z
  double residual = 0.0;
  Vector f2;  // (1/n) sum J_i' lambda / z_i
  int inner_iterations = 0;
};

bool evaluate(const MomentModel& model, const Vector& theta, const Vector& lambda_warm,
              const LambdaOptions& opts, ProfileState& out) {
  out.theta = theta;
  out.h = model.values(theta);
  LambdaResult lr;
  try {
    lr = solve_lambda_columns(out.h, lambda_warm, opts);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::HullViolation) throw;
    if (lambda_warm.isZero(0.0)) return false;
    try {
      lr = solve_lambda_columns(out.h, Vector::Zero(lambda_warm.size()), opts);
    } catch (const Error& e2) {
      if (e2.code() != ErrorCode::HullViolation) throw;
      return false;
    }
  }
  const Index n = model.n();
  const double nn = static_cast<double>(n);
  out.lambda = lr.lambda;
  out.inner_iterations = lr.iterations;
  out.residual = lr.residual;
  out.z = Vector::Ones(n) + out.h.transpose() * out.lambda;
  out.value = compensated_sum(Vector(out.z.array().log())) / nn;
  out.f2 = Vector::Zero(model.theta_dim());
  for (Index i = 0; i < n; ++i) {
    if (!model.observed(i)) continue;
    out.f2.noalias() += model.jacobian(i, theta).transpose() * out.lambda / out.z[i];
  }
  out.f2 /= nn;
  return true;
}

// Newton direction for the profile: -(D - B'A^{-1}B)^{-1} F2, falling back to
// the Gauss-Newton part B'(-A)^{-1}B when the full Hessian is not PD.
Vector profile_direction(const MomentModel& model, const ProfileState& s) {
  const Index n = model.n();
  const Index d = model.dim();
  const Index r = model.theta_dim();
  const double nn = static_cast<double>(n);
  Matrix neg_a = Matrix::Zero(d, d);
  Matrix b = Matrix::Zero(d, r);
  Matrix dm = Matrix::Zero(r, r);
  for (Index i = 0; i < n; ++i) {
    if (!model.observed(i)) continue;
    const double zi = s.z[i];
    const auto hi = s.h.col(i);
    const Matrix j = model.jacobian(i, s.theta);
    const Vector jl = j.transpose() * s.lambda;
    neg_a.noalias() += hi * hi.transpose() / (zi * zi);
    b.noalias() += j / zi - hi * jl.transpose() / (zi * zi);
    dm.noalias() -= jl * jl.transpose() / (zi * zi);
    if (!model.linear()) dm += model.curvature(i, s.theta, s.lambda) / zi;
  }
  neg_a /= nn;
  b /= nn;
  dm /= nn;
  const Matrix gn = symmetrized(b.transpose() * Cholesky(symmetrized(neg_a)).solve(b));
  try {
    return Cholesky(symmetrized(dm + gn)).solve(Vector(-s.f2));
  } catch (const Error&) {
    return Cholesky(gn).solve(Vector(-s.f2));
  }
}

// Derivative-free minimization of the profile, used when Newton stalls.
Vector nelder_mead(const MomentModel& model, const Vector& start, const LambdaOptions& opts) {
  const Index r = start.size();
  std::vector<Vector> pts;
  std::vector<double> vals;
  ProfileState tmp;
  auto f = [&](const Vector& th) {
    return evaluate(model, th, Vector::Zero(model.dim()), opts, tmp) ? tmp.value : kInf;
  };
  pts.push_back(start);
  for (Index j = 0; j < r; ++j) {
    Vector p = start;
    p[j] += 0.1 * std::max(1.0, std::abs(start[j]));
    pts.push_back(p);
  }
  for (const auto& p : pts) vals.push_back(f(p));
  std::vector<std::size_t> idx(pts.size());
  for (int it = 0; it < 5000; ++it) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return vals[a] < vals[b]; });
    const std::size_t best = idx.front(), worst = idx.back(), second = idx[idx.size() - 2];
    if (std::abs(vals[worst] - vals[best]) <= 1e-15 * (1.0 + std::abs(vals[best]))) break;
    Vector centroid = Vector::Zero(r);
    for (std::size_t k = 0; k + 1 < idx.size(); ++k) centroid += pts[idx[k]];
    centroid /= static_cast<double>(r);
    const Vector xr = centroid + (centroid - pts[worst]);
    const double fr = f(xr);
    if (fr < vals[best]) {
      const Vector xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = f(xe);
      if (fe < fr) {
        pts[worst] = xe;
        vals[worst] = fe;
      } else {
        pts[worst] = xr;
        vals[worst] = fr;
      }
    } else if (fr < vals[second]) {
      pts[worst] = xr;
      vals[worst] = fr;
    } else {
      const Vector xc = centroid + 0.5 * (pts[worst] - centroid);
      const double fc = f(xc);
      if (fc < vals[worst]) {
        pts[worst] = xc;
        vals[worst] = fc;
      } else {
        for (std::size_t k = 1; k < idx.size(); ++k) {
          pts[idx[k]] = pts[best] + 0.5 * (pts[idx[k]] - pts[best]);
          vals[idx[k]] = f(pts[idx[k]]);
        }
      }
    }
  }
  const auto best = std::min_element(vals.begin(), vals.end()) - vals.begin();
  return pts[static_cast<std::size_t>(best)];
}

ELFit no_information_fit(const MomentModel& model, const Vector& theta0) {
  warn("secondary dataset has no observed subjects; borrowing nothing from it");
  const Index n = model.n(), d = model.dim(), r = model.theta_dim();
  ELFit fit;
  fit.theta = theta0;
  fit.lambda = Vector::Zero(d);
  fit.weights = Vector::Constant(n, 1.0 / static_cast<double>(n));
  fit.converged = true;
  fit.no_information = true;
  fit.s11 = Matrix::Zero(d, d);
  fit.s12 = Matrix::Zero(d, r);
  fit.omega = Matrix::Zero(r, r);
  fit.s = Matrix::Zero(d, d);
  fit.h = Matrix::Zero(d, n);
  return fit;
}

}  // namespace

namespace {

// Singular values of h / sqrt(n) below this fraction of the largest are
// rounding noise: the direction is constant zero in the sample.
constexpr double kIdentifiedTol = 1e-10;

// Whitening map W (d x k) for the directions of h that vary in the sample:
// W' (1/n) sum h h' W = I at the starting theta. Default longitudinal bases
// leave some directions with relative singular values near 1e-6, so the
// inner Hessian in raw coordinates is too ill conditioned for the theta
// equation to reach its tolerance. Taken from the SVD of h, not of
// (1/n) sum h h', so the weak directions are resolved rather than squared
// into rounding error.
Matrix whitening(const Matrix& h) {
  const Eigen::BDCSVD<Matrix> svd(h / std::sqrt(static_cast<double>(h.cols())), Eigen::ComputeThinU);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || !(sv[0] > 0.0)) return {};
  Index k = 0;
  while (k < sv.size() && sv[k] > kIdentifiedTol * sv[0]) ++k;
  return svd.matrixU().leftCols(k) * sv.head(k).cwiseInverse().asDiagonal();
}

ELFit fit_el_full_rank(const MomentModel& model, const Vector& theta0, const ELOptions& opts);

}  // namespace

ELFit fit_el(const MomentModel& model, const Vector& theta0, const ELOptions& opts) {
  const Index r = model.theta_dim();
  if (theta0.size() != r || !theta0.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "fit_el: theta0 must be finite with length r");
  }
  if (model.observed_count() == 0) return no_information_fit(model, theta0);

  const Matrix w = whitening(model.values(theta0));
  if (w.cols() < r) {
    throw Error(ErrorCode::RankDeficient,
                "fit_el: only " + std::to_string(w.cols()) +
                    " moment directions vary in the sample; need at least theta_dim");
  }
  // Same weights and theta: lambda' h only ever sees the span of W.
  ELFit red = fit_el_full_rank(model.projected(w), theta0, opts);
  ELFit fit = red;
  fit.lambda = w * red.lambda;
  fit.h = model.values(red.theta);
  fit.s11 = cross_moment(fit.h, fit.h);
  fit.s12 = model.mean_jacobian(red.theta);
  fit.s = symmetrized(w * red.s * w.transpose());
  fit.constraint_residual = (fit.h * fit.weights).lpNorm<Eigen::Infinity>();
  return fit;
}

namespace {

ELFit fit_el_full_rank(const MomentModel& model, const Vector& theta0, const ELOptions& opts) {
  ELFit fit;
  ProfileState cur;
  if (!evaluate(model, theta0, Vector::Zero(model.dim()), opts.inner, cur)) {
    throw Error(ErrorCode::HullViolation,
                "fit_el: zero is outside the convex hull of the constraints at the initial theta");
  }
  int inner_total = cur.inner_iterations;
  double best_norm = kInf;
  int since_best = 0;
  bool fallback_done = false;
  int it = 0;
  for (; it < opts.max_outer; ++it) {
    const double f2_norm = cur.f2.lpNorm<Eigen::Infinity>();
    if (f2_norm <= opts.outer_tol) {
      fit.converged = true;
      break;
    }
    if (f2_norm < best_norm) {
      best_norm = f2_norm;
      since_best = 0;
    } else if (++since_best >= opts.stall_window && !fallback_done) {
      const Vector th = nelder_mead(model, cur.theta, opts.inner);
      ProfileState nm;
      if (evaluate(model, th, Vector::Zero(model.dim()), opts.inner, nm) && nm.value <= cur.value) {
        cur = std::move(nm);
      }
      fallback_done = true;
      fit.used_fallback = true;
      since_best = 0;
      best_norm = cur.f2.lpNorm<Eigen::Infinity>();
      continue;
    }

    const Vector dir = profile_direction(model, cur);
    const double slope = cur.f2.dot(dir);
    double t = 1.0;
    bool accepted = false;
    ProfileState trial;
    for (int k = 0; k < 40; ++k) {
      if (evaluate(model, cur.theta + t * dir, cur.lambda, opts.inner, trial)) {
        inner_total += trial.inner_iterations;
        if (sufficient_decrease(trial.value, cur.value, t, slope)) {
          accepted = true;
          break;
        }
      }
      t *= 0.5;
    }
    if (!accepted) {
      // Nothing better along the Newton direction; count as a stalled step.
      since_best = std::max(since_best, opts.stall_window - 1);
      if (fallback_done) break;
      best_norm = 0.0;
      continue;
    }
    cur = std::move(trial);
  }
  fit.outer_iterations = it;
  fit.inner_iterations = inner_total;
  if (!fit.converged) {
    throw Error(ErrorCode::NotConverged,
                "fit_el: theta equation residual " +
                    format_g(cur.f2.lpNorm<Eigen::Infinity>()) + " after " +
                    std::to_string(it) + " outer iterations");
  }

  const Index n = model.n();
  const double nn = static_cast<double>(n);
  fit.theta = cur.theta;
  fit.lambda = cur.lambda;
  fit.weights = cur.z.cwiseInverse() / nn;
  fit.constraint_residual = cur.residual;
  fit.theta_residual = cur.f2.lpNorm<Eigen::Infinity>();
  const auto eff =
      efficiency_matrices(cross_moment(cur.h, cur.h), model.mean_jacobian(cur.theta));
  fit.s11 = eff.s11;
  fit.s12 = eff.s12;
  fit.omega = eff.omega;
  fit.s = eff.s;
  fit.h = std::move(cur.h);
  return fit;
}

}  // namespace

ELFit fit_el(const SecondaryDataset& data, const WorkingModelSpec& spec, const Vector& theta0,
             const ELOptions& opts) {
  return fit_el(MomentModel(data, spec), theta0, opts);
}

namespace {

Vector gauss_newton_gmm(const MomentModel& model, const Matrix& w, Vector theta) {
  const double nn = static_cast<double>(model.n());
  auto hbar = [&](const Vector& th) -> Vector { return model.values(th).rowwise().sum() / nn; };
  Vector hb = hbar(theta);
  double q = hb.dot(w * hb);
  for (int it = 0; it < 100; ++it) {
    const Matrix j = model.mean_jacobian(theta);
    const Matrix jtw = j.transpose() * w;
    Vector step;
    try {
      step = Cholesky(symmetrized(jtw * j)).solve(Vector(-(jtw * hb)));
    } catch (const Error&) {
      throw Error(ErrorCode::RankDeficient, "GMM initializer: mean Jacobian is rank deficient");
    }
    double t = 1.0;
    Vector th_new = theta;
    Vector hb_new = hb;
    double q_new = q;
    for (int k = 0; k < 40; ++k) {
      th_new = theta + t * step;
      hb_new = hbar(th_new);
      q_new = hb_new.dot(w * hb_new);
      if (q_new <= q) break;
      t *= 0.5;
    }
    const bool tiny = (t * step).lpNorm<Eigen::Infinity>() <=
                      1e-10 * (1.0 + theta.lpNorm<Eigen::Infinity>());
    if (q_new <= q) {
      theta = th_new;
      hb = hb_new;
      q = q_new;
    }
    if (tiny || model.linear()) {
      if (model.linear() && it == 0) continue;  // one polish step for roundoff
      return theta;
    }
  }
  throw Error(ErrorCode::NotConverged, "GMM initializer did not converge in 100 iterations");
}

}  // namespace

Vector two_step_gmm_init(const MomentModel& model) {
  const Index d = model.dim();
  const Index r = model.theta_dim();
  if (model.observed_count() == 0) return Vector::Zero(r);
  const Vector theta1 = gauss_newton_gmm(model, Matrix::Identity(d, d), Vector::Zero(r));
  const Matrix h = model.values(theta1);
  // W W' is the (pseudo-)inverse of (1/n) sum h h' on the varying directions.
  const Matrix wh = whitening(h);
  if (wh.size() == 0) return theta1;
  const Matrix w = symmetrized(wh * wh.transpose());
  return gauss_newton_gmm(model, w, theta1);
}

Vector two_step_gmm_init(const SecondaryDataset& data, const WorkingModelSpec& spec) {
  return two_step_gmm_init(MomentModel(data, spec));
}

double profile_log_el(const MomentModel& model, const Vector& theta) {
  ProfileState s;
  if (!evaluate(model, theta, Vector::Zero(model.dim()), LambdaOptions{}, s)) return kInf;
  return s.value;
}

}  // namespace minbo
