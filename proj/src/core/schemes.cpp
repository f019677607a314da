#include "minbo/schemes.hpp"

#include "minbo/error.hpp"

#include <cmath>
#include <string>

namespace minbo {

Vector SchemeSpec::column_totals() const {
  Vector t = Vector::Zero(omega.cols());
  for (Index row = 0; row < omega.rows(); ++row) {
    for (Index m = 0; m < omega.cols(); ++m) t[m] += omega(row, m);
  }
  return t;
}

void validate_scheme(const SchemeSpec& spec) {
  const Matrix& w = spec.omega;
  if (spec.k < 1 || w.cols() != spec.k || w.rows() < 1 || w.rows() > spec.k) {
    throw Error(ErrorCode::InvalidWeights, "scheme needs 1 <= K' <= K rows and K columns");
  }
  for (Index row = 0; row < w.rows(); ++row) {
    double sum = 0.0;
    for (Index m = 0; m < w.cols(); ++m) {
      if (!std::isfinite(w(row, m)) || w(row, m) < 0.0) {
        throw Error(ErrorCode::InvalidWeights, "scheme weights must be finite and nonnegative");
      }
      sum += w(row, m);
    }
    if (std::abs(sum - 1.0) > 1e-12) {
      throw Error(ErrorCode::InvalidWeights,
                  "scheme row " + std::to_string(row + 1) + " sums to " + std::to_string(sum));
    }
  }
  for (Index m = 0; m < w.cols(); ++m) {
    int used = 0;
    for (Index row = 0; row < w.rows(); ++row) used += w(row, m) > 0.0;
    if (used > 1) {
      throw Error(ErrorCode::InvalidWeights,
                  "dataset " + std::to_string(m + 1) + " appears in more than one scheme row");
    }
  }
}

SchemeSpec build_scheme(SchemeKind kind, Index k, WeightMode mode) {
  if (k < 1) throw Error(ErrorCode::InvalidWeights, "scheme needs at least one dataset");
  SchemeSpec s;
  s.k = k;
  s.mode = mode;
  switch (kind) {
    case SchemeKind::Averaging:
      s.omega = Matrix::Constant(1, k, 1.0 / static_cast<double>(k));
      s.label = "averaging";
      break;
    case SchemeKind::Aggregating:
      s.omega = Matrix::Identity(k, k);
      s.mode = WeightMode::Fixed;
      s.label = "aggregating";
      break;
    case SchemeKind::Custom:
      throw Error(ErrorCode::InvalidWeights, "custom schemes need an omega array");
  }
  validate_scheme(s);
  return s;
}

SchemeSpec build_scheme(const Matrix& omega, WeightMode mode) {
  SchemeSpec s;
  s.k = omega.cols();
  s.omega = omega;
  s.mode = mode;
  s.label = "custom";
  validate_scheme(s);
  return s;
}

SchemeSpec averaging_over(Index k, const std::vector<Index>& datasets, WeightMode mode) {
  Matrix w = Matrix::Zero(1, k);
  for (Index m : datasets) {
    if (m < 0 || m >= k) throw Error(ErrorCode::OutOfRange, "dataset index out of range");
    w(0, m) = 1.0 / static_cast<double>(datasets.size());
  }
  return build_scheme(w, mode);
}

SchemeSpec aggregating_over(Index k, const std::vector<Index>& datasets) {
  Matrix w = Matrix::Zero(static_cast<Index>(datasets.size()), k);
  for (std::size_t row = 0; row < datasets.size(); ++row) {
    if (datasets[row] < 0 || datasets[row] >= k) {
      throw Error(ErrorCode::OutOfRange, "dataset index out of range");
    }
    w(static_cast<Index>(row), datasets[row]) = 1.0;
  }
  return build_scheme(w, WeightMode::Fixed);
}

namespace {

Index check_weights(const std::vector<Vector>& weights, std::size_t k) {
  if (weights.size() != k || weights.empty()) {
    throw Error(ErrorCode::LengthMismatch, "number of weight vectors does not match K");
  }
  const Index n = weights.front().size();
  for (const auto& w : weights) {
    if (w.size() != n) throw Error(ErrorCode::LengthMismatch, "weight vectors differ in length");
  }
  return n;
}

}  // namespace

Vector integrate_scores(const SchemeSpec& spec, const std::vector<Vector>& weights) {
  const Index n = check_weights(weights, static_cast<std::size_t>(spec.k));
  const double nn = static_cast<double>(n);
  Vector out = Vector::Ones(n);
  for (Index row = 0; row < spec.omega.rows(); ++row) {
    for (Index i = 0; i < n; ++i) {
      double s = 0.0;
      for (Index m = 0; m < spec.k; ++m) {
        s += spec.omega(row, m) * (nn * weights[static_cast<std::size_t>(m)][i]);
      }
      out[i] *= s;
    }
  }
  return out;
}

Vector averaging_scores(const Vector& omega, const std::vector<Vector>& weights) {
  const Index n = check_weights(weights, static_cast<std::size_t>(omega.size()));
  const double nn = static_cast<double>(n);
  Vector out(n);
  for (Index i = 0; i < n; ++i) {
    double s = 0.0;
    for (Index m = 0; m < omega.size(); ++m) {
      s += omega[m] * (nn * weights[static_cast<std::size_t>(m)][i]);
    }
    out[i] = s;
  }
  return out;
}

Vector aggregating_scores(const std::vector<Vector>& weights) {
  const Index n = check_weights(weights, weights.size());
  const double nn = static_cast<double>(n);
  Vector out = Vector::Ones(n);
  for (const auto& w : weights) {
    for (Index i = 0; i < n; ++i) out[i] *= nn * w[i];
  }
  return out;
}

Vector iib_values(const Matrix& gamma, const Matrix& v_tilde, const std::vector<Matrix>& lambda,
                  const std::vector<Matrix>& s) {
  if (lambda.size() != s.size()) {
    throw Error(ErrorCode::LengthMismatch, "IIB: Lambda and S lists differ in length");
  }
  const Vector vd = v_tilde.diagonal();
  if ((vd.array() <= 0.0).any()) {
    throw Error(ErrorCode::NonPositiveVariance, "IIB: unweighted variance has a nonpositive diagonal");
  }
  // Gamma^-1 X Gamma^-T = (-Gamma)^-1 X (-Gamma)^-1 for symmetric Gamma.
  const Cholesky c(Matrix(-gamma));
  Vector out(static_cast<Index>(lambda.size()));
  for (std::size_t k = 0; k < lambda.size(); ++k) {
    const Matrix gl = c.solve(lambda[k]);
    const Matrix m = gl * s[k] * gl.transpose();
    double tr = 0.0;
    for (Index j = 0; j < m.rows(); ++j) tr += m(j, j) / vd[j];
    out[static_cast<Index>(k)] = tr;
  }
  return out;
}

Vector iib_weights(const Vector& iib) {
  if (iib.size() == 0) throw Error(ErrorCode::InvalidArgument, "IIB: empty index vector");
  if ((iib.array() <= 1e-14).all()) {
    throw Error(ErrorCode::DegenerateIIB, "no secondary dataset carries information (all IIB ~ 0)");
  }
  const Vector clipped = iib.cwiseMax(0.0);
  return clipped / clipped.sum();
}

SchemeSpec resolve_iib(const SchemeSpec& spec, const Vector& iib) {
  if (spec.mode != WeightMode::IIB) return spec;
  if (iib.size() != spec.k) throw Error(ErrorCode::LengthMismatch, "IIB vector length is not K");
  SchemeSpec out = spec;
  out.mode = WeightMode::Fixed;
  for (Index row = 0; row < spec.rows(); ++row) {
    std::vector<Index> support;
    for (Index m = 0; m < spec.k; ++m) {
      if (spec.in_support(row, m)) support.push_back(m);
    }
    Vector sub(static_cast<Index>(support.size()));
    for (std::size_t j = 0; j < support.size(); ++j) sub[static_cast<Index>(j)] = iib[support[j]];
    Vector w;
    try {
      w = iib_weights(sub);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::DegenerateIIB) throw;
      warn("scheme '" + spec.label + "': " + e.what() + "; using equal weights");
      w = Vector::Constant(sub.size(), 1.0 / static_cast<double>(sub.size()));
    }
    out.omega.row(row).setZero();
    for (std::size_t j = 0; j < support.size(); ++j) out.omega(row, support[j]) = w[static_cast<Index>(j)];
  }
  return out;
}

}  // namespace minbo
