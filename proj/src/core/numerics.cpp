#include "minbo/numerics.hpp"

#include "minbo/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace minbo {

Cholesky::Cholesky(const Matrix& a) {
  if (a.rows() != a.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "Cholesky: matrix is not square");
  }
  const Index n = a.rows();
  if (n == 0) {
    throw Error(ErrorCode::DimensionMismatch, "Cholesky: empty matrix");
  }
  if (!a.allFinite()) {
    throw Error(ErrorCode::InvalidArgument, "Cholesky: non-finite entry");
  }
  const double scale = a.cwiseAbs().maxCoeff();
  if ((a - a.transpose()).cwiseAbs().maxCoeff() > 1e-12 * std::max(scale, 1e-300)) {
    throw Error(ErrorCode::InvalidArgument, "Cholesky: matrix is not symmetric");
  }
  const double tol = 1e-12 * a.diagonal().maxCoeff();
  l_ = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double pivot = a(j, j) - l_.row(j).head(j).squaredNorm();
    if (!(pivot > tol) || pivot <= 0.0) {
      throw Error(ErrorCode::NotPositiveDefinite,
                  "Cholesky pivot " + std::to_string(pivot) + " at column " + std::to_string(j) +
                      " is not above tolerance");
    }
    const double ljj = std::sqrt(pivot);
    l_(j, j) = ljj;
    for (Index i = j + 1; i < n; ++i) {
      l_(i, j) = (a(i, j) - l_.row(i).head(j).dot(l_.row(j).head(j))) / ljj;
    }
  }
}

Matrix Cholesky::solve(const Matrix& b) const {
  if (b.rows() != l_.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "Cholesky::solve: row count mismatch");
  }
  Matrix y = l_.triangularView<Eigen::Lower>().solve(b);
  return l_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Vector Cholesky::solve(const Vector& b) const {
  if (b.size() != l_.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "Cholesky::solve: length mismatch");
  }
  Vector y = l_.triangularView<Eigen::Lower>().solve(b);
  return l_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix Cholesky::inverse() const {
  Matrix inv = solve(Matrix(Matrix::Identity(l_.rows(), l_.rows())));
  return symmetrized(inv);
}

Matrix solve_spd(const Matrix& a, const Matrix& b) { return Cholesky(a).solve(b); }

Matrix inverse_spd(const Matrix& a) { return Cholesky(a).inverse(); }

double min_eigenvalue_symmetric(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

Matrix symmetrized(const Matrix& a) { return 0.5 * (a + a.transpose()); }

Matrix cross_moment(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::DimensionMismatch, "cross_moment: subject counts differ");
  }
  const Matrix at = a.transpose();
  const Matrix bt = b.transpose();
  const double n = static_cast<double>(a.cols());
  Matrix out(a.rows(), b.rows());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < b.rows(); ++j) out(i, j) = at.col(i).dot(bt.col(j)) / n;
  }
  return out;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace {

// Acklam's rational approximation, lower half (p <= 0.5).
double quantile_lower(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  // one Newton step on Phi(x) = p
  const double density = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  if (density > 0.0) x -= (normal_cdf(x) - p) / density;
  return x;
}

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw Error(ErrorCode::OutOfRange, "normal_quantile: p must lie in (0, 1)");
  }
  if (p == 0.5) return 0.0;
  // 1 - p is exact for p in [0.5, 1)
  return p < 0.5 ? quantile_lower(p) : -quantile_lower(1.0 - p);
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), key_(mix64(mix64(seed) + stream * 0xD1B54A32D192ED03ULL)) {}

RngStream::result_type RngStream::operator()() {
  ++counter_;
  return mix64(key_ + counter_ * kGolden);
}

double RngStream::uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

double RngStream::normal() { return normal_(*this); }

Vector sample_mvn(const Vector& mean, const Matrix& cov, RngStream& rng) {
  return MvnSampler(mean, cov)(rng);
}

MvnSampler::MvnSampler(Vector mean, const Matrix& cov) : mean_(std::move(mean)) {
  if (cov.rows() != mean_.size()) {
    throw Error(ErrorCode::DimensionMismatch, "sample_mvn: covariance does not match mean");
  }
  l_ = Cholesky(cov).lower();
}

MvnSampler MvnSampler::from_factor(Vector mean, Matrix factor) {
  if (factor.rows() != mean.size() || factor.cols() != mean.size()) {
    throw Error(ErrorCode::DimensionMismatch, "sample_mvn: factor does not match mean");
  }
  MvnSampler s;
  s.mean_ = std::move(mean);
  s.l_ = std::move(factor);
  return s;
}

Vector MvnSampler::operator()(RngStream& rng) const {
  Vector z(mean_.size());
  for (Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  return from_normals(z);
}

Vector MvnSampler::from_normals(const Vector& z) const {
  return mean_ + l_ * z;
}

Matrix psd_sqrt(const Matrix& a, bool* clipped) {
  if (a.rows() != a.cols()) throw Error(ErrorCode::DimensionMismatch, "psd_sqrt: matrix not square");
  const Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(a));
  if (es.info() != Eigen::Success) {
    throw Error(ErrorCode::NotConverged, "psd_sqrt: eigen decomposition failed");
  }
  const Vector ev = es.eigenvalues();
  if (clipped) *clipped = ev.minCoeff() < 0.0;
  const Vector root = ev.cwiseMax(0.0).cwiseSqrt();
  return symmetrized(es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose());
}

Matrix exchangeable(Index dim, double rho) {
  Matrix m = Matrix::Constant(dim, dim, rho);
  m.diagonal().setOnes();
  return m;
}

}  // namespace minbo
