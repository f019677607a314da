#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace minbo {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

/// Lower Cholesky factor of a symmetric positive-definite matrix.
///
/// A pivot at or below 1e-12 times the largest diagonal entry raises
/// NotPositiveDefinite; the factor is never regularized.
class Cholesky {
 public:
  explicit Cholesky(const Matrix& a);

  const Matrix& lower() const { return l_; }
  Index size() const { return l_.rows(); }

  Matrix solve(const Matrix& b) const;
  Vector solve(const Vector& b) const;
  Matrix inverse() const;

 private:
  Matrix l_;
};

/// Solves A X = B for symmetric positive-definite A.
Matrix solve_spd(const Matrix& a, const Matrix& b);
Matrix inverse_spd(const Matrix& a);

/// Smallest eigenvalue of a symmetric matrix.
double min_eigenvalue_symmetric(const Matrix& a);

/// Returns (A + Aᵀ)/2.
Matrix symmetrized(const Matrix& a);

/// (1/n) A Bᵀ for column-per-subject layouts (n = columns). Entry (i, j) is a
/// single dot product, so cross_moment(A, A) is exactly symmetric.
Matrix cross_moment(const Matrix& a, const Matrix& b);

inline double expit(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double normal_cdf(double x);
double normal_quantile(double p);

/// Counter-based 64-bit generator. The (seed, stream) pair fixes the whole
/// sequence, so Monte Carlo replicates can be generated in any order.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// Draws from N(mean, cov) as mean + L z with L the Cholesky factor.
Vector sample_mvn(const Vector& mean, const Matrix& cov, RngStream& rng);

/// Same construction with a precomputed factor, for repeated draws.
class MvnSampler {
 public:
  MvnSampler(Vector mean, const Matrix& cov);
  /// mean + F z for an arbitrary square factor F (F F' = covariance).
  static MvnSampler from_factor(Vector mean, Matrix factor);

  Vector operator()(RngStream& rng) const;
  /// mean + L z for caller-supplied standard normals z.
  Vector from_normals(const Vector& z) const;

  Index dim() const { return mean_.size(); }

 private:
  MvnSampler() = default;

  Vector mean_;
  Matrix l_;
};

/// Symmetric square root of the nearest PSD matrix: eigenvalues below zero
/// are set to zero. `clipped` reports whether any were.
Matrix psd_sqrt(const Matrix& a, bool* clipped = nullptr);

/// Exchangeable correlation matrix with unit diagonal.
Matrix exchangeable(Index dim, double rho);

}  // namespace minbo
