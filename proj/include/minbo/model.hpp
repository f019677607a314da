#pragma once

#include "minbo/numerics.hpp"

#include <cstdint>
#include <vector>

namespace minbo {

/// Main study: binary endpoint and design matrix (first column is the
/// intercept). Row i of `x` is subject i.
struct MainDataset {
  Vector y;
  Matrix x;

  /// Validates y in {0,1}, finiteness and full column rank of x.
  static MainDataset create(Vector y, Matrix x);

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }
};

enum class SecondaryKind { Longitudinal, CrossSectional };

/// One secondary dataset aligned to the main subjects.
///
/// Longitudinal: `y` is n x m (one row of repeated outcomes per subject) and
/// `x` stacks the m x r subject designs, rows [i*m, (i+1)*m).
/// Cross-sectional: `y` is n x 1, `x` is n x r and `z` n x q holds the
/// redundant covariates. Blocks of unobserved subjects are never read.
struct SecondaryDataset {
  SecondaryKind kind = SecondaryKind::Longitudinal;
  Index m = 1;
  Matrix y;
  Matrix x;
  Matrix z;
  std::vector<std::uint8_t> observed;

  static SecondaryDataset longitudinal(Matrix y, Matrix x, std::vector<std::uint8_t> observed);
  static SecondaryDataset cross_sectional(Vector y, Matrix x, Matrix z,
                                          std::vector<std::uint8_t> observed);

  Index n() const { return static_cast<Index>(observed.size()); }
  Index r() const { return x.cols(); }
  Index q() const { return z.cols(); }
  Index observed_count() const;

  auto subject_design(Index i) const { return x.middleRows(i * m, m); }
};

enum class Link { Identity, Logit };
enum class VarianceMode { Unit, PreliminaryResidual };

/// Working model for a secondary dataset and the over-identified estimating
/// function built from it.
struct WorkingModelSpec {
  SecondaryKind kind = SecondaryKind::Longitudinal;
  Link link = Link::Identity;
  std::vector<Matrix> basis;  // longitudinal only, each m x m symmetric 0/1
  VarianceMode variance_mode = VarianceMode::Unit;
  Index theta_dim = 0;
  // R̃^{-1/2} diagonal, one entry per time point; filled by prepare_spec.
  Vector inv_sqrt_variance;
  // Only for tests of the just-identified reduction.
  bool allow_just_identified = false;

  /// Dimension of h: r * tau for longitudinal, r + q for cross-sectional.
  Index moment_dim(Index q = 0) const;
};

/// The four standard basis matrices: identity, zero diagonal with ones
/// elsewhere, ones on the first sub/super diagonals, ones at both corners.
std::vector<Matrix> default_basis(Index m);

WorkingModelSpec longitudinal_spec(Index m, Index r, VarianceMode mode);
WorkingModelSpec longitudinal_spec(Index r, std::vector<Matrix> basis, VarianceMode mode);
WorkingModelSpec cross_sectional_spec(Index r);

/// Checks dimensions and over-identification against a dataset. Throws
/// DimensionMismatch or InvalidArgument.
void validate_spec(const SecondaryDataset& data, const WorkingModelSpec& spec);

/// Fills R̃ for the dataset. In PreliminaryResidual mode it runs OLS on the
/// observed subjects once and freezes the per-time-point residual variances.
WorkingModelSpec prepare_spec(const SecondaryDataset& data, WorkingModelSpec spec);

/// Per-subject logistic scores, n x p: row i = x_i (y_i - expit(x_i' beta)).
Matrix main_score(const MainDataset& data, const Vector& beta);

/// (1/n) sum of d g / d beta' = -(1/n) sum mu(1-mu) x x'.
Matrix main_score_jacobian(const MainDataset& data, const Vector& beta);

/// h for subject i (ignores the observation indicator).
Vector h_eval(const SecondaryDataset& data, Index i, const Vector& theta,
              const WorkingModelSpec& spec);

/// d h / d theta' for subject i, d x r.
Matrix h_jacobian(const SecondaryDataset& data, Index i, const Vector& theta,
                  const WorkingModelSpec& spec);

/// sum_j lambda_j d^2 h_j / d theta d theta' for subject i, r x r.
Matrix h_curvature(const SecondaryDataset& data, Index i, const Vector& theta,
                   const WorkingModelSpec& spec, const Vector& lambda);

/// R_i h(D_i; theta) for all subjects of one dataset, evaluated in bulk.
/// Columns are subjects; unobserved subjects contribute zero columns.
class MomentModel {
 public:
  MomentModel(const SecondaryDataset& data, const WorkingModelSpec& spec);

  Index n() const { return n_; }
  Index dim() const { return d_; }
  Index theta_dim() const { return r_; }
  bool observed(Index i) const { return observed_[static_cast<std::size_t>(i)] != 0; }
  Index observed_count() const { return n_obs_; }
  bool linear() const { return linear_; }

  /// d x n matrix of R_i h_i(theta).
  Matrix values(const Vector& theta) const;
  /// R_i d h_i / d theta', d x r.
  Matrix jacobian(Index i, const Vector& theta) const;
  /// R_i sum_j lambda_j d^2 h_ij / d theta d theta', r x r.
  Matrix curvature(Index i, const Vector& theta, const Vector& lambda) const;
  /// (1/n) sum_i R_i d h_i / d theta'.
  Matrix mean_jacobian(const Vector& theta) const;

  /// The moment function Q' h for a d x d' matrix Q. Used to drop directions
  /// that carry no sample variation.
  MomentModel projected(const Matrix& q) const;

 private:
  MomentModel() = default;

  Index n_ = 0, d_ = 0, r_ = 0, n_obs_ = 0;
  bool linear_ = false;
  std::vector<std::uint8_t> observed_;
  // linear (identity link) case: h_i = c_i - G_i theta
  Matrix c_;               // d x n
  std::vector<Matrix> g_;  // n blocks of d x r (empty for unobserved)
  // logit case
  Matrix design_;  // n x d, (x', z')
  Matrix x_;       // n x r
  Vector y_;
};

}  // namespace minbo
