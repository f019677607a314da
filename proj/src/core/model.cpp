#include "minbo/model.hpp"

#include "minbo/error.hpp"

#include <cmath>
#include <string>

namespace minbo {

namespace {

void require(bool ok, ErrorCode code, const std::string& what) {
  if (!ok) throw Error(code, what);
}

bool is_binary(double v) { return v == 0.0 || v == 1.0; }

}  // namespace

MainDataset MainDataset::create(Vector y, Matrix x) {
  require(y.size() == x.rows(), ErrorCode::DimensionMismatch,
          "main dataset: outcome length does not match design rows");
  require(x.rows() > x.cols() && x.cols() > 0, ErrorCode::InvalidArgument,
          "main dataset: need more subjects than covariates");
  require(x.allFinite() && y.allFinite(), ErrorCode::InvalidArgument,
          "main dataset: non-finite entry");
  for (Index i = 0; i < y.size(); ++i) {
    require(is_binary(y[i]), ErrorCode::InvalidArgument,
            "main dataset: outcome of subject " + std::to_string(i) + " is not 0/1");
  }
  try {
    Cholesky chol(x.transpose() * x);
  } catch (const Error&) {
    throw Error(ErrorCode::RankDeficient, "main dataset: design matrix is not of full column rank");
  }
  return MainDataset{std::move(y), std::move(x)};
}

SecondaryDataset SecondaryDataset::longitudinal(Matrix y, Matrix x,
                                                std::vector<std::uint8_t> observed) {
  SecondaryDataset d;
  d.kind = SecondaryKind::Longitudinal;
  d.m = y.cols();
  require(static_cast<Index>(observed.size()) == y.rows(), ErrorCode::DimensionMismatch,
          "longitudinal dataset: indicator length does not match subjects");
  require(d.m >= 1 && x.rows() == y.rows() * d.m, ErrorCode::DimensionMismatch,
          "longitudinal dataset: design rows must equal subjects x time points");
  for (auto& r : observed) r = r ? 1 : 0;
  d.y = std::move(y);
  d.x = std::move(x);
  d.observed = std::move(observed);
  for (Index i = 0; i < d.n(); ++i) {
    if (!d.observed[static_cast<std::size_t>(i)]) continue;
    require(d.y.row(i).allFinite() && d.subject_design(i).allFinite(),
            ErrorCode::InvalidArgument,
            "longitudinal dataset: non-finite value for observed subject " + std::to_string(i));
  }
  return d;
}

SecondaryDataset SecondaryDataset::cross_sectional(Vector y, Matrix x, Matrix z,
                                                   std::vector<std::uint8_t> observed) {
  SecondaryDataset d;
  d.kind = SecondaryKind::CrossSectional;
  d.m = 1;
  const Index n = static_cast<Index>(observed.size());
  require(y.size() == n && x.rows() == n && z.rows() == n, ErrorCode::DimensionMismatch,
          "cross-sectional dataset: row counts differ");
  for (auto& r : observed) r = r ? 1 : 0;
  d.y = std::move(y);
  d.x = std::move(x);
  d.z = std::move(z);
  d.observed = std::move(observed);
  for (Index i = 0; i < n; ++i) {
    if (!d.observed[static_cast<std::size_t>(i)]) continue;
    require(std::isfinite(d.y(i, 0)) && d.x.row(i).allFinite() && d.z.row(i).allFinite(),
            ErrorCode::InvalidArgument,
            "cross-sectional dataset: non-finite value for observed subject " + std::to_string(i));
  }
  return d;
}

Index SecondaryDataset::observed_count() const {
  Index c = 0;
  for (auto r : observed) c += r;
  return c;
}

Index WorkingModelSpec::moment_dim(Index q) const {
  if (kind == SecondaryKind::Longitudinal) return theta_dim * static_cast<Index>(basis.size());
  return theta_dim + q;
}

std::vector<Matrix> default_basis(Index m) {
  std::vector<Matrix> v(4, Matrix::Zero(m, m));
  v[0].setIdentity();
  v[1].setOnes();
  v[1].diagonal().setZero();
  for (Index t = 0; t + 1 < m; ++t) {
    v[2](t, t + 1) = 1.0;
    v[2](t + 1, t) = 1.0;
  }
  v[3](0, 0) = 1.0;
  v[3](m - 1, m - 1) = 1.0;
  return v;
}

WorkingModelSpec longitudinal_spec(Index m, Index r, VarianceMode mode) {
  return longitudinal_spec(r, default_basis(m), mode);
}

WorkingModelSpec longitudinal_spec(Index r, std::vector<Matrix> basis, VarianceMode mode) {
  WorkingModelSpec s;
  s.kind = SecondaryKind::Longitudinal;
  s.link = Link::Identity;
  s.basis = std::move(basis);
  s.variance_mode = mode;
  s.theta_dim = r;
  return s;
}

WorkingModelSpec cross_sectional_spec(Index r) {
  WorkingModelSpec s;
  s.kind = SecondaryKind::CrossSectional;
  s.link = Link::Logit;
  s.theta_dim = r;
  return s;
}

void validate_spec(const SecondaryDataset& data, const WorkingModelSpec& spec) {
  require(spec.kind == data.kind, ErrorCode::InvalidArgument,
          "working model kind does not match the dataset kind");
  require(spec.theta_dim == data.r(), ErrorCode::DimensionMismatch,
          "working model theta dimension " + std::to_string(spec.theta_dim) +
              " does not match covariate count " + std::to_string(data.r()));
  if (spec.kind == SecondaryKind::Longitudinal) {
    require(spec.link == Link::Identity, ErrorCode::InvalidArgument,
            "longitudinal working models support the identity link only");
    require(!spec.basis.empty(), ErrorCode::InvalidArgument, "empty basis");
    for (const auto& v : spec.basis) {
      require(v.rows() == data.m && v.cols() == data.m, ErrorCode::DimensionMismatch,
              "basis matrix is not m x m");
      require((v - v.transpose()).cwiseAbs().maxCoeff() == 0.0, ErrorCode::InvalidArgument,
              "basis matrix is not symmetric");
    }
    require(spec.inv_sqrt_variance.size() == 0 || spec.inv_sqrt_variance.size() == data.m,
            ErrorCode::DimensionMismatch, "variance vector length is not m");
  } else {
    require(data.q() >= 1 || spec.allow_just_identified, ErrorCode::InvalidArgument,
            "cross-sectional working model needs at least one redundant covariate");
  }
  require(spec.moment_dim(data.q()) > spec.theta_dim || spec.allow_just_identified,
          ErrorCode::InvalidArgument,
          "estimating function is not over-identified (dim h must exceed dim theta)");
}

WorkingModelSpec prepare_spec(const SecondaryDataset& data, WorkingModelSpec spec) {
  validate_spec(data, spec);
  if (spec.kind != SecondaryKind::Longitudinal) return spec;
  const Index m = data.m;
  spec.inv_sqrt_variance = Vector::Ones(m);
  if (spec.variance_mode != VarianceMode::PreliminaryResidual) return spec;

  const Index r = data.r();
  Matrix xtx = Matrix::Zero(r, r);
  Vector xty = Vector::Zero(r);
  Index n_obs = 0;
  for (Index i = 0; i < data.n(); ++i) {
    if (!data.observed[static_cast<std::size_t>(i)]) continue;
    const auto xi = data.subject_design(i);
    xtx.noalias() += xi.transpose() * xi;
    xty.noalias() += xi.transpose() * data.y.row(i).transpose();
    ++n_obs;
  }
  if (n_obs == 0) return spec;
  const Vector theta = solve_spd(xtx, xty);
  Vector var = Vector::Zero(m);
  for (Index i = 0; i < data.n(); ++i) {
    if (!data.observed[static_cast<std::size_t>(i)]) continue;
    const Vector e = data.y.row(i).transpose() - data.subject_design(i) * theta;
    var += e.cwiseAbs2();
  }
  var /= static_cast<double>(n_obs);
  for (Index t = 0; t < m; ++t) {
    require(var[t] > 0.0, ErrorCode::InvalidArgument,
            "preliminary residual variance is zero at time point " + std::to_string(t));
    spec.inv_sqrt_variance[t] = 1.0 / std::sqrt(var[t]);
  }
  return spec;
}

Matrix main_score(const MainDataset& data, const Vector& beta) {
  const Vector eta = data.x * beta;
  Vector resid(data.n());
  for (Index i = 0; i < data.n(); ++i) resid[i] = data.y[i] - expit(eta[i]);
  return resid.asDiagonal() * data.x;
}

Matrix main_score_jacobian(const MainDataset& data, const Vector& beta) {
  const Vector eta = data.x * beta;
  Vector w(data.n());
  for (Index i = 0; i < data.n(); ++i) {
    const double mu = expit(eta[i]);
    w[i] = mu * (1.0 - mu);
  }
  Matrix gamma = -(data.x.transpose() * w.asDiagonal() * data.x) / static_cast<double>(data.n());
  return symmetrized(gamma);
}

namespace {

Vector variance_scale(const SecondaryDataset& data, const WorkingModelSpec& spec) {
  if (spec.inv_sqrt_variance.size() == data.m) return spec.inv_sqrt_variance;
  return Vector::Ones(data.m);
}

void check_subject(const SecondaryDataset& data, Index i, const Vector& theta,
                   const WorkingModelSpec& spec) {
  require(i >= 0 && i < data.n(), ErrorCode::OutOfRange, "subject index out of range");
  require(theta.size() == data.r() && spec.theta_dim == data.r(), ErrorCode::DimensionMismatch,
          "theta length does not match covariate count");
}

struct MeanDerivs {
  double mu, d1, d2;
};

MeanDerivs mean_derivs(Link link, double eta) {
  if (link == Link::Identity) return {eta, 1.0, 0.0};
  const double mu = expit(eta);
  const double d1 = mu * (1.0 - mu);
  return {mu, d1, d1 * (1.0 - 2.0 * mu)};
}

Vector cross_design(const SecondaryDataset& data, Index i) {
  Vector d(data.r() + data.q());
  d << data.x.row(i).transpose(), data.z.row(i).transpose();
  return d;
}

}  // namespace

Vector h_eval(const SecondaryDataset& data, Index i, const Vector& theta,
              const WorkingModelSpec& spec) {
  check_subject(data, i, theta, spec);
  if (data.kind == SecondaryKind::Longitudinal) {
    const Index r = data.r();
    const Vector a = variance_scale(data, spec);
    const auto xi = data.subject_design(i);
    const Vector ae = a.cwiseProduct(data.y.row(i).transpose() - xi * theta);
    Vector h(r * static_cast<Index>(spec.basis.size()));
    for (std::size_t j = 0; j < spec.basis.size(); ++j) {
      h.segment(static_cast<Index>(j) * r, r) =
          xi.transpose() * a.cwiseProduct(spec.basis[j] * ae);
    }
    return h;
  }
  const auto md = mean_derivs(spec.link, data.x.row(i).dot(theta));
  return cross_design(data, i) * (data.y(i, 0) - md.mu);
}

Matrix h_jacobian(const SecondaryDataset& data, Index i, const Vector& theta,
                  const WorkingModelSpec& spec) {
  check_subject(data, i, theta, spec);
  const Index r = data.r();
  if (data.kind == SecondaryKind::Longitudinal) {
    const Vector a = variance_scale(data, spec);
    const auto xi = data.subject_design(i);
    const Matrix ax = a.asDiagonal() * xi;
    Matrix j(r * static_cast<Index>(spec.basis.size()), r);
    for (std::size_t b = 0; b < spec.basis.size(); ++b) {
      j.middleRows(static_cast<Index>(b) * r, r) = -(ax.transpose() * spec.basis[b] * ax);
    }
    return j;
  }
  const auto md = mean_derivs(spec.link, data.x.row(i).dot(theta));
  return -md.d1 * cross_design(data, i) * data.x.row(i);
}

Matrix h_curvature(const SecondaryDataset& data, Index i, const Vector& theta,
                   const WorkingModelSpec& spec, const Vector& lambda) {
  check_subject(data, i, theta, spec);
  const Index r = data.r();
  if (data.kind == SecondaryKind::Longitudinal) return Matrix::Zero(r, r);
  const auto md = mean_derivs(spec.link, data.x.row(i).dot(theta));
  const double ld = lambda.dot(cross_design(data, i));
  return -ld * md.d2 * data.x.row(i).transpose() * data.x.row(i);
}

MomentModel::MomentModel(const SecondaryDataset& data, const WorkingModelSpec& spec)
    : n_(data.n()), d_(spec.moment_dim(data.q())), r_(data.r()), observed_(data.observed) {
  validate_spec(data, spec);
  n_obs_ = data.observed_count();
  linear_ = spec.link == Link::Identity;
  if (linear_) {
    const Vector zero = Vector::Zero(r_);
    c_ = Matrix::Zero(d_, n_);
    g_.assign(static_cast<std::size_t>(n_), Matrix());
    for (Index i = 0; i < n_; ++i) {
      if (!observed(i)) continue;
      c_.col(i) = h_eval(data, i, zero, spec);
      g_[static_cast<std::size_t>(i)] = -h_jacobian(data, i, zero, spec);
    }
  } else {
    design_.resize(n_, d_);
    design_ << data.x, data.z;
    x_ = data.x;
    y_ = data.y.col(0);
  }
}

Matrix MomentModel::values(const Vector& theta) const {
  if (theta.size() != r_) {
    throw Error(ErrorCode::DimensionMismatch, "MomentModel: theta length mismatch");
  }
  Matrix h = Matrix::Zero(d_, n_);
  if (linear_) {
    for (Index i = 0; i < n_; ++i) {
      if (!observed(i)) continue;
      h.col(i).noalias() = c_.col(i) - g_[static_cast<std::size_t>(i)] * theta;
    }
    return h;
  }
  const Vector eta = x_ * theta;
  for (Index i = 0; i < n_; ++i) {
    if (!observed(i)) continue;
    h.col(i) = design_.row(i).transpose() * (y_[i] - expit(eta[i]));
  }
  return h;
}

Matrix MomentModel::jacobian(Index i, const Vector& theta) const {
  if (!observed(i)) return Matrix::Zero(d_, r_);
  if (linear_) return -g_[static_cast<std::size_t>(i)];
  const double mu = expit(x_.row(i).dot(theta));
  return -(mu * (1.0 - mu)) * design_.row(i).transpose() * x_.row(i);
}

Matrix MomentModel::curvature(Index i, const Vector& theta, const Vector& lambda) const {
  if (linear_ || !observed(i)) return Matrix::Zero(r_, r_);
  const double mu = expit(x_.row(i).dot(theta));
  const double d2 = mu * (1.0 - mu) * (1.0 - 2.0 * mu);
  const double ld = lambda.dot(design_.row(i));
  return -(ld * d2) * x_.row(i).transpose() * x_.row(i);
}

Matrix MomentModel::mean_jacobian(const Vector& theta) const {
  Matrix j = Matrix::Zero(d_, r_);
  if (linear_) {
    for (Index i = 0; i < n_; ++i) {
      if (observed(i)) j -= g_[static_cast<std::size_t>(i)];
    }
  } else {
    const Vector eta = x_ * theta;
    for (Index i = 0; i < n_; ++i) {
      if (!observed(i)) continue;
      const double mu = expit(eta[i]);
      j.noalias() -= (mu * (1.0 - mu)) * design_.row(i).transpose() * x_.row(i);
    }
  }
  return j / static_cast<double>(n_);
}

MomentModel MomentModel::projected(const Matrix& q) const {
  if (q.rows() != d_) throw Error(ErrorCode::DimensionMismatch, "MomentModel: projection rows != d");
  MomentModel out(*this);
  out.d_ = q.cols();
  if (linear_) {
    out.c_ = q.transpose() * c_;
    for (auto& g : out.g_) {
      if (g.size() > 0) g = q.transpose() * g;
    }
  } else {
    out.design_ = design_ * q;
  }
  return out;
}

}  // namespace minbo
