#include "minbo/variance.hpp"

#include "minbo/error.hpp"

#include <cmath>
#include <string>

namespace minbo {

namespace {

void main_pieces(VarianceComponents& comp, const MainDataset& data, const Vector& beta,
                 const std::vector<ELFit>& fits) {
  const Matrix g = main_score(data, beta).transpose();  // p x n
  comp.n = data.n();
  comp.gamma = main_score_jacobian(data, beta);
  comp.sigma = cross_moment(g, g);
  comp.lambda.clear();
  for (const auto& f : fits) {
    if (f.h.cols() != data.n()) {
      throw Error(ErrorCode::LengthMismatch, "secondary fit and main data differ in n");
    }
    comp.lambda.push_back(cross_moment(g, f.h));
  }
}

}  // namespace

VarianceComponents variance_components(const MainDataset& data, const Vector& beta,
                                        const std::vector<ELFit>& fits) {
  VarianceComponents comp;
  main_pieces(comp, data, beta, fits);
  const std::size_t k = fits.size();
  comp.s.resize(k);
  comp.cross.assign(k, std::vector<Matrix>(k));
  for (std::size_t a = 0; a < k; ++a) {
    comp.s[a] = fits[a].s;
    comp.cross[a][a] = fits[a].s11;
    for (std::size_t b = a + 1; b < k; ++b) {
      comp.cross[a][b] = cross_moment(fits[a].h, fits[b].h);
      comp.cross[b][a] = comp.cross[a][b].transpose();
    }
  }
  return comp;
}

VarianceComponents rebase_components(const VarianceComponents& comp, const MainDataset& data,
                                     const Vector& beta, const std::vector<ELFit>& fits) {
  VarianceComponents out = comp;
  main_pieces(out, data, beta, fits);
  return out;
}

Matrix sandwich(const Matrix& gamma, const Matrix& middle) {
  const Matrix ginv = Cholesky(Matrix(-gamma)).inverse();
  return symmetrized(ginv * middle * ginv);
}

namespace {

Matrix middle_matrix(const VarianceComponents& comp, const Vector& wt) {
  const Index k = comp.k();
  Matrix mid = comp.sigma;
  for (Index m = 0; m < k; ++m) {
    const auto um = static_cast<std::size_t>(m);
    mid -= (2.0 * wt[m] - wt[m] * wt[m]) * (comp.lambda[um] * comp.s[um] * comp.lambda[um].transpose());
  }
  for (Index m = 0; m < k; ++m) {
    for (Index mp = 0; mp < k; ++mp) {
      if (m == mp) continue;
      const auto um = static_cast<std::size_t>(m), ump = static_cast<std::size_t>(mp);
      mid += (wt[m] * wt[mp]) * (comp.lambda[um] * comp.s[um] * comp.cross[um][ump] *
                                 comp.s[ump].transpose() * comp.lambda[ump].transpose());
    }
  }
  return mid;
}

}  // namespace

Matrix scheme_variance(const VarianceComponents& comp, const SchemeSpec& spec) {
  if (spec.k != comp.k()) throw Error(ErrorCode::LengthMismatch, "scheme K does not match components");
  if (spec.mode != WeightMode::Fixed) {
    throw Error(ErrorCode::InvalidArgument, "resolve IIB weights before computing the variance");
  }
  return sandwich(comp.gamma, middle_matrix(comp, spec.column_totals()));
}

Matrix averaging_variance(const VarianceComponents& comp, const Vector& omega) {
  if (omega.size() != comp.k()) throw Error(ErrorCode::LengthMismatch, "omega length is not K");
  const Index k = comp.k();
  Matrix mid = comp.sigma;
  for (Index m = 0; m < k; ++m) {
    const auto& l = comp.lambda[static_cast<std::size_t>(m)];
    mid -= (2.0 * omega[m] - omega[m] * omega[m]) * (l * comp.s[static_cast<std::size_t>(m)] * l.transpose());
  }
  for (Index a = 0; a < k; ++a) {
    for (Index b = 0; b < k; ++b) {
      if (a == b) continue;
      const auto ua = static_cast<std::size_t>(a), ub = static_cast<std::size_t>(b);
      mid += (omega[a] * omega[b]) * (comp.lambda[ua] * comp.s[ua] * comp.cross[ua][ub] *
                                      comp.s[ub].transpose() * comp.lambda[ub].transpose());
    }
  }
  return sandwich(comp.gamma, mid);
}

Matrix aggregating_variance(const VarianceComponents& comp) {
  return averaging_variance(comp, Vector::Ones(comp.k()));
}

Matrix unweighted_variance(const VarianceComponents& comp) {
  return sandwich(comp.gamma, comp.sigma);
}

EstimateReport summarize(const Vector& beta, const Matrix& v, Index n,
                         const std::optional<Matrix>& reference, double confidence,
                         std::string label) {
  const Index p = beta.size();
  if (v.rows() != p || v.cols() != p) throw Error(ErrorCode::DimensionMismatch, "V is not p x p");
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "n must be positive");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw Error(ErrorCode::OutOfRange, "confidence level must lie in (0, 1)");
  }
  EstimateReport r;
  r.label = std::move(label);
  r.beta = beta;
  r.v = v;
  r.n = n;
  r.confidence = confidence;
  const double zq = normal_quantile(0.5 + 0.5 * confidence);
  r.ase.resize(p);
  r.ci_lower.resize(p);
  r.ci_upper.resize(p);
  r.z.resize(p);
  r.p_value.resize(p);
  for (Index j = 0; j < p; ++j) {
    if (!(v(j, j) > 0.0) || !std::isfinite(v(j, j))) {
      throw Error(ErrorCode::NonPositiveVariance,
                  "variance of coefficient " + std::to_string(j) + " is not positive");
    }
    r.ase[j] = std::sqrt(v(j, j) / static_cast<double>(n));
    r.ci_lower[j] = beta[j] - zq * r.ase[j];
    r.ci_upper[j] = beta[j] + zq * r.ase[j];
    r.z[j] = beta[j] / r.ase[j];
    r.p_value[j] = std::erfc(std::abs(r.z[j]) / std::sqrt(2.0));
  }
  if (reference) {
    if (reference->rows() != p || reference->cols() != p) {
      throw Error(ErrorCode::DimensionMismatch, "reference covariance is not p x p");
    }
    r.ere = reference->diagonal().cwiseQuotient(v.diagonal());
  }
  return r;
}

}  // namespace minbo
