#pragma once

#include "minbo/el.hpp"
#include "minbo/schemes.hpp"

#include <optional>
#include <string>
#include <vector>

namespace minbo {

/// Plug-in ingredients of the sandwich formulas, all as 1/n sample averages.
struct VarianceComponents {
  Index n = 0;
  Matrix gamma;                            // p x p, mean score Jacobian
  Matrix sigma;                            // p x p, (1/n) sum g g'
  std::vector<Matrix> lambda;              // p x d_k, (1/n) sum g H~_k'
  std::vector<Matrix> s;                   // d_k x d_k, from the EL fits
  std::vector<std::vector<Matrix>> cross;  // d_k x d_k', (1/n) sum H~_k H~_k''

  Index k() const { return static_cast<Index>(lambda.size()); }
};

VarianceComponents variance_components(const MainDataset& data, const Vector& beta,
                                        const std::vector<ELFit>& fits);

/// Same secondary pieces, main-model pieces re-evaluated at another beta.
VarianceComponents rebase_components(const VarianceComponents& comp, const MainDataset& data,
                                     const Vector& beta, const std::vector<ELFit>& fits);

/// Covariance of sqrt(n)(beta - beta0) for an integration array:
/// Gamma^-1 {Sigma - sum_m (2w_m - w_m^2) L_m S_m L_m'
///   + sum_{m != m'} w_m w_m' L_m S_m S_{hm hm'} S_m'' L_m''} Gamma^-T,
/// with w_m the column totals of omega.
Matrix scheme_variance(const VarianceComponents& comp, const SchemeSpec& spec);

/// Direct two-scheme forms (they equal scheme_variance on the matching array).
Matrix averaging_variance(const VarianceComponents& comp, const Vector& omega);
Matrix aggregating_variance(const VarianceComponents& comp);

/// V~ = Gamma^-1 Sigma Gamma^-T.
Matrix unweighted_variance(const VarianceComponents& comp);

/// Gamma^-1 M Gamma^-T through the Cholesky factor of -Gamma, symmetrized.
Matrix sandwich(const Matrix& gamma, const Matrix& middle);

struct EstimateReport {
  std::string label;
  Vector beta;
  Matrix v;
  Vector ase;
  Vector ci_lower, ci_upper;
  Vector ere;  // empty without a reference
  Vector z, p_value;
  double confidence = 0.95;
  Index n = 0;
};

/// ASE_j = sqrt(V_jj / n), Wald interval and two-sided p-value, and
/// ERE_j = reference_jj / V_jj when a reference covariance is given.
EstimateReport summarize(const Vector& beta, const Matrix& v, Index n,
                         const std::optional<Matrix>& reference = std::nullopt,
                         double confidence = 0.95, std::string label = {});

}  // namespace minbo
