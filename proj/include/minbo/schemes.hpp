#pragma once

#include "minbo/numerics.hpp"

#include <string>
#include <vector>

namespace minbo {

enum class WeightMode { Fixed, IIB };
enum class SchemeKind { Averaging, Aggregating, Custom };

/// K' x K nonnegative, row-stochastic integration array.
///
/// In IIB mode the nonzero pattern of `omega` is the structure declared by
/// the user; resolve_iib replaces the values within each row.
struct SchemeSpec {
  Index k = 0;
  Matrix omega;
  WeightMode mode = WeightMode::Fixed;
  std::string label;

  Index rows() const { return omega.rows(); }
  /// omega-tilde_m = sum over rows of column m.
  Vector column_totals() const;
  bool in_support(Index row, Index k) const { return omega(row, k) > 0.0; }
};

/// Throws InvalidWeights on negative or non-finite entries, a row sum off by
/// more than 1e-12, or a dataset used by more than one row.
void validate_scheme(const SchemeSpec& spec);

/// Averaging: one row of equal weights over all K datasets. Aggregating:
/// the K x K identity.
SchemeSpec build_scheme(SchemeKind kind, Index k, WeightMode mode = WeightMode::Fixed);
SchemeSpec build_scheme(const Matrix& omega, WeightMode mode = WeightMode::Fixed);
/// Averaging over a subset; the other datasets get structural zeros.
SchemeSpec averaging_over(Index k, const std::vector<Index>& datasets, WeightMode mode);
SchemeSpec aggregating_over(Index k, const std::vector<Index>& datasets);

/// Integrated score p_i = prod_{k'} sum_k omega_{k'k} w_ki on the w = n p
/// scale. `weights` holds the K EL weight vectors.
Vector integrate_scores(const SchemeSpec& spec, const std::vector<Vector>& weights);

/// Direct formulas: sum_k omega_k w_ki and prod_k w_ki (w = n p).
Vector averaging_scores(const Vector& omega, const std::vector<Vector>& weights);
Vector aggregating_scores(const std::vector<Vector>& weights);

/// IIB_k = trace{Diag(V~)^-1/2 Gamma^-1 Lambda_k S_k Lambda_k' Gamma^-T Diag(V~)^-1/2}.
Vector iib_values(const Matrix& gamma, const Matrix& v_tilde, const std::vector<Matrix>& lambda,
                  const std::vector<Matrix>& s);

/// IIB normalized to sum to one. Throws DegenerateIIB when every value is at
/// or below 1e-14.
Vector iib_weights(const Vector& iib);

/// Fixed-weight copy of `spec`: in IIB mode each row is re-weighted by IIB
/// over its support; degenerate rows fall back to equal weights with a
/// warning.
SchemeSpec resolve_iib(const SchemeSpec& spec, const Vector& iib);

}  // namespace minbo
