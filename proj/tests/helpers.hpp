#pragma once

#include "minbo/numerics.hpp"

#include <doctest.h>

#include <cmath>

namespace minbo::test {

inline double rel_diff(const Matrix& a, const Matrix& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

inline Matrix random_matrix(Index rows, Index cols, RngStream& rng) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = rng.normal();
  return m;
}

// A A' / cols + shift I, well conditioned.
inline Matrix random_spd(Index d, RngStream& rng, double shift = 0.5) {
  const Matrix a = random_matrix(d, d + 2, rng);
  return a * a.transpose() / static_cast<double>(d + 2) + shift * Matrix::Identity(d, d);
}

// Independent inverse of Phi: bisection on the erfc form.
inline double quantile_oracle(double p) {
  double lo = -40.0, hi = 40.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::sqrt(2.0)) < p) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace minbo::test
