#pragma once

// Small dense helpers shared by the recursive solvers. Everything here works
// in place on caller-owned storage so the solver sweeps stay allocation free.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <optional>

namespace pvdyn::linalg {

/// Pivot tolerance relative to the largest diagonal entry.
inline constexpr double kPivotTolerance = 1e-10;

/// In-place Cholesky A = L L^T on the lower triangle of a symmetric matrix.
/// Returns the index of the first pivot that is not larger than
/// `rel_tol * max|diag(A)|` (the factorization is then unusable), or nullopt.
template <typename Derived>
std::optional<Eigen::Index> cholesky_in_place(Eigen::MatrixBase<Derived>& A,
                                              double rel_tol = kPivotTolerance) {
  const Eigen::Index n = A.rows();
  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, std::abs(A(i, i)));
  const double tol = rel_tol * scale;
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = A(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= A(j, k) * A(j, k);
    if (!(d > tol) || scale == 0.0) return j;
    const double ljj = std::sqrt(d);
    A(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= A(i, k) * A(j, k);
      A(i, j) = s / ljj;
    }
  }
  return std::nullopt;
}

/// Solves (L L^T) x = b in place, L the lower triangle left by cholesky_in_place.
template <typename DerivedL, typename DerivedB>
void cholesky_solve_in_place(const Eigen::MatrixBase<DerivedL>& L, Eigen::MatrixBase<DerivedB>& b) {
  const Eigen::Index n = L.rows();
  for (Eigen::Index c = 0; c < b.cols(); ++c) {
    for (Eigen::Index i = 0; i < n; ++i) {
      double s = b(i, c);
      for (Eigen::Index k = 0; k < i; ++k) s -= L(i, k) * b(k, c);
      b(i, c) = s / L(i, i);
    }
    for (Eigen::Index i = n - 1; i >= 0; --i) {
      double s = b(i, c);
      for (Eigen::Index k = i + 1; k < n; ++k) s -= L(k, i) * b(k, c);
      b(i, c) = s / L(i, i);
    }
  }
}

/// max|a - b| / max(1, max|b|): the relative comparison used by every
/// cross-solver check in the test suites.
template <typename DA, typename DB>
double relative_error(const Eigen::MatrixBase<DA>& a, const Eigen::MatrixBase<DB>& b) {
  if (a.size() == 0) return 0.0;
  const double diff = (a - b).cwiseAbs().maxCoeff();
  return diff / std::max(1.0, b.cwiseAbs().maxCoeff());
}

}  // namespace pvdyn::linalg
