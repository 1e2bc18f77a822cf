#pragma once

#include <utility>
#include <vector>

#include <Eigen/Cholesky>

#include "pvdyn/model.hpp"
#include "pvdyn/solvers.hpp"

namespace pvdyn {

/// Inverse operational-space inertia of a constraint set.
struct OsimResult {
  /// Lambda^{-1} = J M^{-1} J^T in constraint-set order.
  MatX inverse;
  /// Cholesky factor (lower triangle) of `inverse`, constraint-set order.
  MatX factor;
  /// Depth-first row of each constraint-set row.
  std::vector<int> user_to_dfs;

  // Floating-base structure (depth-first row order), empty for fixed bases.
  bool floating = false;
  /// L_b^A before the rank-6 base update.
  MatX L_b;
  /// K_b^A in the base body frame.
  MatX6 K_b;
  Mat6 H_b = Mat6::Zero();
  /// Row ranges [begin, begin + count) of each child subtree of the base, and
  /// the number of rows attached to the base link itself (they come first).
  std::vector<std::pair<int, int>> branch_blocks;
  int base_rows = 0;

  /// Solves Lambda^{-1} x = y.
  VecX solve(const VecX& y) const;
};

/// Two-sweep PV-OSIM: poses, then articulated inertias and dual Hessians.
OsimResult pv_osim(const RobotModel& model, const VecX& q, const ConstraintSet& constraints);

/// Applies Lambda = (L_b + K_b H_b^{-1} K_b^T)^{-1} through the matrix
/// inversion lemma, factoring only the per-branch blocks of L_b and a 6x6 matrix.
class FastOsimOperator {
 public:
  explicit FastOsimOperator(const OsimResult& osim);
  /// x = Lambda y, constraint-set order.
  VecX apply(const VecX& y) const;
  int rows() const { return m_; }

 private:
  VecX block_solve(const VecX& y_dfs) const;

  int m_ = 0;
  std::vector<int> user_to_dfs_;
  std::vector<std::pair<int, int>> blocks_;
  std::vector<MatX> block_factors_;
  /// Lambda_b K_b.
  MatX6 LK_;
  Eigen::LLT<Mat6> inner_;
};

VecX pv_osim_fast_apply(const RobotModel& model, const VecX& q, const ConstraintSet& constraints,
                        const VecX& y);

}  // namespace pvdyn
