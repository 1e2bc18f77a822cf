#pragma once

#include <vector>

#include "pvdyn/model.hpp"

namespace pvdyn {

/// Per-link results of the forward kinematic sweep. Velocities and bias
/// accelerations are body-frame quantities.
struct KinematicsCache {
  /// ^i X_{parent(i)}, the parent being the world for root links.
  std::vector<SpatialTransform> X_up;
  /// ^i X_world.
  std::vector<SpatialTransform> X_world;
  std::vector<Vec6> v;
  /// v_i x (S_i qd_i).
  std::vector<Vec6> a_bias;

  void resize(int num_links);
  int size() const { return static_cast<int>(X_up.size()); }

  /// Orientation of link i in the world (link -> world rotation).
  Mat3 rotation(int i) const { return X_world[static_cast<std::size_t>(i)].rotation().transpose(); }
  /// Origin of link i in world coordinates.
  const Vec3& position(int i) const { return X_world[static_cast<std::size_t>(i)].translation(); }
  /// Velocity of link i in the world-aligned frame at its origin.
  Vec6 world_aligned_velocity(int i) const;
};

/// Fills `cache` (resized if needed) for configuration q and velocity qd.
void forward_sweep(const RobotModel& model, const VecX& q, const VecX& qd, KinematicsCache& cache);
KinematicsCache forward_sweep(const RobotModel& model, const RobotState& state);

/// Poses only; velocities are set to zero.
void forward_positions(const RobotModel& model, const VecX& q, KinematicsCache& cache);

/// Rows K given in the world-aligned frame at the link origin, re-expressed
/// so they act on body-frame motion vectors: K * blockdiag(R, R).
template <typename Derived>
MatX6 world_aligned_to_body(const Eigen::MatrixBase<Derived>& K_wa, const Mat3& R) {
  MatX6 out(K_wa.rows(), 6);
  out.leftCols<3>().noalias() = K_wa.template leftCols<3>() * R;
  out.rightCols<3>().noalias() = K_wa.template rightCols<3>() * R;
  return out;
}

/// 6 x n body-frame geometric Jacobian of link i: v_i = J_i qd.
MatX link_jacobian(const RobotModel& model, const KinematicsCache& cache, int link);

struct ConstraintJacobian {
  MatX J;       ///< m x n
  VecX Jdot_qd; ///< m
};

/// Stacked K_i J_i (world-aligned rows) and the velocity-product term J-dot qd,
/// the latter from an acceleration sweep with qdd = 0 and no gravity.
ConstraintJacobian constraint_jacobian(const RobotModel& model, const RobotState& state,
                                       const ConstraintSet& constraints);

/// Body-frame link accelerations for a given qdd, gravity excluded.
std::vector<Vec6> link_accelerations(const RobotModel& model, const KinematicsCache& cache,
                                     const VecX& qdd);

}  // namespace pvdyn
