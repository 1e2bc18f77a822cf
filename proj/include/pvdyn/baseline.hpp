#pragma once

// Joint-space reference algorithms. These are dense and deliberately simple:
// they certify the recursive solvers and are never used inside them.

#include "pvdyn/kinematics.hpp"
#include "pvdyn/model.hpp"

namespace pvdyn {

/// Joint-space inertia matrix by the composite rigid body algorithm.
MatX crba(const RobotModel& model, const VecX& q);

/// Bias torques c with M qdd + c = tau for qdd the unconstrained acceleration:
/// velocity products, gravity and external wrenches.
VecX rnea_bias(const RobotModel& model, const RobotState& state);

/// Inverse dynamics tau = M qdd + c.
VecX rnea(const RobotModel& model, const RobotState& state, const VecX& qdd);

struct JointSpaceModel {
  MatX M;
  VecX c;
  MatX J;
  VecX Jdot_qd;
};

JointSpaceModel joint_space_model(const RobotModel& model, const RobotState& state,
                                  const ConstraintSet& constraints);

/// Tree-sparse factorization M = L^T L (L lower triangular), eliminating in
/// reverse topological order so no fill-in appears outside the ancestor pattern.
MatX ltl_factor(const MatX& M, const std::vector<int>& dof_parents);

/// Inverse operational-space inertia J M^{-1} J^T via Y = J L^{-1}, Y Y^T.
MatX ltl_osim(const RobotModel& model, const RobotState& state, const ConstraintSet& constraints);

struct KktSolution {
  VecX qdd;
  VecX lambda;
};

/// Dense solve of [[M, J^T], [J, 0]] (qdd, lambda) = (tau - c, k - Jdot qd).
KktSolution kkt_oracle(const RobotModel& model, const RobotState& state,
                       const ConstraintSet& constraints);
KktSolution kkt_oracle(const JointSpaceModel& js, const VecX& tau, const VecX& k);

/// Dense soft-constraint reference: (M + J^T W J) qdd = tau - c + J^T W (k - Jdot qd).
VecX joint_space_soft_solve(const RobotModel& model, const RobotState& state,
                            const ConstraintSet& constraints);

/// Kinetic plus potential energy (potential relative to the world origin).
double mechanical_energy(const RobotModel& model, const RobotState& state);

}  // namespace pvdyn
