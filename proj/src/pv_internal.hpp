#pragma once

// Pieces of the PV recursion shared by the hard, soft and OSIM solvers.

#include <utility>
#include <vector>

#include "pvdyn/solvers.hpp"

namespace pvdyn::detail {

std::vector<std::pair<int, int>> signature_of(const ConstraintSet& constraints);
bool same_signature(const std::vector<std::pair<int, int>>& sig, const ConstraintSet& constraints);

/// Spatial gravity (0, g) expressed in the body frame of link i.
inline Vec6 gravity_in_link(const RobotModel& model, const KinematicsCache& kin, int i) {
  return kin.X_world[static_cast<std::size_t>(i)].apply_motion(model.gravity_spatial());
}

/// Writes the body-frame rows of a world-aligned block into `dst` row by row.
template <typename DerivedDst>
void rows_to_body(const MatX6& K_wa, const Mat3& R, Eigen::MatrixBase<DerivedDst>& dst, Eigen::Index dst_row) {
  for (Eigen::Index r = 0; r < K_wa.rows(); ++r) {
    for (int c = 0; c < 3; ++c) {
      dst(dst_row + r, c) = K_wa(r, 0) * R(0, c) + K_wa(r, 1) * R(1, c) + K_wa(r, 2) * R(2, c);
      dst(dst_row + r, 3 + c) = K_wa(r, 3) * R(0, c) + K_wa(r, 4) * R(1, c) + K_wa(r, 5) * R(2, c);
    }
  }
}

/// Acceleration of the world in the recursion: -g or zero.
inline Vec6 world_acceleration(const RobotModel& model, const SolverOptions& options) {
  return options.gravity == GravityMode::BaseAcceleration ? Vec6(-model.gravity_spatial()) : Vec6::Zero();
}

inline bool shifts_targets(const SolverOptions& options) {
  return options.gravity == GravityMode::BaseAcceleration;
}

enum class Seed { Inertia, Dynamics };

/// Sets H_i to the link inertia and f_i to the seeded bias force: joint
/// torques (with the reaction on the parent), velocity products, external
/// wrenches and, in link-weight mode, gravity. Inertia-only seeding zeroes f.
void seed_dynamics(const RobotModel& model, const RobotState* state, const KinematicsCache& kin,
                   std::vector<Mat6>& H, std::vector<Vec6>& f, const SolverOptions& options, Seed seed);

/// Initializes H, f and (when `with_rows`) the own constraint rows K, l of
/// every link. Kinematics must already be in ws.kin.
void seed_links(const RobotModel& model, const RobotState* state, const ConstraintSet* constraints,
                PvWorkspace& ws, const SolverOptions& options, Seed seed, bool with_rows);

/// Leaf-to-root sweep. A floating base link is left unprocessed.
void backward_sweep(const RobotModel& model, PvWorkspace& ws, bool with_forces, bool with_rows);

/// Root-to-leaf sweep for non-floating links, given the floating base
/// acceleration (ignored for fixed-base models) and lambda_dfs.
void forward_accelerations(const RobotModel& model, PvWorkspace& ws, const Vec6& a_world,
                           bool with_rows, VecX& qdd);

/// Copies accelerations to the solution, adding gravity back when the world
/// was accelerated.
void finish_solution(const RobotModel& model, const ConstraintSet& constraints,
                     const KinematicsCache& kin, const std::vector<Vec6>& a,
                     const SolverOptions& options, DynamicsSolution& out);

/// Residual tau - (M qdd + c + J^T lambda) of the solution in `out`, by
/// inverse dynamics over the tree, and optionally k - K a per row. `kin`
/// must hold the kinematics of `state`; `link_force` is scratch.
void dynamics_residual(const RobotModel& model, const RobotState& state, const ConstraintSet& constraints,
                       const KinematicsCache& kin, const DynamicsSolution& out, const SolverOptions& options,
                       std::vector<Vec6>& link_force, VecX& tau_residual, VecX* target_residual);

}  // namespace pvdyn::detail
