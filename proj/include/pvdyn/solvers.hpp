#pragma once

// Constrained forward dynamics on kinematic trees.
//
// Every solver returns multipliers with the joint-space sign convention
//   M qdd + c + J^T lambda = tau,
// so the wrench exerted by constraint rows K on their link is -K^T lambda.
//
// Solvers take a caller-owned workspace built once for a (model, constraint
// structure) pair. Values of K, k and the state may change between calls; the
// sweeps then run without touching the heap.

#include <optional>
#include <utility>
#include <vector>

#include "pvdyn/kinematics.hpp"
#include "pvdyn/model.hpp"

namespace pvdyn {

enum class GravityMode {
  /// Accelerate the world by -g and shift constraint targets accordingly.
  BaseAcceleration,
  /// Apply each link's weight as an external wrench.
  LinkWeights,
  /// Ignore gravity.
  Off,
};

struct SolverOptions {
  GravityMode gravity = GravityMode::BaseAcceleration;
};

struct DynamicsSolution {
  VecX qdd;
  /// Multipliers in constraint-set order.
  VecX lambda;
  /// Body-frame spatial accelerations of every link (gravity not subtracted).
  std::vector<Vec6> link_acc;
  /// max |K_i a_i - k_i| over all rows.
  double residual = 0.0;

  void resize(const RobotModel& model, int rows);
};

/// Storage of the backward sweep, laid out for one model and constraint
/// structure. Rows of the stacked constraint matrix are kept in depth-first
/// order so that every subtree owns a contiguous range; `dfs_to_user` maps
/// them back to constraint-set order.
struct PvWorkspace {
  PvWorkspace() = default;
  PvWorkspace(const RobotModel& model, const ConstraintSet& constraints);

  /// True when the workspace was laid out for this model size and constraint structure.
  bool fits(const RobotModel& model, const ConstraintSet& constraints) const;

  int num_links = 0;
  int nv = 0;
  int m = 0;
  bool floating = false;

  /// Subtree row range of each link: [row_begin, row_begin + row_count).
  std::vector<int> row_begin, row_count, own_count;
  std::vector<int> dfs_to_user;

  struct EntryRef {
    int entry;
    int dfs_row;
    int rows;
  };
  /// Entries attached to each link, with their depth-first row offsets.
  std::vector<std::vector<EntryRef>> link_entries;
  /// (link, rows) of every entry, in constraint-set order.
  std::vector<std::pair<int, int>> signature;

  KinematicsCache kin;
  /// Articulated inertia H^A and bias force f^A per link (body frame).
  std::vector<Mat6> H;
  std::vector<Vec6> f;
  std::vector<Vec6> a;
  /// H^A S and S^T H^A S for single-dof joints.
  std::vector<Vec6> U;
  std::vector<double> D;

  /// Propagated constraint rows K^A and desired accelerations l (stored negated:
  /// l starts at -k). Rows of subtree i live at row_begin[i].
  MatX6 K;
  VecX l;
  /// Dual Hessian; its restriction to a subtree range is that link's L^A.
  MatX L;
  /// K^A_i S_i per link, stored in column v_index(i) over the subtree range.
  MatX KS;
  VecX lambda_dfs;

  // Root resolution scratch.
  MatX L_fac;
  MatX6 Y;
  VecX y;
  Mat6 H_root;
  /// Whether the floating-base solve used the block-diagonal L_b^A branch.
  bool used_block_diagonal_branch = false;

  /// Set by pv_soft_solve when large weights called for a refinement step.
  bool refined = false;
  RobotState correction_state;
  std::vector<Vec6> link_force;
  DynamicsSolution correction;

  /// P_i = 1 - U_i D_i^{-1} S_i^T after the last backward sweep.
  Mat6 projector(const RobotModel& model, int link) const;
};

/// Hard-constrained forward dynamics. Throws RankDeficientError when the
/// constraint rows are dependent.
void pv_solve(const RobotModel& model, const RobotState& state, const ConstraintSet& constraints,
              PvWorkspace& ws, DynamicsSolution& out, const SolverOptions& options = {});
DynamicsSolution pv_solve(const RobotModel& model, const RobotState& state,
                          const ConstraintSet& constraints, const SolverOptions& options = {});

/// Unconstrained forward dynamics (the articulated body algorithm).
void aba(const RobotModel& model, const RobotState& state, PvWorkspace& ws, VecX& qdd,
         const SolverOptions& options = {});
VecX aba(const RobotModel& model, const RobotState& state, const SolverOptions& options = {});

/// Soft constraints: each row contributes the penalty 1/2 w (K a - k)^2 to the
/// acceleration energy. Multipliers are lambda = w (K a - k). Weights above
/// kSoftRefineWeight add one refinement step, since rounding in the modified
/// articulated inertias grows in proportion to w.
inline constexpr double kSoftRefineWeight = 1e4;

void pv_soft_solve(const RobotModel& model, const RobotState& state,
                   const ConstraintSet& constraints, PvWorkspace& ws, DynamicsSolution& out,
                   const SolverOptions& options = {});
DynamicsSolution pv_soft_solve(const RobotModel& model, const RobotState& state,
                               const ConstraintSet& constraints, const SolverOptions& options = {});

/// Householder vector w and singular value sigma = |ks|^2 / D of the rank-one
/// update ks ks^T / D. U = 1 - 2 w w^T / (w^T w) satisfies U ks = -sign(ks_0)|ks| e_0.
struct Reflector {
  VecX w;
  double sigma = 0.0;
};

/// Returns nullopt when |ks| <= tolerance: the update then carries no rank.
std::optional<Reflector> rank1_reflector(const VecX& ks, double D, double tolerance = 1e-10);

/// Storage for the early-elimination solver. Each link carries at most six
/// propagated rows.
struct EarlyWorkspace {
  EarlyWorkspace() = default;
  EarlyWorkspace(const RobotModel& model, const ConstraintSet& constraints);
  bool fits(const RobotModel& model, const ConstraintSet& constraints) const;

  using RowBlock = Eigen::Matrix<double, 6, 6>;

  int num_links = 0;
  int m = 0;
  bool floating = false;

  /// Entries per link; dfs_row is unused here and holds the first row in
  /// constraint-set order instead.
  std::vector<std::vector<PvWorkspace::EntryRef>> link_entries;
  std::vector<int> own_count;
  std::vector<std::pair<int, int>> signature;

  KinematicsCache kin;
  std::vector<Mat6> H;
  std::vector<Vec6> f;
  std::vector<Vec6> a;
  std::vector<Vec6> U;
  std::vector<double> D;

  /// Rows currently attached to each link (own rows first, then rows handed
  /// up by children) and how many are in use.
  std::vector<RowBlock> K;
  std::vector<Vec6> l;
  std::vector<int> rows;
  /// Where a child's surviving rows start inside its parent's block.
  std::vector<int> offset_in_parent;
  /// Number of rows a link hands to its parent.
  std::vector<int> passed_up;

  std::vector<Vec6> ks;
  std::vector<char> eliminated;
  std::vector<int> pivot;
  std::vector<Vec6> w;
  std::vector<double> sigma;
  std::vector<Vec6> K_tilde;
  std::vector<double> l_tilde;
  /// Multipliers of each link's rows after the forward sweep.
  std::vector<Vec6> lambda;

  /// Set when some elimination used a pivot |ks| below kRefineThreshold
  /// relative to its rows; the solve then takes one refinement step.
  bool small_pivot = false;
  bool refined = false;
  RobotState correction_state;
  VecX correction_targets;
  std::vector<Vec6> link_force;
  DynamicsSolution correction;
};

/// Pivots |ks| below this fraction of (1 + |K|_inf) make early elimination
/// lose accuracy roughly as eps / |ks|^2, so the solver refines the result.
inline constexpr double kRefineThreshold = 1e-3;

/// Constrained dynamics with multipliers eliminated joint by joint.
void pv_early_solve(const RobotModel& model, const RobotState& state,
                    const ConstraintSet& constraints, EarlyWorkspace& ws, DynamicsSolution& out,
                    const SolverOptions& options = {});
DynamicsSolution pv_early_solve(const RobotModel& model, const RobotState& state,
                                const ConstraintSet& constraints, const SolverOptions& options = {});

/// max |K_i a_i - k_i| for body-frame link accelerations a_i.
double constraint_residual(const RobotModel& model, const KinematicsCache& kin,
                           const ConstraintSet& constraints, const std::vector<Vec6>& link_acc);

}  // namespace pvdyn
