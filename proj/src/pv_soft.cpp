#include <Eigen/Cholesky>

#include "pv_internal.hpp"
#include "pvdyn/errors.hpp"

namespace pvdyn {

namespace {

void check_weights(const ConstraintSet& constraints) {
  for (const auto& e : constraints.entries()) {
    if (!e.soft_weight) {
      throw ModelError("pv_soft_solve needs a soft_weight on every constraint (link " +
                       std::to_string(e.link) + ")");
    }
    for (Eigen::Index r = 0; r < e.soft_weight->size(); ++r) {
      if (!((*e.soft_weight)(r) > 0.0)) {
        throw ModelError("soft weights must be positive (link " + std::to_string(e.link) + ")");
      }
    }
  }
}

/// One penalty-augmented articulated-body pass. With `zero_targets` the rows
/// ask for K a = 0, which is what a correction step needs.
void soft_pass(const RobotModel& model, const RobotState& state, const ConstraintSet& constraints,
               bool zero_targets, PvWorkspace& ws, DynamicsSolution& out, const SolverOptions& options) {
  forward_sweep(model, state.q, state.qd, ws.kin);
  // Rows and shifted targets are written into K and l; the recursion itself
  // runs without constraint bookkeeping.
  detail::seed_links(model, &state, &constraints, ws, options, detail::Seed::Dynamics, ws.m > 0);
  if (zero_targets) ws.l.setZero();
  for (int i = 0; i < model.num_links(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (const auto& ref : ws.link_entries[ui]) {
      const VecX& w = *constraints.entries()[static_cast<std::size_t>(ref.entry)].soft_weight;
      for (int r = 0; r < ref.rows; ++r) {
        const Vec6 kr = ws.K.row(ref.dfs_row + r).transpose();
        // l holds -(shifted k).
        const double target = -ws.l(ref.dfs_row + r);
        ws.H[ui].noalias() += w(r) * kr * kr.transpose();
        ws.f[ui] += (w(r) * target) * kr;
      }
    }
  }
  detail::backward_sweep(model, ws, true, false);
  const Vec6 a_world = detail::world_acceleration(model, options);
  if (ws.floating) {
    const Eigen::LLT<Mat6> llt(ws.H[0]);
    if (llt.info() != Eigen::Success) throw ModelError("base articulated inertia is not positive definite");
    ws.a[0] = llt.solve(ws.f[0]);
    out.qdd.head<6>() = ws.a[0] - ws.kin.X_up[0].apply_motion(a_world);
  }
  detail::forward_accelerations(model, ws, a_world, false, out.qdd);

  for (int i = 0; i < model.num_links(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    for (const auto& ref : ws.link_entries[ui]) {
      const VecX& w = *constraints.entries()[static_cast<std::size_t>(ref.entry)].soft_weight;
      const int user = ws.dfs_to_user[static_cast<std::size_t>(ref.dfs_row)];
      for (int r = 0; r < ref.rows; ++r) {
        const int row = ref.dfs_row + r;
        out.lambda(user + r) = w(r) * (ws.K.row(row).dot(ws.a[ui].transpose()) + ws.l(row));
      }
    }
  }
  detail::finish_solution(model, constraints, ws.kin, ws.a, options, out);
}

bool needs_refinement(const ConstraintSet& constraints) {
  for (const auto& e : constraints.entries()) {
    if (e.soft_weight->maxCoeff() > kSoftRefineWeight) return true;
  }
  return false;
}

}  // namespace

void pv_soft_solve(const RobotModel& model, const RobotState& state,
                   const ConstraintSet& constraints, PvWorkspace& ws, DynamicsSolution& out,
                   const SolverOptions& options) {
  state.validate(model);
  constraints.validate(model);
  check_weights(constraints);
  if (!ws.fits(model, constraints)) ws = PvWorkspace(model, constraints);
  out.resize(model, ws.m);
  soft_pass(model, state, constraints, false, ws, out, options);
  ws.refined = false;
  if (!needs_refinement(constraints)) return;

  detail::dynamics_residual(model, state, constraints, ws.kin, out, options, ws.link_force,
                            ws.correction_state.tau, nullptr);
  ws.correction_state.q = state.q;
  ws.correction_state.qd.setZero();
  SolverOptions plain = options;
  plain.gravity = GravityMode::Off;
  soft_pass(model, ws.correction_state, constraints, true, ws, ws.correction, plain);
  out.qdd += ws.correction.qdd;
  out.lambda += ws.correction.lambda;
  for (std::size_t i = 0; i < out.link_acc.size(); ++i) out.link_acc[i] += ws.correction.link_acc[i];
  out.residual = constraint_residual(model, ws.kin, constraints, out.link_acc);
  ws.refined = true;
}

DynamicsSolution pv_soft_solve(const RobotModel& model, const RobotState& state,
                               const ConstraintSet& constraints, const SolverOptions& options) {
  PvWorkspace ws(model, constraints);
  DynamicsSolution out;
  pv_soft_solve(model, state, constraints, ws, out, options);
  return out;
}

}  // namespace pvdyn
