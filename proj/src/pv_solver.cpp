#include <Eigen/Cholesky>

#include <sstream>

#include "pv_internal.hpp"
#include "pvdyn/errors.hpp"
#include "pvdyn/linalg.hpp"

namespace pvdyn {

void DynamicsSolution::resize(const RobotModel& model, int rows) {
  if (qdd.size() != model.dof()) qdd.resize(model.dof());
  if (lambda.size() != rows) lambda.resize(rows);
  if (static_cast<int>(link_acc.size()) != model.num_links()) {
    link_acc.resize(static_cast<std::size_t>(model.num_links()));
  }
}

namespace detail {

std::vector<std::pair<int, int>> signature_of(const ConstraintSet& constraints) {
  std::vector<std::pair<int, int>> sig;
  for (const auto& e : constraints.entries()) sig.emplace_back(e.link, e.rows());
  return sig;
}

bool same_signature(const std::vector<std::pair<int, int>>& sig, const ConstraintSet& constraints) {
  const auto& entries = constraints.entries();
  if (sig.size() != entries.size()) return false;
  for (std::size_t e = 0; e < entries.size(); ++e) {
    if (sig[e].first != entries[e].link || sig[e].second != entries[e].rows()) return false;
  }
  return true;
}

void seed_dynamics(const RobotModel& model, const RobotState* state, const KinematicsCache& kin,
                   std::vector<Mat6>& H, std::vector<Vec6>& f, const SolverOptions& options, Seed seed) {
  const bool dynamics = seed == Seed::Dynamics;
  const bool weights = dynamics && options.gravity == GravityMode::LinkWeights;
  for (int i = 0; i < model.num_links(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const SpatialInertia& I = model.inertia(i);
    H[ui] = I.matrix();
    Vec6& fi = f[ui];
    if (!dynamics) {
      fi.setZero();
      continue;
    }
    const Vec6& v = kin.v[ui];
    fi = -cross_force(v, I * v);
    if (!state->f_ext.empty()) fi += state->f_ext[ui].vec();
    if (weights) fi += I * gravity_in_link(model, kin, i);
    const Joint& joint = model.link(i).joint;
    const int vi = model.v_index(i);
    if (joint.kind == JointKind::Floating) {
      fi += state->tau.segment<6>(vi);
    } else {
      const Vec6 St = joint.axis_column() * state->tau(vi);
      fi += St;
      const int p = model.parent(i);
      if (p >= 0) f[static_cast<std::size_t>(p)] -= kin.X_up[ui].apply_transpose_force(St);
    }
  }
}

void seed_links(const RobotModel& model, const RobotState* state, const ConstraintSet* constraints,
                PvWorkspace& ws, const SolverOptions& options, Seed seed, bool with_rows) {
  seed_dynamics(model, state, ws.kin, ws.H, ws.f, options, seed);
  if (!with_rows) return;
  const bool shift_targets = options.gravity == GravityMode::BaseAcceleration;
  for (int i = 0; i < model.num_links(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    if (ws.link_entries[ui].empty()) continue;
    const Mat3 R = ws.kin.rotation(i);
    const Vec6 g_link = shift_targets ? gravity_in_link(model, ws.kin, i) : Vec6::Zero();
    for (const auto& ref : ws.link_entries[ui]) {
      const ConstraintEntry& e = constraints->entries()[static_cast<std::size_t>(ref.entry)];
      rows_to_body(e.K, R, ws.K, ref.dfs_row);
      for (int r = 0; r < ref.rows; ++r) {
        const Eigen::Index row = ref.dfs_row + r;
        // l = -(k - K a_grav): the recursion accelerates the world by -g.
        ws.l(row) = -(e.k(r) - ws.K.row(row).dot(g_link.transpose()));
      }
    }
  }
}

void backward_sweep(const RobotModel& model, PvWorkspace& ws, bool with_forces, bool with_rows) {
  for (int i = model.num_links() - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    const Joint& joint = model.link(i).joint;
    if (joint.kind == JointKind::Floating) continue;
    const Vec6 s = joint.axis_column();
    const Mat6& H = ws.H[ui];
    Vec6& U = ws.U[ui];
    U.noalias() = H * s;
    const double D = s.dot(U);
    ws.D[ui] = D;
    if (!(D > 0.0)) {
      throw ModelError("joint of link '" + model.link(i).name + "' has nonpositive articulated inertia");
    }
    const SpatialTransform& X = ws.kin.X_up[ui];
    Vec6 fa = Vec6::Zero();
    double u = 0.0;
    if (with_forces) {
      fa = ws.f[ui] - H * ws.kin.a_bias[ui];
      u = s.dot(fa);
    }

    const int rc = with_rows ? ws.row_count[ui] : 0;
    if (rc > 0) {
      const int rb = ws.row_begin[ui];
      const int vi = model.v_index(i);
      Vec6 z = Vec6::Zero();
      if (with_forces) z = ws.kin.a_bias[ui] + s * (u / D);
      for (int r = rb; r < rb + rc; ++r) {
        Vec6 kr = ws.K.row(r).transpose();
        const double ksr = kr.dot(s);
        ws.KS(r, vi) = ksr;
        if (with_forces) ws.l(r) += kr.dot(z);
        kr -= (ksr / D) * U;
        ws.K.row(r) = X.apply_transpose_force(kr).transpose();
      }
      for (int r = rb; r < rb + rc; ++r) {
        const double kr = ws.KS(r, vi) / D;
        for (int c = rb; c < rb + rc; ++c) ws.L(r, c) += kr * ws.KS(c, vi);
      }
    }

    const int p = model.parent(i);
    if (p < 0) continue;
    const auto up = static_cast<std::size_t>(p);
    Mat6 Ha = H;
    Ha.noalias() -= U * (U.transpose() / D);
    ws.H[up] += X.congruence_to_source(Ha);
    if (with_forces) {
      const Vec6 Pf = fa - U * (u / D);
      ws.f[up] += X.apply_transpose_force(Pf);
    }
  }
}

void forward_accelerations(const RobotModel& model, PvWorkspace& ws, const Vec6& a_world,
                           bool with_rows, VecX& qdd) {
  for (int i = 0; i < model.num_links(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const Joint& joint = model.link(i).joint;
    if (joint.kind == JointKind::Floating) continue;
    const int p = model.parent(i);
    const Vec6& ap_parent = p < 0 ? a_world : ws.a[static_cast<std::size_t>(p)];
    const Vec6 ap = ws.kin.X_up[ui].apply_motion(ap_parent) + ws.kin.a_bias[ui];
    const Vec6 s = joint.axis_column();
    double u = s.dot(ws.f[ui] - ws.H[ui] * ap);
    const int rc = with_rows ? ws.row_count[ui] : 0;
    if (rc > 0) {
      const int rb = ws.row_begin[ui];
      const int vi = model.v_index(i);
      for (int r = rb; r < rb + rc; ++r) u -= ws.KS(r, vi) * ws.lambda_dfs(r);
    }
    const double qddi = u / ws.D[ui];
    qdd(model.v_index(i)) = qddi;
    ws.a[ui] = ap + s * qddi;
  }
}

void finish_solution(const RobotModel& model, const ConstraintSet& constraints,
                     const KinematicsCache& kin, const std::vector<Vec6>& a,
                     const SolverOptions& options, DynamicsSolution& out) {
  const bool add_gravity = options.gravity == GravityMode::BaseAcceleration;
  for (int i = 0; i < model.num_links(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    out.link_acc[ui] = a[ui];
    if (add_gravity) out.link_acc[ui] += gravity_in_link(model, kin, i);
  }
  out.residual = constraint_residual(model, kin, constraints, out.link_acc);
}

void dynamics_residual(const RobotModel& model, const RobotState& state, const ConstraintSet& constraints,
                       const KinematicsCache& kin, const DynamicsSolution& out, const SolverOptions& options,
                       std::vector<Vec6>& link_force, VecX& tau_residual, VecX* target_residual) {
  const bool gravity = options.gravity != GravityMode::Off;
  for (int i = 0; i < model.num_links(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const SpatialInertia& I = model.inertia(i);
    const Vec6& v = kin.v[ui];
    Vec6 acc = out.link_acc[ui];
    if (gravity) acc -= gravity_in_link(model, kin, i);
    Vec6& fi = link_force[ui];
    fi = I * acc + cross_force(v, I * v);
    if (!state.f_ext.empty()) fi -= state.f_ext[ui].vec();
  }
  for (std::size_t e = 0; e < constraints.entries().size(); ++e) {
    const ConstraintEntry& entry = constraints.entries()[e];
    const Mat3 R = kin.rotation(entry.link);
    const Vec6& ab = out.link_acc[static_cast<std::size_t>(entry.link)];
    Vec6 awa;
    awa << R * ab.head<3>(), R * ab.tail<3>();
    const int first = constraints.row_offset(e);
    Vec6 force_wa = Vec6::Zero();
    for (Eigen::Index r = 0; r < entry.K.rows(); ++r) {
      force_wa += entry.K.row(r).transpose() * out.lambda(first + r);
      if (target_residual) (*target_residual)(first + r) = entry.k(r) - entry.K.row(r).dot(awa.transpose());
    }
    Vec6& fl = link_force[static_cast<std::size_t>(entry.link)];
    fl.head<3>() += R.transpose() * force_wa.head<3>();
    fl.tail<3>() += R.transpose() * force_wa.tail<3>();
  }
  for (int i = model.num_links() - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    const Joint& joint = model.link(i).joint;
    const int vi = model.v_index(i);
    if (joint.kind == JointKind::Floating) {
      tau_residual.segment<6>(vi) = state.tau.segment<6>(vi) - link_force[ui];
    } else {
      tau_residual(vi) = state.tau(vi) - joint.axis_column().dot(link_force[ui]);
    }
    const int p = model.parent(i);
    if (p >= 0) link_force[static_cast<std::size_t>(p)] += kin.X_up[ui].apply_transpose_force(link_force[ui]);
  }
}

}  // namespace detail

double constraint_residual(const RobotModel& model, const KinematicsCache& kin,
                           const ConstraintSet& constraints, const std::vector<Vec6>& link_acc) {
  (void)model;
  double worst = 0.0;
  for (const auto& e : constraints.entries()) {
    const Mat3 R = kin.rotation(e.link);
    const Vec6& ab = link_acc[static_cast<std::size_t>(e.link)];
    Vec6 awa;
    awa << R * ab.head<3>(), R * ab.tail<3>();
    for (Eigen::Index r = 0; r < e.K.rows(); ++r) {
      worst = std::max(worst, std::abs(e.K.row(r).dot(awa.transpose()) - e.k(r)));
    }
  }
  return worst;
}

PvWorkspace::PvWorkspace(const RobotModel& model, const ConstraintSet& constraints) {
  constraints.validate(model);
  num_links = model.num_links();
  nv = model.dof();
  m = constraints.rows();
  floating = model.floating_base();
  if (floating && model.roots().size() != 1) {
    throw ModelError("a floating-base model must have the base as its only root");
  }
  const auto n = static_cast<std::size_t>(num_links);
  signature = detail::signature_of(constraints);
  link_entries.assign(n, {});
  own_count.assign(n, 0);
  row_begin.assign(n, 0);
  row_count.assign(n, 0);
  const auto& entries = constraints.entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto ul = static_cast<std::size_t>(entries[e].link);
    link_entries[ul].push_back({static_cast<int>(e), 0, entries[e].rows()});
    own_count[ul] += entries[e].rows();
  }

  // Depth-first preorder: a link's own rows, then each child's subtree.
  dfs_to_user.assign(static_cast<std::size_t>(m), 0);
  int cursor = 0;
  std::vector<int> stack(model.roots().rbegin(), model.roots().rend());
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    const auto ui = static_cast<std::size_t>(i);
    row_begin[ui] = cursor;
    for (auto& ref : link_entries[ui]) {
      ref.dfs_row = cursor;
      const int user = constraints.row_offset(static_cast<std::size_t>(ref.entry));
      for (int r = 0; r < ref.rows; ++r) dfs_to_user[static_cast<std::size_t>(cursor + r)] = user + r;
      cursor += ref.rows;
    }
    const auto& ch = model.children(i);
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  // Subtree sizes accumulate leaf to root.
  for (int i = num_links - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    row_count[ui] += own_count[ui];
    const int p = model.parent(i);
    if (p >= 0) row_count[static_cast<std::size_t>(p)] += row_count[ui];
  }

  kin.resize(num_links);
  H.assign(n, Mat6::Zero());
  f.assign(n, Vec6::Zero());
  a.assign(n, Vec6::Zero());
  U.assign(n, Vec6::Zero());
  D.assign(n, 0.0);
  K = MatX6::Zero(m, 6);
  l = VecX::Zero(m);
  L = MatX::Zero(m, m);
  KS = MatX::Zero(m, nv);
  lambda_dfs = VecX::Zero(m);
  L_fac = MatX::Zero(m, m);
  Y = MatX6::Zero(m, 6);
  y = VecX::Zero(m);
  H_root.setZero();
  correction_state = RobotState::Zero(model);
  link_force.assign(n, Vec6::Zero());
  correction.resize(model, m);
}

bool PvWorkspace::fits(const RobotModel& model, const ConstraintSet& constraints) const {
  return num_links == model.num_links() && nv == model.dof() && floating == model.floating_base() &&
         detail::same_signature(signature, constraints);
}

Mat6 PvWorkspace::projector(const RobotModel& model, int link) const {
  const Joint& joint = model.link(link).joint;
  if (joint.kind == JointKind::Floating) return Mat6::Zero();
  const auto ul = static_cast<std::size_t>(link);
  return Mat6::Identity() - U[ul] * joint.axis_column().transpose() / D[ul];
}

namespace {

void check_hard(const ConstraintSet& constraints) {
  if (constraints.has_soft_weights()) {
    throw ModelError("pv_solve takes hard constraints; use pv_soft_solve for weighted rows");
  }
}

void prepare(const RobotModel& model, const RobotState& state, const ConstraintSet& constraints,
             PvWorkspace& ws) {
  state.validate(model);
  constraints.validate(model);
  if (!ws.fits(model, constraints)) ws = PvWorkspace(model, constraints);
}

constexpr double kBranchPivotTolerance = 1e-6;

/// Floating-base saddle point. Returns the base acceleration in the recursion frame.
Vec6 solve_floating_root(PvWorkspace& ws) {
  const Mat6& H = ws.H[0];
  const Vec6& f = ws.f[0];
  const int m = ws.m;
  if (m == 0) {
    const Eigen::LLT<Mat6> llt(H);
    if (llt.info() != Eigen::Success) throw ModelError("base articulated inertia is not positive definite");
    return llt.solve(f);
  }
  // Block-diagonal L_b^A: solve for the base acceleration first. A nearly
  // singular branch (a straightened leg) would amplify rounding, so the
  // branch is taken only with well-separated pivots.
  ws.L_fac = ws.L;
  if (!linalg::cholesky_in_place(ws.L_fac, kBranchPivotTolerance)) {
    ws.used_block_diagonal_branch = true;
    ws.Y = ws.K;
    linalg::cholesky_solve_in_place(ws.L_fac, ws.Y);
    ws.y = ws.l;
    linalg::cholesky_solve_in_place(ws.L_fac, ws.y);
    ws.H_root = H;
    Vec6 rhs = f;
    for (int r = 0; r < m; ++r) {
      ws.H_root.noalias() += ws.K.row(r).transpose() * ws.Y.row(r);
      rhs -= ws.K.row(r).transpose() * ws.y(r);
    }
    const Eigen::LLT<Mat6> llt(ws.H_root);
    if (llt.info() != Eigen::Success) {
      throw RankDeficientError("H_b^A + K^T (L_b^A)^-1 K", "not positive definite");
    }
    const Vec6 ab = llt.solve(rhs);
    for (int r = 0; r < m; ++r) ws.lambda_dfs(r) = ws.Y.row(r).dot(ab.transpose()) + ws.y(r);
    return ab;
  }
  // General case: L_0^A = L_b^A + K H^-1 K^T.
  ws.used_block_diagonal_branch = false;
  const Eigen::LLT<Mat6> llt(H);
  if (llt.info() != Eigen::Success) throw ModelError("base articulated inertia is not positive definite");
  for (int r = 0; r < m; ++r) {
    const Vec6 kr = ws.K.row(r).transpose();
    ws.Y.row(r) = llt.solve(kr).transpose();
  }
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) ws.L_fac(r, c) = ws.L(r, c) + ws.K.row(r).dot(ws.Y.row(c));
    ws.lambda_dfs(r) = ws.Y.row(r).dot(f.transpose()) + ws.l(r);
  }
  if (const auto bad = linalg::cholesky_in_place(ws.L_fac)) {
    std::ostringstream os;
    os << "pivot " << *bad << " of " << m << " constraint rows";
    throw RankDeficientError("L0^A", os.str());
  }
  linalg::cholesky_solve_in_place(ws.L_fac, ws.lambda_dfs);
  Vec6 rhs = f;
  for (int r = 0; r < m; ++r) rhs -= ws.K.row(r).transpose() * ws.lambda_dfs(r);
  return llt.solve(rhs);
}

void solve_fixed_root(PvWorkspace& ws, const Vec6& a_world) {
  const int m = ws.m;
  if (m == 0) return;
  ws.L_fac = ws.L;
  if (const auto bad = linalg::cholesky_in_place(ws.L_fac)) {
    std::ostringstream os;
    os << "pivot " << *bad << " of " << m << " constraint rows";
    throw RankDeficientError("L0^A", os.str());
  }
  for (int r = 0; r < m; ++r) ws.lambda_dfs(r) = ws.l(r) + ws.K.row(r).dot(a_world.transpose());
  linalg::cholesky_solve_in_place(ws.L_fac, ws.lambda_dfs);
}

void run_pv(const RobotModel& model, const RobotState& state, const ConstraintSet& constraints,
            PvWorkspace& ws, DynamicsSolution& out, const SolverOptions& options) {
  const bool rows = ws.m > 0;
  forward_sweep(model, state.q, state.qd, ws.kin);
  detail::seed_links(model, &state, &constraints, ws, options, detail::Seed::Dynamics, rows);
  if (rows) ws.L.setZero();
  detail::backward_sweep(model, ws, true, rows);
  const Vec6 a_world = detail::world_acceleration(model, options);
  if (ws.floating) {
    const Vec6 ab = solve_floating_root(ws);
    ws.a[0] = ab;
    out.qdd.head<6>() = ab - ws.kin.X_up[0].apply_motion(a_world);
  } else {
    solve_fixed_root(ws, a_world);
  }
  detail::forward_accelerations(model, ws, a_world, rows, out.qdd);
  for (int r = 0; r < ws.m; ++r) out.lambda(ws.dfs_to_user[static_cast<std::size_t>(r)]) = ws.lambda_dfs(r);
  detail::finish_solution(model, constraints, ws.kin, ws.a, options, out);
}

}  // namespace

void pv_solve(const RobotModel& model, const RobotState& state, const ConstraintSet& constraints,
              PvWorkspace& ws, DynamicsSolution& out, const SolverOptions& options) {
  check_hard(constraints);
  prepare(model, state, constraints, ws);
  out.resize(model, ws.m);
  run_pv(model, state, constraints, ws, out, options);
}

DynamicsSolution pv_solve(const RobotModel& model, const RobotState& state,
                          const ConstraintSet& constraints, const SolverOptions& options) {
  PvWorkspace ws(model, constraints);
  DynamicsSolution out;
  pv_solve(model, state, constraints, ws, out, options);
  return out;
}

void aba(const RobotModel& model, const RobotState& state, PvWorkspace& ws, VecX& qdd,
         const SolverOptions& options) {
  static const ConstraintSet kNone;
  prepare(model, state, kNone, ws);
  if (qdd.size() != model.dof()) qdd.resize(model.dof());
  forward_sweep(model, state.q, state.qd, ws.kin);
  detail::seed_links(model, &state, nullptr, ws, options, detail::Seed::Dynamics, false);
  detail::backward_sweep(model, ws, true, false);
  const Vec6 a_world = detail::world_acceleration(model, options);
  if (ws.floating) {
    const Vec6 ab = solve_floating_root(ws);
    ws.a[0] = ab;
    qdd.head<6>() = ab - ws.kin.X_up[0].apply_motion(a_world);
  }
  detail::forward_accelerations(model, ws, a_world, false, qdd);
}

VecX aba(const RobotModel& model, const RobotState& state, const SolverOptions& options) {
  PvWorkspace ws(model, ConstraintSet{});
  VecX qdd;
  aba(model, state, ws, qdd, options);
  return qdd;
}

}  // namespace pvdyn
