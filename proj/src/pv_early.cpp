#include <Eigen/Cholesky>

#include <cmath>
#include <sstream>

#include "pv_internal.hpp"
#include "pvdyn/errors.hpp"
#include "pvdyn/linalg.hpp"

namespace pvdyn {

namespace {

constexpr int kMaxRows = 6;

/// Householder data for ks in place: w and sigma, with |ks| precomputed.
void reflector_into(const double* ks, int p, double norm, double D, double* w, double& sigma) {
  for (int r = 0; r < p; ++r) w[r] = ks[r];
  w[0] += (ks[0] >= 0.0 ? norm : -norm);
  sigma = norm * norm / D;
}

/// x <- (1 - 2 w w^T / w^T w) x on the first p entries.
template <typename V>
void reflect(const double* w, int p, V& x) {
  double ww = 0.0;
  double wx = 0.0;
  for (int r = 0; r < p; ++r) {
    ww += w[r] * w[r];
    wx += w[r] * x(r);
  }
  const double c = 2.0 * wx / ww;
  for (int r = 0; r < p; ++r) x(r) -= c * w[r];
}

}  // namespace

std::optional<Reflector> rank1_reflector(const VecX& ks, double D, double tolerance) {
  if (!(D > 0.0)) throw ModelError("rank1_reflector needs D > 0");
  const double norm = ks.norm();
  if (ks.size() == 0 || !(norm > tolerance)) return std::nullopt;
  Reflector out;
  out.w.resize(ks.size());
  reflector_into(ks.data(), static_cast<int>(ks.size()), norm, D, out.w.data(), out.sigma);
  return out;
}

EarlyWorkspace::EarlyWorkspace(const RobotModel& model, const ConstraintSet& constraints) {
  constraints.validate(model);
  num_links = model.num_links();
  m = constraints.rows();
  floating = model.floating_base();
  if (floating && model.roots().size() != 1) {
    throw ModelError("a floating-base model must have the base as its only root");
  }
  const auto n = static_cast<std::size_t>(num_links);
  signature = detail::signature_of(constraints);
  link_entries.assign(n, {});
  own_count.assign(n, 0);
  const auto& entries = constraints.entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    const auto ul = static_cast<std::size_t>(entries[e].link);
    link_entries[ul].push_back(
        {static_cast<int>(e), constraints.row_offset(e), entries[e].rows()});
    own_count[ul] += entries[e].rows();
    if (own_count[ul] > kMaxRows) {
      throw OverConstrainedError("link '" + model.link(entries[e].link).name + "' carries " +
                                 std::to_string(own_count[ul]) + " constraint rows (at most 6)");
    }
  }
  kin.resize(num_links);
  H.assign(n, Mat6::Zero());
  f.assign(n, Vec6::Zero());
  a.assign(n, Vec6::Zero());
  U.assign(n, Vec6::Zero());
  D.assign(n, 0.0);
  K.assign(n, RowBlock::Zero());
  l.assign(n, Vec6::Zero());
  rows.assign(n, 0);
  offset_in_parent.assign(n, 0);
  passed_up.assign(n, 0);
  ks.assign(n, Vec6::Zero());
  eliminated.assign(n, 0);
  pivot.assign(n, 0);
  w.assign(n, Vec6::Zero());
  sigma.assign(n, 0.0);
  K_tilde.assign(n, Vec6::Zero());
  l_tilde.assign(n, 0.0);
  lambda.assign(n, Vec6::Zero());
  correction_state = RobotState::Zero(model);
  correction_targets = VecX::Zero(m);
  link_force.assign(n, Vec6::Zero());
  correction.resize(model, m);
}

bool EarlyWorkspace::fits(const RobotModel& model, const ConstraintSet& constraints) const {
  return num_links == model.num_links() && floating == model.floating_base() &&
         detail::same_signature(signature, constraints);
}

namespace {

void seed_rows(const RobotModel& model, const ConstraintSet& constraints, const VecX* targets,
               EarlyWorkspace& ws, const SolverOptions& options) {
  const bool shift_targets = detail::shifts_targets(options);
  for (int i = 0; i < model.num_links(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    ws.rows[ui] = 0;
    if (ws.link_entries[ui].empty()) continue;
    const Mat3 R = ws.kin.rotation(i);
    const Vec6 g_link = shift_targets ? detail::gravity_in_link(model, ws.kin, i) : Vec6::Zero();
    for (const auto& ref : ws.link_entries[ui]) {
      const ConstraintEntry& e = constraints.entries()[static_cast<std::size_t>(ref.entry)];
      const int first = ws.rows[ui];
      detail::rows_to_body(e.K, R, ws.K[ui], first);
      for (int r = 0; r < ref.rows; ++r) {
        const double k = targets ? (*targets)(ref.dfs_row + r) : e.k(r);
        ws.l[ui](first + r) = -(k - ws.K[ui].row(first + r).dot(g_link.transpose()));
      }
      ws.rows[ui] += ref.rows;
    }
  }
}

void hand_rows_to_parent(const RobotModel& model, EarlyWorkspace& ws, int i, int first, int count) {
  const auto ui = static_cast<std::size_t>(i);
  ws.passed_up[ui] = count;
  if (count == 0) return;
  const int p = model.parent(i);
  if (p < 0) {
    std::ostringstream os;
    os << count << " constraint row(s) reach the fixed base at link '" << model.link(i).name
       << "' without a joint to act on";
    throw RankDeficientError("root rows", os.str());
  }
  const auto up = static_cast<std::size_t>(p);
  if (ws.rows[up] + count > kMaxRows) {
    std::ostringstream os;
    os << "link '" << model.link(p).name << "' would carry " << (ws.rows[up] + count)
       << " propagated constraint rows (at most 6)";
    throw OverConstrainedError(os.str());
  }
  ws.offset_in_parent[ui] = ws.rows[up];
  for (int r = 0; r < count; ++r) {
    ws.K[up].row(ws.rows[up] + r) = ws.K[ui].row(first + r);
    ws.l[up](ws.rows[up] + r) = ws.l[ui](first + r);
  }
  ws.rows[up] += count;
}

void backward(const RobotModel& model, EarlyWorkspace& ws) {
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
    const Vec6 fa = ws.f[ui] - H * ws.kin.a_bias[ui];
    const double u = s.dot(fa);
    const int p = model.parent(i);

    const int pr = ws.rows[ui];
    ws.eliminated[ui] = 0;
    if (pr > 0) {
      const Vec6 z = ws.kin.a_bias[ui] + s * (u / D);
      Vec6& ks = ws.ks[ui];
      double norm_inf = 0.0;
      double ks_norm2 = 0.0;
      for (int r = 0; r < pr; ++r) {
        Vec6 kr = ws.K[ui].row(r).transpose();
        norm_inf = std::max(norm_inf, kr.cwiseAbs().sum());
        ks(r) = kr.dot(s);
        ks_norm2 += ks(r) * ks(r);
        ws.l[ui](r) += kr.dot(z);
        kr -= (ks(r) / D) * U;
        ws.K[ui].row(r) = X.apply_transpose_force(kr).transpose();
      }
      const double tol = linalg::kPivotTolerance * (1.0 + norm_inf);
      const double ks_norm = std::sqrt(ks_norm2);
      if (ks_norm > tol) {
        ws.eliminated[ui] = 1;
        if (ks_norm < kRefineThreshold * (1.0 + norm_inf)) ws.small_pivot = true;
        int piv = 0;
        if (std::abs(ks(0)) <= tol) {
          for (int r = 1; r < pr; ++r) {
            if (std::abs(ks(r)) > std::abs(ks(piv))) piv = r;
          }
        }
        ws.pivot[ui] = piv;
        if (piv != 0) {
          std::swap(ks(0), ks(piv));
          ws.K[ui].row(0).swap(ws.K[ui].row(piv));
          std::swap(ws.l[ui](0), ws.l[ui](piv));
        }
        reflector_into(ks.data(), pr, ks_norm, D, ws.w[ui].data(), ws.sigma[ui]);
        const double* w = ws.w[ui].data();
        for (int c = 0; c < 6; ++c) {
          auto col = ws.K[ui].col(c);
          reflect(w, pr, col);
        }
        reflect(w, pr, ws.l[ui]);
        ws.K_tilde[ui] = ws.K[ui].row(0).transpose();
        ws.l_tilde[ui] = ws.l[ui](0);
        if (p >= 0) {
          const auto up = static_cast<std::size_t>(p);
          const double inv_sigma = 1.0 / ws.sigma[ui];
          ws.H[up].noalias() += (inv_sigma * ws.K_tilde[ui]) * ws.K_tilde[ui].transpose();
          ws.f[up] -= (inv_sigma * ws.l_tilde[ui]) * ws.K_tilde[ui];
        }
        hand_rows_to_parent(model, ws, i, 1, pr - 1);
      } else {
        hand_rows_to_parent(model, ws, i, 0, pr);
      }
    } else {
      ws.passed_up[ui] = 0;
    }

    if (p < 0) continue;
    const auto up = static_cast<std::size_t>(p);
    Mat6 Ha = H;
    Ha.noalias() -= U * (U.transpose() / D);
    ws.H[up] += X.congruence_to_source(Ha);
    ws.f[up] += X.apply_transpose_force(fa - U * (u / D));
  }
}

Vec6 solve_floating_base(EarlyWorkspace& ws) {
  const Eigen::LLT<Mat6> llt(ws.H[0]);
  if (llt.info() != Eigen::Success) throw ModelError("base articulated inertia is not positive definite");
  const int pr = ws.rows[0];
  if (pr == 0) return llt.solve(ws.f[0]);
  // Rows reaching the base have L = 0, so L_0 = K H^-1 K^T.
  Mat6 HinvKt;
  for (int r = 0; r < pr; ++r) HinvKt.col(r) = llt.solve(Vec6(ws.K[0].row(r).transpose()));
  Mat6 L0 = Mat6::Zero();
  Vec6& lam = ws.lambda[0];
  for (int r = 0; r < pr; ++r) {
    for (int c = 0; c < pr; ++c) L0(r, c) = ws.K[0].row(r).dot(HinvKt.col(c).transpose());
    lam(r) = HinvKt.col(r).dot(ws.f[0]) + ws.l[0](r);
  }
  auto L0b = L0.topLeftCorner(pr, pr);
  if (const auto bad = linalg::cholesky_in_place(L0b)) {
    std::ostringstream os;
    os << "pivot " << *bad << " of " << pr << " rows at the floating base";
    throw RankDeficientError("L0^A", os.str());
  }
  auto lam_head = lam.head(pr);
  linalg::cholesky_solve_in_place(L0b, lam_head);
  Vec6 rhs = ws.f[0];
  for (int r = 0; r < pr; ++r) rhs -= ws.K[0].row(r).transpose() * lam(r);
  return llt.solve(rhs);
}

void scatter_own(const EarlyWorkspace& ws, int i, DynamicsSolution& out) {
  const auto ui = static_cast<std::size_t>(i);
  int local = 0;
  for (const auto& ref : ws.link_entries[ui]) {
    for (int r = 0; r < ref.rows; ++r) out.lambda(ref.dfs_row + r) = ws.lambda[ui](local + r);
    local += ref.rows;
  }
}

void forward(const RobotModel& model, EarlyWorkspace& ws, const Vec6& a_world, DynamicsSolution& out) {
  for (int i = 0; i < model.num_links(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const Joint& joint = model.link(i).joint;
    if (joint.kind == JointKind::Floating) {
      scatter_own(ws, i, out);
      continue;
    }
    const int p = model.parent(i);
    const Vec6& a_parent = p < 0 ? a_world : ws.a[static_cast<std::size_t>(p)];
    const int pr = ws.rows[ui];
    Vec6& lam = ws.lambda[ui];
    if (pr > 0) {
      const int off = ws.offset_in_parent[ui];
      const Vec6* parent_lam = p < 0 ? nullptr : &ws.lambda[static_cast<std::size_t>(p)];
      if (ws.eliminated[ui]) {
        lam(0) = (ws.K_tilde[ui].dot(a_parent) + ws.l_tilde[ui]) / ws.sigma[ui];
        for (int r = 1; r < pr; ++r) lam(r) = (*parent_lam)(off + r - 1);
        reflect(ws.w[ui].data(), pr, lam);
        if (ws.pivot[ui] != 0) std::swap(lam(0), lam(ws.pivot[ui]));
      } else {
        for (int r = 0; r < pr; ++r) lam(r) = (*parent_lam)(off + r);
      }
    }
    const Vec6 ap = ws.kin.X_up[ui].apply_motion(a_parent) + ws.kin.a_bias[ui];
    const Vec6 s = joint.axis_column();
    double u = s.dot(ws.f[ui] - ws.H[ui] * ap);
    // ks was pivoted in place; undo through the multipliers' order.
    for (int r = 0; r < pr; ++r) {
      int src = r;
      if (ws.eliminated[ui] && ws.pivot[ui] != 0) {
        if (r == 0) src = ws.pivot[ui];
        else if (r == ws.pivot[ui]) src = 0;
      }
      u -= ws.ks[ui](src) * lam(r);
    }
    const double qddi = u / ws.D[ui];
    out.qdd(model.v_index(i)) = qddi;
    ws.a[ui] = ap + s * qddi;
    scatter_own(ws, i, out);
  }
}

void run(const RobotModel& model, const RobotState& state, const ConstraintSet& constraints,
         const VecX* targets, EarlyWorkspace& ws, DynamicsSolution& out, const SolverOptions& options) {
  ws.small_pivot = false;
  forward_sweep(model, state.q, state.qd, ws.kin);
  detail::seed_dynamics(model, &state, ws.kin, ws.H, ws.f, options, detail::Seed::Dynamics);
  seed_rows(model, constraints, targets, ws, options);
  backward(model, ws);
  const Vec6 a_world = detail::world_acceleration(model, options);
  if (ws.floating) {
    ws.a[0] = solve_floating_base(ws);
    out.qdd.head<6>() = ws.a[0] - ws.kin.X_up[0].apply_motion(a_world);
  }
  forward(model, ws, a_world, out);
  detail::finish_solution(model, constraints, ws.kin, ws.a, options, out);
}

}  // namespace

void pv_early_solve(const RobotModel& model, const RobotState& state,
                    const ConstraintSet& constraints, EarlyWorkspace& ws, DynamicsSolution& out,
                    const SolverOptions& options) {
  state.validate(model);
  constraints.validate(model);
  if (constraints.has_soft_weights()) {
    throw ModelError("pv_early_solve takes hard constraints; use pv_soft_solve for weighted rows");
  }
  if (!ws.fits(model, constraints)) ws = EarlyWorkspace(model, constraints);
  out.resize(model, ws.m);
  run(model, state, constraints, nullptr, ws, out, options);
  ws.refined = false;
  if (!ws.small_pivot) return;

  // A nearly orthogonal pivot makes the elimination lose digits; one step of
  // iterative refinement with the same recursion recovers them.
  detail::dynamics_residual(model, state, constraints, ws.kin, out, options, ws.link_force,
                            ws.correction_state.tau, &ws.correction_targets);
  ws.correction_state.q = state.q;
  ws.correction_state.qd.setZero();
  SolverOptions plain = options;
  plain.gravity = GravityMode::Off;
  run(model, ws.correction_state, constraints, &ws.correction_targets, ws, ws.correction, plain);
  out.qdd += ws.correction.qdd;
  out.lambda += ws.correction.lambda;
  for (std::size_t i = 0; i < out.link_acc.size(); ++i) out.link_acc[i] += ws.correction.link_acc[i];
  out.residual = constraint_residual(model, ws.kin, constraints, out.link_acc);
  ws.refined = true;
}

DynamicsSolution pv_early_solve(const RobotModel& model, const RobotState& state,
                                const ConstraintSet& constraints, const SolverOptions& options) {
  EarlyWorkspace ws(model, constraints);
  DynamicsSolution out;
  pv_early_solve(model, state, constraints, ws, out, options);
  return out;
}

}  // namespace pvdyn
