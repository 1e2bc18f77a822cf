#include "pvdyn/baseline.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "pvdyn/errors.hpp"

namespace pvdyn {

namespace {

/// Columns of S_i mapped through a force-like operation; dof-agnostic helper.
MatX joint_subspace(const RobotModel& model, int i) { return motion_subspace(model.link(i).joint); }

}  // namespace

MatX crba(const RobotModel& model, const VecX& q) {
  KinematicsCache cache;
  forward_positions(model, q, cache);
  const int nl = model.num_links();
  std::vector<Mat6> Ic(static_cast<std::size_t>(nl));
  for (int i = 0; i < nl; ++i) Ic[static_cast<std::size_t>(i)] = model.inertia(i).matrix();
  for (int i = nl - 1; i >= 0; --i) {
    const int p = model.parent(i);
    if (p >= 0) {
      Ic[static_cast<std::size_t>(p)] +=
          cache.X_up[static_cast<std::size_t>(i)].congruence_to_source(Ic[static_cast<std::size_t>(i)]);
    }
  }
  MatX M = MatX::Zero(model.dof(), model.dof());
  for (int i = 0; i < nl; ++i) {
    const MatX Si = joint_subspace(model, i);
    MatX F = Ic[static_cast<std::size_t>(i)] * Si;
    const int vi = model.v_index(i);
    const int di = static_cast<int>(Si.cols());
    M.block(vi, vi, di, di) = Si.transpose() * F;
    for (int j = i; model.parent(j) >= 0;) {
      const SpatialTransform& X = cache.X_up[static_cast<std::size_t>(j)];
      for (Eigen::Index c = 0; c < F.cols(); ++c) F.col(c) = X.apply_transpose_force(F.col(c));
      j = model.parent(j);
      const MatX Sj = joint_subspace(model, j);
      const int vj = model.v_index(j);
      M.block(vj, vi, Sj.cols(), di) = Sj.transpose() * F;
      M.block(vi, vj, di, Sj.cols()) = M.block(vj, vi, Sj.cols(), di).transpose();
    }
  }
  return M;
}

VecX rnea(const RobotModel& model, const RobotState& state, const VecX& qdd) {
  state.validate(model);
  KinematicsCache cache;
  forward_sweep(model, state.q, state.qd, cache);
  const int nl = model.num_links();
  std::vector<Vec6> f(static_cast<std::size_t>(nl));
  std::vector<Vec6> a(static_cast<std::size_t>(nl));
  const Vec6 a0 = -model.gravity_spatial();
  for (int i = 0; i < nl; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const int p = model.parent(i);
    const Vec6 ap = p < 0 ? a0 : a[static_cast<std::size_t>(p)];
    const MatX Si = joint_subspace(model, i);
    a[ui] = cache.X_up[ui].apply_motion(ap) + cache.a_bias[ui] +
            Si * qdd.segment(model.v_index(i), Si.cols());
    const SpatialInertia& I = model.inertia(i);
    f[ui] = I * a[ui] + cross_force(cache.v[ui], I * cache.v[ui]);
    if (!state.f_ext.empty()) f[ui] -= state.f_ext[ui].vec();
  }
  VecX tau(model.dof());
  for (int i = nl - 1; i >= 0; --i) {
    const auto ui = static_cast<std::size_t>(i);
    const MatX Si = joint_subspace(model, i);
    tau.segment(model.v_index(i), Si.cols()) = Si.transpose() * f[ui];
    const int p = model.parent(i);
    if (p >= 0) f[static_cast<std::size_t>(p)] += cache.X_up[ui].apply_transpose_force(f[ui]);
  }
  return tau;
}

VecX rnea_bias(const RobotModel& model, const RobotState& state) {
  return rnea(model, state, VecX::Zero(model.dof()));
}

JointSpaceModel joint_space_model(const RobotModel& model, const RobotState& state,
                                  const ConstraintSet& constraints) {
  JointSpaceModel js;
  js.M = crba(model, state.q);
  js.c = rnea_bias(model, state);
  ConstraintJacobian cj = constraint_jacobian(model, state, constraints);
  js.J = std::move(cj.J);
  js.Jdot_qd = std::move(cj.Jdot_qd);
  return js;
}

MatX ltl_factor(const MatX& M, const std::vector<int>& lambda) {
  const Eigen::Index n = M.rows();
  MatX H = M;
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    if (!(H(k, k) > 0.0)) {
      throw RankDeficientError("LTL", "nonpositive pivot at dof " + std::to_string(k));
    }
    H(k, k) = std::sqrt(H(k, k));
    for (int i = lambda[static_cast<std::size_t>(k)]; i >= 0; i = lambda[static_cast<std::size_t>(i)]) {
      H(k, i) /= H(k, k);
    }
    for (int i = lambda[static_cast<std::size_t>(k)]; i >= 0; i = lambda[static_cast<std::size_t>(i)]) {
      for (int j = i; j >= 0; j = lambda[static_cast<std::size_t>(j)]) {
        H(i, j) -= H(k, i) * H(k, j);
      }
    }
  }
  // Only the lower triangle along ancestor chains was touched; everything
  // else is structurally zero.
  MatX L = MatX::Zero(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    L(k, k) = H(k, k);
    for (int i = lambda[static_cast<std::size_t>(k)]; i >= 0; i = lambda[static_cast<std::size_t>(i)]) {
      L(k, i) = H(k, i);
    }
  }
  return L;
}

MatX ltl_osim(const RobotModel& model, const RobotState& state, const ConstraintSet& constraints) {
  const MatX M = crba(model, state.q);
  const MatX L = ltl_factor(M, model.dof_parents());
  const MatX J = constraint_jacobian(model, state, constraints).J;
  // Y L = J  <=>  L^T Y^T = J^T with L^T upper triangular.
  const MatX Yt = L.transpose().triangularView<Eigen::Upper>().solve(J.transpose());
  return Yt.transpose() * Yt;
}

KktSolution kkt_oracle(const JointSpaceModel& js, const VecX& tau, const VecX& k) {
  const Eigen::Index n = js.M.rows();
  const Eigen::Index m = js.J.rows();
  MatX A = MatX::Zero(n + m, n + m);
  A.topLeftCorner(n, n) = js.M;
  A.topRightCorner(n, m) = js.J.transpose();
  A.bottomLeftCorner(m, n) = js.J;
  VecX rhs(n + m);
  rhs.head(n) = tau - js.c;
  rhs.tail(m) = k - js.Jdot_qd;
  Eigen::FullPivLU<MatX> lu(A);
  lu.setThreshold(1e-12);
  if (!lu.isInvertible()) {
    std::ostringstream os;
    os << "KKT matrix of size " << (n + m) << " has rank " << lu.rank();
    throw RankDeficientError("KKT", os.str());
  }
  const VecX x = lu.solve(rhs);
  return {x.head(n), x.tail(m)};
}

KktSolution kkt_oracle(const RobotModel& model, const RobotState& state,
                       const ConstraintSet& constraints) {
  const JointSpaceModel js = joint_space_model(model, state, constraints);
  return kkt_oracle(js, state.tau, constraints.stacked_targets());
}

VecX joint_space_soft_solve(const RobotModel& model, const RobotState& state,
                            const ConstraintSet& constraints) {
  const JointSpaceModel js = joint_space_model(model, state, constraints);
  VecX w(constraints.rows());
  int row = 0;
  for (const auto& e : constraints.entries()) {
    if (!e.soft_weight) throw ModelError("soft solve requires a weight on every constraint");
    w.segment(row, e.rows()) = *e.soft_weight;
    row += e.rows();
  }
  // Same solution as (M + J^T W J) qdd = tau - c + J^T W (k - Jdot qd), but
  // through the matrix inversion lemma so large weights do not swamp M.
  const Eigen::LLT<MatX> M(js.M);
  const VecX free = M.solve(state.tau - js.c);
  const MatX MinvJt = M.solve(js.J.transpose());
  MatX S = js.J * MinvJt;
  S.diagonal() += w.cwiseInverse();
  const VecX gap = constraints.stacked_targets() - js.Jdot_qd - js.J * free;
  return free + MinvJt * S.ldlt().solve(gap);
}

double mechanical_energy(const RobotModel& model, const RobotState& state) {
  const KinematicsCache cache = forward_sweep(model, state);
  double e = 0.0;
  for (int i = 0; i < model.num_links(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const SpatialInertia& I = model.inertia(i);
    e += 0.5 * cache.v[ui].dot(I * cache.v[ui]);
    const Vec3 com_world = cache.position(i) + cache.rotation(i) * I.com();
    e -= I.mass() * model.gravity().dot(com_world);
  }
  return e;
}

}  // namespace pvdyn
