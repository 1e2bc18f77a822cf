#include "pvdyn/kinematics.hpp"

#include "pvdyn/errors.hpp"

namespace pvdyn {

void KinematicsCache::resize(int num_links) {
  const auto n = static_cast<std::size_t>(num_links);
  X_up.resize(n);
  X_world.resize(n);
  v.resize(n, Vec6::Zero());
  a_bias.resize(n, Vec6::Zero());
}

Vec6 KinematicsCache::world_aligned_velocity(int i) const {
  const Mat3 R = rotation(i);
  const Vec6& vb = v[static_cast<std::size_t>(i)];
  Vec6 out;
  out << R * vb.head<3>(), R * vb.tail<3>();
  return out;
}

namespace {

void update_pose(const RobotModel& model, const VecX& q, KinematicsCache& cache, int i) {
  const auto ui = static_cast<std::size_t>(i);
  const Link& link = model.link(i);
  cache.X_up[ui] = link.joint.joint_transform(q.data() + model.q_index(i)) * model.tree_transform(i);
  const int p = link.parent;
  cache.X_world[ui] = p < 0 ? cache.X_up[ui] : cache.X_up[ui] * cache.X_world[static_cast<std::size_t>(p)];
}

}  // namespace

void forward_positions(const RobotModel& model, const VecX& q, KinematicsCache& cache) {
  if (cache.size() != model.num_links()) cache.resize(model.num_links());
  for (int i = 0; i < model.num_links(); ++i) {
    update_pose(model, q, cache, i);
    cache.v[static_cast<std::size_t>(i)].setZero();
    cache.a_bias[static_cast<std::size_t>(i)].setZero();
  }
}

void forward_sweep(const RobotModel& model, const VecX& q, const VecX& qd, KinematicsCache& cache) {
  if (cache.size() != model.num_links()) cache.resize(model.num_links());
  for (int i = 0; i < model.num_links(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    update_pose(model, q, cache, i);
    const Link& link = model.link(i);
    Vec6 vj;
    if (link.joint.kind == JointKind::Floating) {
      vj = qd.segment<6>(model.v_index(i));
    } else {
      vj = link.joint.axis_column() * qd(model.v_index(i));
    }
    const int p = link.parent;
    if (p < 0) {
      cache.v[ui] = vj;
    } else {
      cache.v[ui] = cache.X_up[ui].apply_motion(cache.v[static_cast<std::size_t>(p)]) + vj;
    }
    cache.a_bias[ui] = cross_motion(cache.v[ui], vj);
  }
}

KinematicsCache forward_sweep(const RobotModel& model, const RobotState& state) {
  state.validate(model);
  KinematicsCache cache;
  forward_sweep(model, state.q, state.qd, cache);
  return cache;
}

MatX link_jacobian(const RobotModel& model, const KinematicsCache& cache, int link) {
  MatX J = MatX::Zero(6, model.dof());
  const SpatialTransform& Xi = cache.X_world[static_cast<std::size_t>(link)];
  for (int j = link; j >= 0; j = model.parent(j)) {
    // ^i X_j = ^i X_0 (^j X_0)^{-1}
    const SpatialTransform Xij = Xi * cache.X_world[static_cast<std::size_t>(j)].inverse();
    const Joint& joint = model.link(j).joint;
    if (joint.kind == JointKind::Floating) {
      J.middleCols<6>(model.v_index(j)) = Xij.motion_matrix();
    } else {
      J.col(model.v_index(j)) = Xij.apply_motion(joint.axis_column());
    }
  }
  return J;
}

std::vector<Vec6> link_accelerations(const RobotModel& model, const KinematicsCache& cache,
                                     const VecX& qdd) {
  std::vector<Vec6> a(static_cast<std::size_t>(model.num_links()));
  for (int i = 0; i < model.num_links(); ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const Joint& joint = model.link(i).joint;
    Vec6 aj;
    if (joint.kind == JointKind::Floating) {
      aj = qdd.segment<6>(model.v_index(i));
    } else {
      aj = joint.axis_column() * qdd(model.v_index(i));
    }
    const int p = model.parent(i);
    a[ui] = cache.a_bias[ui] + aj;
    if (p >= 0) a[ui] += cache.X_up[ui].apply_motion(a[static_cast<std::size_t>(p)]);
  }
  return a;
}

ConstraintJacobian constraint_jacobian(const RobotModel& model, const RobotState& state,
                                       const ConstraintSet& constraints) {
  constraints.validate(model);
  const KinematicsCache cache = forward_sweep(model, state);
  const std::vector<Vec6> a0 = link_accelerations(model, cache, VecX::Zero(model.dof()));
  ConstraintJacobian out;
  out.J.resize(constraints.rows(), model.dof());
  out.Jdot_qd.resize(constraints.rows());
  int row = 0;
  for (const auto& e : constraints.entries()) {
    const MatX6 Kb = world_aligned_to_body(e.K, cache.rotation(e.link));
    out.J.middleRows(row, e.rows()) = Kb * link_jacobian(model, cache, e.link);
    out.Jdot_qd.segment(row, e.rows()) = Kb * a0[static_cast<std::size_t>(e.link)];
    row += e.rows();
  }
  return out;
}

}  // namespace pvdyn
