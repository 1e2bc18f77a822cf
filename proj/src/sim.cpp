#include "pvdyn/sim.hpp"

#include <cmath>
#include <sstream>

#include "pvdyn/baseline.hpp"
#include "pvdyn/errors.hpp"
#include "pvdyn/generators.hpp"
#include "pvdyn/io.hpp"
#include "pvdyn/kinematics.hpp"

namespace pvdyn {

const char* to_string(Integrator integrator) {
  return integrator == Integrator::Rk4 ? "rk4" : "semi-implicit-euler";
}

const char* to_string(SolverKind solver) {
  switch (solver) {
    case SolverKind::Pv: return "pv";
    case SolverKind::PvEarly: return "pv-early";
    case SolverKind::PvSoft: return "pv-soft";
  }
  return "unknown";
}

Integrator integrator_from_string(const std::string& name) {
  if (name == "semi-implicit-euler" || name == "euler") return Integrator::SemiImplicitEuler;
  if (name == "rk4") return Integrator::Rk4;
  throw ModelError("unknown integrator '" + name + "' (expected semi-implicit-euler or rk4)");
}

SolverKind solver_from_string(const std::string& name) {
  if (name == "pv") return SolverKind::Pv;
  if (name == "pv-early") return SolverKind::PvEarly;
  if (name == "pv-soft") return SolverKind::PvSoft;
  throw ModelError("unknown simulation solver '" + name + "' (expected pv, pv-early or pv-soft)");
}

void SimConfig::validate() const {
  if (!(dt > 0.0)) throw ModelError("dt must be positive");
  if (!(baumgarte_T > 0.0)) throw ModelError("Baumgarte period T must be positive");
  if (!(duration >= dt)) throw ModelError("duration must be at least one time step");
  if (solver == SolverKind::PvSoft && !(soft_weight > 0.0)) throw ModelError("soft weight must be positive");
}

VecX baumgarte_acceleration(const VecX& e, const VecX& edot, double T) {
  return -(2.0 / T) * edot - e / (T * T);
}

namespace {

struct PointData {
  Vec3 rho;       ///< constrained point minus link origin, world coordinates
  Vec3 position;  ///< constrained point, world coordinates
  Vec3 velocity;
  Vec3 omega;
  Vec3 origin_velocity;
};

PointData point_data(const KinematicsCache& kin, const AnchoredConstraint& c) {
  PointData d;
  const Mat3 R = kin.rotation(c.link);
  d.rho = R * c.point;
  d.position = kin.position(c.link) + d.rho;
  const Vec6 v = kin.world_aligned_velocity(c.link);
  d.omega = v.head<3>();
  d.origin_velocity = v.tail<3>();
  d.velocity = d.origin_velocity + d.omega.cross(d.rho);
  return d;
}

/// Rows (world directions) of a world-point constraint.
std::vector<Vec3> point_axes(const AnchoredConstraint& c) {
  if (!c.axes.empty()) return c.axes;
  return {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
}

void require_anchor(const AnchoredConstraint& c) {
  if (!c.anchor || (c.family == AnchoredConstraint::Family::WorldWeld && !c.anchor_rotation)) {
    throw ModelError("anchored constraint on link " + std::to_string(c.link) + " has no anchor");
  }
}

}  // namespace

void capture_anchors(const RobotModel& model, const RobotState& state,
                     std::vector<AnchoredConstraint>& anchored) {
  KinematicsCache kin;
  forward_positions(model, state.q, kin);
  for (auto& c : anchored) {
    if (c.link < 0 || c.link >= model.num_links()) {
      throw ModelError("anchored constraint references unknown link " + std::to_string(c.link));
    }
    if (!c.anchor) {
      c.anchor = c.family == AnchoredConstraint::Family::WorldWeld ? kin.position(c.link)
                                                                   : point_data(kin, c).position;
    }
    if (c.family == AnchoredConstraint::Family::WorldWeld && !c.anchor_rotation) {
      c.anchor_rotation = kin.rotation(c.link);
    }
  }
}

ConstraintErrors constraint_errors(const RobotModel& model, const RobotState& state,
                                   const std::vector<AnchoredConstraint>& anchored) {
  KinematicsCache kin;
  forward_sweep(model, state.q, state.qd, kin);
  int rows = 0;
  for (const auto& c : anchored) rows += c.rows();
  ConstraintErrors out{VecX(rows), VecX(rows)};
  int row = 0;
  for (const auto& c : anchored) {
    require_anchor(c);
    if (c.family == AnchoredConstraint::Family::WorldWeld) {
      const Vec6 v = kin.world_aligned_velocity(c.link);
      out.position.segment<3>(row) = rotation_log(kin.rotation(c.link) * c.anchor_rotation->transpose());
      out.position.segment<3>(row + 3) = kin.position(c.link) - *c.anchor;
      out.velocity.segment<6>(row) = v;
      row += 6;
      continue;
    }
    const PointData d = point_data(kin, c);
    for (const Vec3& axis : point_axes(c)) {
      out.position(row) = axis.dot(d.position - *c.anchor);
      out.velocity(row) = axis.dot(d.velocity);
      ++row;
    }
  }
  return out;
}

ConstraintSet baumgarte_targets(const RobotModel& model, const RobotState& state,
                                const std::vector<AnchoredConstraint>& anchored, double T,
                                bool stabilize) {
  KinematicsCache kin;
  forward_sweep(model, state.q, state.qd, kin);
  const ConstraintErrors err = stabilize ? constraint_errors(model, state, anchored) : ConstraintErrors{};
  ConstraintSet out;
  int row = 0;
  for (const auto& c : anchored) {
    ConstraintEntry e = anchored_rows(model, state, c);
    const int rows = e.rows();
    VecX desired = VecX::Zero(rows);
    if (stabilize) {
      desired = baumgarte_acceleration(err.position.segment(row, rows), err.velocity.segment(row, rows), T);
    }
    if (c.family == AnchoredConstraint::Family::WorldWeld) {
      // Spatial acceleration (alpha, pdd - omega x pdot) in world-aligned axes.
      const Vec6 v = kin.world_aligned_velocity(c.link);
      e.k = desired;
      e.k.tail<3>() -= v.head<3>().cross(v.tail<3>());
    } else {
      const PointData d = point_data(kin, c);
      const Vec3 velocity_terms = d.omega.cross(d.origin_velocity) + d.omega.cross(d.omega.cross(d.rho));
      const std::vector<Vec3> axes = point_axes(c);
      for (int r = 0; r < rows; ++r) {
        e.k(r) = desired(r) - axes[static_cast<std::size_t>(r)].dot(velocity_terms);
      }
    }
    if (c.soft_weight) e.soft_weight = VecX::Constant(rows, *c.soft_weight);
    out.add(std::move(e));
    row += rows;
  }
  out.normalize();
  return out;
}

std::string Trajectory::csv_header() const {
  std::ostringstream os;
  os << "t";
  if (!samples.empty()) {
    const TrajectorySample& s = samples.front();
    for (Eigen::Index i = 0; i < s.q.size(); ++i) os << ",q" << i;
    for (Eigen::Index i = 0; i < s.qd.size(); ++i) os << ",qd" << i;
    for (Eigen::Index i = 0; i < s.qdd.size(); ++i) os << ",qdd" << i;
    for (Eigen::Index i = 0; i < s.lambda.size(); ++i) os << ",lambda" << i;
  }
  os << ",con_pos_err,con_vel_err,energy";
  return os.str();
}

std::string Trajectory::to_csv() const {
  std::ostringstream os;
  os << csv_header() << '\n';
  auto put = [&os](const VecX& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) os << ',' << format_double(v(i));
  };
  for (const auto& s : samples) {
    os << format_double(s.t);
    put(s.q);
    put(s.qd);
    put(s.qdd);
    put(s.lambda);
    os << ',' << format_double(s.con_pos_err) << ',' << format_double(s.con_vel_err) << ','
       << format_double(s.energy) << '\n';
  }
  return os.str();
}

VecX integrate_configuration(const RobotModel& model, const VecX& q, const VecX& v, double h) {
  VecX out = q;
  for (int i = 0; i < model.num_links(); ++i) {
    const Joint& joint = model.link(i).joint;
    const int qi = model.q_index(i);
    const int vi = model.v_index(i);
    if (joint.kind != JointKind::Floating) {
      out(qi) += h * v(vi);
      continue;
    }
    const Mat3 R = quaternion_to_matrix(q.data() + qi + 3);
    out.segment<3>(qi) += h * (R * v.segment<3>(vi + 3));
    const Vec3 w = v.segment<3>(vi) * h;
    const double angle = w.norm();
    Eigen::Quaterniond dq = Eigen::Quaterniond::Identity();
    if (angle > 0.0) dq = Eigen::Quaterniond(Eigen::AngleAxisd(angle, w / angle));
    const Eigen::Quaterniond cur(q(qi + 3), q(qi + 4), q(qi + 5), q(qi + 6));
    const Eigen::Quaterniond next = (cur * dq).normalized();
    out.segment<4>(qi + 3) << next.w(), next.x(), next.y(), next.z();
  }
  return out;
}

namespace {

/// Time derivative of the configuration vector for generalized velocity v.
VecX configuration_rate(const RobotModel& model, const VecX& q, const VecX& v) {
  VecX out(model.config_size());
  for (int i = 0; i < model.num_links(); ++i) {
    const Joint& joint = model.link(i).joint;
    const int qi = model.q_index(i);
    const int vi = model.v_index(i);
    if (joint.kind != JointKind::Floating) {
      out(qi) = v(vi);
      continue;
    }
    const Mat3 R = quaternion_to_matrix(q.data() + qi + 3);
    out.segment<3>(qi) = R * v.segment<3>(vi + 3);
    const Eigen::Quaterniond cur(q(qi + 3), q(qi + 4), q(qi + 5), q(qi + 6));
    const Eigen::Quaterniond w(0.0, v(vi), v(vi + 1), v(vi + 2));
    const Eigen::Quaterniond rate = cur * w;
    out.segment<4>(qi + 3) << 0.5 * rate.w(), 0.5 * rate.x(), 0.5 * rate.y(), 0.5 * rate.z();
  }
  return out;
}

void normalize_quaternions(const RobotModel& model, VecX& q) {
  if (!model.floating_base()) return;
  const int qi = model.q_index(0);
  q.segment<4>(qi + 3).normalize();
}

}  // namespace

Simulator::Simulator(const RobotModel& model, std::vector<AnchoredConstraint> anchored,
                     ConstraintSet raw, SimConfig config)
    : model_(model), anchored_(std::move(anchored)), raw_(std::move(raw)), config_(config) {
  config_.validate();
  raw_.validate(model_);
  if (config_.stabilize && !raw_.empty()) {
    throw ModelError(
        "raw K/k constraints carry no position error to stabilize; run open loop "
        "(disable Baumgarte stabilization) or describe them as world_point/world_weld");
  }
}

ConstraintSet Simulator::constraints_at(const RobotState& state) const {
  ConstraintSet cs = baumgarte_targets(model_, state, anchored_, config_.baumgarte_T, config_.stabilize);
  for (const auto& e : raw_.entries()) cs.add(e);
  if (config_.solver == SolverKind::PvSoft) {
    for (auto& e : cs.entries()) {
      if (!e.soft_weight) e.soft_weight = VecX::Constant(e.rows(), config_.soft_weight);
    }
  } else {
    cs = cs.hard();
  }
  return cs;
}

DynamicsSolution Simulator::dynamics(const RobotState& state) {
  DynamicsSolution sol;
  try {
    const ConstraintSet cs = constraints_at(state);
    switch (config_.solver) {
      case SolverKind::Pv: pv_solve(model_, state, cs, pv_ws_, sol); break;
      case SolverKind::PvEarly: pv_early_solve(model_, state, cs, early_ws_, sol); break;
      case SolverKind::PvSoft: pv_soft_solve(model_, state, cs, pv_ws_, sol); break;
    }
  } catch (const SimulationError&) {
    throw;
  } catch (const Error& e) {
    throw SimulationError(time_, e.what());
  }
  return sol;
}

RobotState Simulator::step(const RobotState& state, const DynamicsSolution* current) {
  const double h = config_.dt;
  DynamicsSolution here;
  if (current == nullptr) {
    here = dynamics(state);
    current = &here;
  }
  RobotState next = state;
  if (config_.integrator == Integrator::SemiImplicitEuler) {
    next.qd = state.qd + h * current->qdd;
    next.q = integrate_configuration(model_, state.q, next.qd, h);
    time_ += h;
    return next;
  }
  // Classical RK4 on (q, qd); quaternion renormalized after the step.
  const double t0 = time_;
  auto stage = [&](const VecX& q_off, const VecX& qd_off, double dt_stage, VecX& dq, VecX& dqd) {
    RobotState s = state;
    s.q = state.q + q_off;
    s.qd = state.qd + qd_off;
    time_ = t0 + dt_stage;
    dq = configuration_rate(model_, s.q, s.qd);
    dqd = dynamics(s).qdd;
  };
  const VecX k1q = configuration_rate(model_, state.q, state.qd);
  const VecX k1v = current->qdd;
  VecX k2q, k2v, k3q, k3v, k4q, k4v;
  stage(0.5 * h * k1q, 0.5 * h * k1v, 0.5 * h, k2q, k2v);
  stage(0.5 * h * k2q, 0.5 * h * k2v, 0.5 * h, k3q, k3v);
  stage(h * k3q, h * k3v, h, k4q, k4v);
  next.q = state.q + (h / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q);
  next.qd = state.qd + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
  normalize_quaternions(model_, next.q);
  time_ = t0 + h;
  return next;
}

TrajectorySample Simulator::sample(double t, const RobotState& state, const DynamicsSolution& sol) const {
  TrajectorySample s;
  s.t = t;
  s.q = state.q;
  s.qd = state.qd;
  s.qdd = sol.qdd;
  s.lambda = sol.lambda;
  if (!anchored_.empty()) {
    const ConstraintErrors err = constraint_errors(model_, state, anchored_);
    s.con_pos_err = err.position.norm();
    s.con_vel_err = err.velocity.norm();
  }
  s.energy = mechanical_energy(model_, state);
  return s;
}

Trajectory Simulator::run(const RobotState& initial) {
  initial.validate(model_);
  capture_anchors(model_, initial, anchored_);
  const long steps = std::lround(config_.duration / config_.dt);
  Trajectory traj;
  traj.samples.reserve(static_cast<std::size_t>(steps + 1));
  RobotState state = initial;
  time_ = 0.0;
  for (long k = 0;; ++k) {
    const double t = static_cast<double>(k) * config_.dt;
    time_ = t;
    const DynamicsSolution sol = dynamics(state);
    traj.samples.push_back(sample(t, state, sol));
    if (k == steps) break;
    state = step(state, &sol);
  }
  return traj;
}

Trajectory simulate(const RobotModel& model, const RobotState& initial,
                    std::vector<AnchoredConstraint> anchored, ConstraintSet raw, const SimConfig& config) {
  Simulator sim(model, std::move(anchored), std::move(raw), config);
  return sim.run(initial);
}

}  // namespace pvdyn
