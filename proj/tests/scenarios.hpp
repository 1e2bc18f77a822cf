#pragma once

// Fixed scenarios shared by the unit tests and the acceptance binary.

#include <cmath>
#include <random>

#include "pvdyn/baseline.hpp"
#include "pvdyn/generators.hpp"
#include "pvdyn/sim.hpp"
#include "pvdyn/solvers.hpp"

namespace pvdyn::testing {

inline Rng seeded(std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), 0x7e57u};
  return Rng(seq);
}

/// Seven-joint chain with a 3D point constraint at the tip link origin.
inline Instance soft_chain() {
  Rng rng = seeded(7);
  Instance inst;
  inst.label = "chain7-tip3";
  inst.model = make_chain(7, rng);
  inst.state = random_state(inst.model, rng);
  AnchoredConstraint tip;
  tip.link = 6;
  ConstraintEntry e = anchored_rows(inst.model, inst.state, tip);
  e.k = Vec3(0.3, -0.2, 0.5);
  inst.constraints.add(e);
  inst.constraints.normalize();
  return inst;
}

/// Double pendulum whose tip may only slide along a vertical line through
/// its starting point.
struct PinnedDoublePendulum {
  RobotModel model = make_double_pendulum();
  RobotState initial;
  std::vector<AnchoredConstraint> pins;

  PinnedDoublePendulum() {
    initial = RobotState::Zero(model);
    initial.q << 0.8, -0.5;
    AnchoredConstraint tip;
    tip.link = 1;
    tip.point = Vec3(0.0, 0.0, -1.0);
    tip.axes = {Vec3::UnitX()};
    pins.push_back(tip);
  }

  Trajectory run(double duration, bool stabilize, Integrator integrator = Integrator::Rk4) const {
    SimConfig config;
    config.duration = duration;
    config.stabilize = stabilize;
    config.baumgarte_T = 0.1;
    config.integrator = integrator;
    return simulate(model, initial, pins, ConstraintSet{}, config);
  }
};

inline double max_position_error(const Trajectory& traj) {
  double worst = 0.0;
  for (const auto& s : traj.samples) worst = std::max(worst, s.con_pos_err);
  return worst;
}

/// A single free rigid body with its centre of mass at the link origin.
inline RobotModel free_body() {
  Link body;
  body.name = "body";
  body.joint.kind = JointKind::Floating;
  body.mass = 2.0;
  body.inertia_com = Vec3(0.1, 0.2, 0.3).asDiagonal();
  return RobotModel({body});
}

/// Final joint positions of a double pendulum after 0.5 s of RK4 at step dt.
inline VecX double_pendulum_rk4(double dt) {
  const RobotModel model = make_double_pendulum();
  RobotState s = RobotState::Zero(model);
  s.q << 0.8, -0.5;
  SimConfig config;
  config.dt = dt;
  config.duration = 0.5;
  config.integrator = Integrator::Rk4;
  const Trajectory traj = simulate(model, s, {}, ConstraintSet{}, config);
  return traj.samples.back().q;
}

/// Observed convergence order of RK4 between steps dt and dt/2 against a dt/8 reference.
inline double rk4_order(double dt) {
  const VecX reference = double_pendulum_rk4(dt / 8.0);
  const double coarse = (double_pendulum_rk4(dt) - reference).norm();
  const double fine = (double_pendulum_rk4(dt / 2.0) - reference).norm();
  return std::log2(coarse / fine);
}

}  // namespace pvdyn::testing
