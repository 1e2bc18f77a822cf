#include <doctest.h>

#include "pvdyn/kinematics.hpp"
#include "pvdyn/sim.hpp"
#include "scenarios.hpp"

using namespace pvdyn;

namespace {

Vec3 unskew(const Mat3& S) { return Vec3(S(2, 1) - S(1, 2), S(0, 2) - S(2, 0), S(1, 0) - S(0, 1)) / 2.0; }

std::vector<Instance> sample_instances() {
  std::vector<Instance> out;
  for (Family f : {Family::Chain, Family::Tree, Family::Branched, Family::Ladder}) {
    for (int i = 0; i < 5; ++i) out.push_back(make_instance(f, 3, i));
  }
  return out;
}

}  // namespace

TEST_SUITE("kinematics") {

TEST_CASE("zero velocity leaves no velocity and no bias acceleration") {
  Rng rng = testing::seeded(1);
  const RobotModel model = make_branched(3, 3, rng);
  RobotState s = random_state(model, rng);
  s.qd.setZero();
  const KinematicsCache cache = forward_sweep(model, s);
  for (int i = 0; i < model.num_links(); ++i) {
    CHECK(cache.v[static_cast<std::size_t>(i)].isZero(0.0));
    CHECK(cache.a_bias[static_cast<std::size_t>(i)].isZero(0.0));
  }
}

TEST_CASE("a lone revolute z joint spins about its axis") {
  Link l;
  l.name = "spinner";
  l.joint.axis = Vec3::UnitZ();
  const RobotModel model({l});
  RobotState s = RobotState::Zero(model);
  s.q(0) = 0.7;
  s.qd(0) = 1.0;
  const KinematicsCache cache = forward_sweep(model, s);
  CHECK(cache.v[0] == (Vec6() << 0, 0, 1, 0, 0, 0).finished());
  CHECK((cache.rotation(0) - Eigen::AngleAxisd(0.7, Vec3::UnitZ()).toRotationMatrix()).norm() < 1e-15);
}

TEST_CASE("pendulum tip Jacobian has the closed form") {
  const double length = 1.3;
  const RobotModel model = make_pendulum(2.0, length);
  AnchoredConstraint tip;
  tip.link = 0;
  tip.point = Vec3(0.0, 0.0, -length);
  tip.axes = {Vec3::UnitX(), Vec3::UnitZ()};
  for (double theta : {0.0, 0.4, 1.2, -2.5}) {
    RobotState s = RobotState::Zero(model);
    s.q(0) = theta;
    ConstraintSet cs;
    ConstraintEntry e = anchored_rows(model, s, tip);
    e.k = VecX::Zero(e.rows());
    cs.add(e);
    const MatX J = constraint_jacobian(model, s, cs).J;
    REQUIRE(J.rows() == 2);
    CHECK(std::abs(J(0, 0) + length * std::cos(theta)) < 1e-14);
    CHECK(std::abs(J(1, 0) - length * std::sin(theta)) < 1e-14);
  }
}

TEST_CASE("constraint Jacobian maps qd to the stacked constrained velocities") {
  for (const Instance& inst : sample_instances()) {
    CAPTURE(inst.label);
    const KinematicsCache cache = forward_sweep(inst.model, inst.state);
    const ConstraintJacobian cj = constraint_jacobian(inst.model, inst.state, inst.constraints);
    const VecX Jqd = cj.J * inst.state.qd;
    int row = 0;
    for (const auto& e : inst.constraints.entries()) {
      const VecX expected = e.K * cache.world_aligned_velocity(e.link);
      CHECK((Jqd.segment(row, e.rows()) - expected).cwiseAbs().maxCoeff() < 1e-12);
      row += e.rows();
    }
  }
}

TEST_CASE("link Jacobians reproduce body velocities") {
  for (const Instance& inst : sample_instances()) {
    const KinematicsCache cache = forward_sweep(inst.model, inst.state);
    for (int i = 0; i < inst.model.num_links(); ++i) {
      const Vec6 v = link_jacobian(inst.model, cache, i) * inst.state.qd;
      CHECK((v - cache.v[static_cast<std::size_t>(i)]).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("finite differences of link poses match the velocities") {
  const double h = 1e-6;
  for (const Instance& inst : sample_instances()) {
    CAPTURE(inst.label);
    const KinematicsCache now = forward_sweep(inst.model, inst.state);
    KinematicsCache later;
    forward_positions(inst.model, integrate_configuration(inst.model, inst.state.q, inst.state.qd, h), later);
    for (int i = 0; i < inst.model.num_links(); ++i) {
      const Vec6 v = now.world_aligned_velocity(i);
      const Vec3 dp = (later.position(i) - now.position(i)) / h;
      const Vec3 w = unskew((later.rotation(i) * now.rotation(i).transpose() - Mat3::Identity()) / h);
      CHECK((dp - v.tail<3>()).cwiseAbs().maxCoeff() < 1e-5);
      CHECK((w - v.head<3>()).cwiseAbs().maxCoeff() < 1e-5);
    }
  }
}

TEST_CASE("acceleration sweep agrees with J qdd + Jdot qd") {
  Rng rng = testing::seeded(4);
  std::normal_distribution<double> n(0.0, 1.0);
  for (const Instance& inst : sample_instances()) {
    CAPTURE(inst.label);
    VecX qdd(inst.model.dof());
    for (Eigen::Index i = 0; i < qdd.size(); ++i) qdd(i) = n(rng);
    const KinematicsCache cache = forward_sweep(inst.model, inst.state);
    const std::vector<Vec6> acc = link_accelerations(inst.model, cache, qdd);
    const ConstraintJacobian cj = constraint_jacobian(inst.model, inst.state, inst.constraints);
    const VecX predicted = cj.J * qdd + cj.Jdot_qd;
    int row = 0;
    for (const auto& e : inst.constraints.entries()) {
      const MatX6 K_body = world_aligned_to_body(e.K, cache.rotation(e.link));
      const VecX actual = K_body * acc[static_cast<std::size_t>(e.link)];
      CHECK((predicted.segment(row, e.rows()) - actual).cwiseAbs().maxCoeff() < 1e-10);
      row += e.rows();
    }
  }
}

}  // TEST_SUITE
