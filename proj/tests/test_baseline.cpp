#include <doctest.h>

#include "pvdyn/linalg.hpp"
#include "pvdyn/osim.hpp"
#include "scenarios.hpp"

using namespace pvdyn;

namespace {

constexpr double kG = 9.81;

}  // namespace

TEST_SUITE("baseline") {

TEST_CASE("pendulum inertia and gravity torque") {
  const double m = 1.5, l = 0.8;
  const RobotModel model = make_pendulum(m, l);
  RobotState s = RobotState::Zero(model);
  s.q(0) = M_PI / 2;
  CHECK(crba(model, s.q)(0, 0) == doctest::Approx(m * l * l + 1e-6).epsilon(1e-14));
  // The bias torque is the gradient of the potential -m g l cos(q).
  const VecX c = rnea_bias(model, s);
  CHECK(c(0) == doctest::Approx(m * kG * l).epsilon(1e-12));
  s.tau = c;
  CHECK(std::abs(aba(model, s)(0)) < 1e-12);

  s.q(0) = 0.3;
  s.qd(0) = -1.1;
  const double energy = 0.5 * (m * l * l + 1e-6) * 1.1 * 1.1 - m * kG * l * std::cos(0.3);
  CHECK(mechanical_energy(model, s) == doctest::Approx(energy).epsilon(1e-13));
}

TEST_CASE("bias vanishes without gravity or motion") {
  Rng rng = testing::seeded(2);
  RobotModel model = make_random_tree(10, 5, rng);
  model.set_gravity(Vec3::Zero());
  RobotState s = random_state(model, rng);
  s.qd.setZero();
  CHECK(rnea_bias(model, s).isZero(0.0));
}

TEST_CASE("joint-space inertia is symmetric and stores kinetic energy") {
  for (Family f : {Family::Chain, Family::Tree, Family::Branched, Family::Ladder}) {
    for (int i = 0; i < 5; ++i) {
      const Instance inst = make_instance(f, 8, i);
      const MatX M = crba(inst.model, inst.state.q);
      CHECK((M - M.transpose()).cwiseAbs().maxCoeff() < 1e-13 * (1.0 + M.cwiseAbs().maxCoeff()));
      const KinematicsCache cache = forward_sweep(inst.model, inst.state);
      double kinetic = 0.0;
      for (int k = 0; k < inst.model.num_links(); ++k) {
        const Vec6& v = cache.v[static_cast<std::size_t>(k)];
        kinetic += 0.5 * v.dot(inst.model.inertia(k) * v);
      }
      const double quad = 0.5 * inst.state.qd.dot(M * inst.state.qd);
      CHECK(std::abs(quad - kinetic) <= 1e-12 * (1.0 + kinetic));
    }
  }
}

TEST_CASE("inverse dynamics equals M qdd + c") {
  Rng rng = testing::seeded(3);
  const RobotModel model = make_branched(4, 3, rng);
  const RobotState s = random_state(model, rng, true);
  VecX qdd(model.dof());
  for (Eigen::Index i = 0; i < qdd.size(); ++i) qdd(i) = std::sin(1.0 + static_cast<double>(i));
  const VecX expected = crba(model, s.q) * qdd + rnea_bias(model, s);
  CHECK(linalg::relative_error(rnea(model, s, qdd), expected) < 1e-12);
}

TEST_CASE("tree-sparse LTL factorization") {
  for (Family f : {Family::Tree, Family::Branched, Family::Ladder}) {
    for (int i = 0; i < 5; ++i) {
      const Instance inst = make_instance(f, 9, i);
      const MatX M = crba(inst.model, inst.state.q);
      const std::vector<int> parents = inst.model.dof_parents();
      const MatX L = ltl_factor(M, parents);
      CHECK(linalg::relative_error(MatX(L.transpose() * L), M) < 1e-12);

      const int n = inst.model.dof();
      for (int r = 0; r < n; ++r) {
        std::vector<char> ancestor(static_cast<std::size_t>(n), 0);
        for (int a = r; a >= 0; a = parents[static_cast<std::size_t>(a)]) ancestor[static_cast<std::size_t>(a)] = 1;
        for (int c = 0; c < n; ++c) {
          if (!ancestor[static_cast<std::size_t>(c)]) CHECK(L(r, c) == 0.0);
        }
      }
    }
  }
}

TEST_CASE("LTL-OSIM agrees with PV-OSIM") {
  for (Family f : {Family::Chain, Family::Tree, Family::Branched, Family::Ladder}) {
    for (int i = 0; i < 5; ++i) {
      const Instance inst = make_instance(f, 10, i);
      const MatX ltl = ltl_osim(inst.model, inst.state, inst.constraints);
      CHECK(linalg::relative_error(ltl, pv_osim(inst.model, inst.state.q, inst.constraints).inverse) < 1e-8);
    }
  }
}

TEST_CASE("KKT oracle") {
  SUBCASE("without constraints it is M^-1 (tau - c)") {
    Rng rng = testing::seeded(5);
    const RobotModel model = make_chain(6, rng);
    const RobotState s = random_state(model, rng);
    const KktSolution sol = kkt_oracle(model, s, ConstraintSet{});
    CHECK(sol.lambda.size() == 0);
    const VecX expected = crba(model, s.q).ldlt().solve(s.tau - rnea_bias(model, s));
    CHECK(linalg::relative_error(sol.qdd, expected) < 1e-12);
  }
  SUBCASE("constrained solutions satisfy both block rows") {
    for (Family f : {Family::Chain, Family::Tree, Family::Branched, Family::Ladder}) {
      for (int i = 0; i < 5; ++i) {
        const Instance inst = make_instance(f, 11, i);
        const JointSpaceModel js = joint_space_model(inst.model, inst.state, inst.constraints);
        const KktSolution sol = kkt_oracle(inst.model, inst.state, inst.constraints);
        const VecX dyn = js.M * sol.qdd + js.c + js.J.transpose() * sol.lambda;
        CHECK(linalg::relative_error(dyn, inst.state.tau) < 1e-10);
        const VecX con = js.J * sol.qdd + js.Jdot_qd;
        CHECK(linalg::relative_error(con, inst.constraints.stacked_targets()) < 1e-10);
      }
    }
  }
}

}  // TEST_SUITE
