#include <doctest.h>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "pvdyn/errors.hpp"
#include "pvdyn/io.hpp"
#include "pvdyn/linalg.hpp"
#include "scenarios.hpp"

using namespace pvdyn;

namespace {

constexpr Family kFamilies[] = {Family::Chain, Family::Tree, Family::Branched, Family::Ladder};

double solution_error(const DynamicsSolution& sol, const KktSolution& ref) {
  return std::max(linalg::relative_error(sol.qdd, ref.qdd), linalg::relative_error(sol.lambda, ref.lambda));
}

ConstraintEntry entry(int link, const MatX6& K, const VecX& k) {
  ConstraintEntry e;
  e.link = link;
  e.K = K;
  e.k = k;
  return e;
}

Eigen::Matrix<double, 1, 6> unit_row(int axis) {
  Eigen::Matrix<double, 1, 6> r = Eigen::Matrix<double, 1, 6>::Zero();
  r(axis) = 1.0;
  return r;
}

}  // namespace

TEST_SUITE("solvers") {

TEST_CASE("pendulum accelerations") {
  const RobotModel model = make_pendulum(1.0, 0.5);
  RobotState s = RobotState::Zero(model);
  CHECK(std::abs(aba(model, s)(0)) < 1e-15);
  s.q(0) = M_PI / 2;
  // A point mass would give -g / l; the tiny rotational inertia barely changes it.
  CHECK(aba(model, s)(0) == doctest::Approx(-9.81 * 0.5 / (0.25 + 1e-6)).epsilon(1e-13));
}

TEST_CASE("without constraints PV is the articulated body algorithm") {
  for (Family f : kFamilies) {
    for (int i = 0; i < 10; ++i) {
      const Instance inst = make_instance(f, 21, i);
      const VecX qdd = aba(inst.model, inst.state);
      CHECK(pv_solve(inst.model, inst.state, ConstraintSet{}).qdd == qdd);
      CHECK(linalg::relative_error(qdd, kkt_oracle(inst.model, inst.state, ConstraintSet{}).qdd) < 1e-10);
    }
  }
}

TEST_CASE("PV and PV-early match the KKT oracle") {
  for (Family f : kFamilies) {
    for (int i = 0; i < 25; ++i) {
      const Instance inst = make_instance(f, 22, i);
      CAPTURE(inst.label);
      const KktSolution ref = kkt_oracle(inst.model, inst.state, inst.constraints);
      const DynamicsSolution pv = pv_solve(inst.model, inst.state, inst.constraints);
      const DynamicsSolution early = pv_early_solve(inst.model, inst.state, inst.constraints);
      CHECK(solution_error(pv, ref) < 1e-8);
      CHECK(solution_error(early, ref) < 1e-8);
      CHECK(pv.residual < 1e-8);
      CHECK(early.residual < 1e-8);
    }
  }
}

TEST_CASE("double pendulum with a fixed tip acceleration") {
  const RobotModel model = load_model_file(PVDYN_EXAMPLE_DIR "/pendulum2.json");
  const ConstraintSet cs = load_constraints_file(PVDYN_EXAMPLE_DIR "/pendulum2_tip.json", model).constraints;
  RobotState s = RobotState::Zero(model);
  s.q << 0.4, -0.9;
  s.qd << 0.3, 1.2;
  const DynamicsSolution pv = pv_solve(model, s, cs);
  const DynamicsSolution early = pv_early_solve(model, s, cs);
  CHECK(pv.residual < 1e-10);
  CHECK(early.residual < 1e-10);
  CHECK(solution_error(pv, kkt_oracle(model, s, cs)) < 1e-12);
}

TEST_CASE("multiplier sign: a body welded at rest") {
  Link body;
  body.name = "body";
  body.joint.kind = JointKind::Floating;
  body.mass = 3.0;
  body.inertia_com = Vec3(0.1, 0.2, 0.3).asDiagonal();
  const RobotModel model({body});
  ConstraintSet cs;
  cs.add(entry(0, MatX6::Identity(6, 6), VecX::Zero(6)));
  const RobotState s = RobotState::Zero(model);
  for (const DynamicsSolution& sol : {pv_solve(model, s, cs), pv_early_solve(model, s, cs)}) {
    CHECK(sol.qdd.cwiseAbs().maxCoeff() < 1e-12);
    // The weld pushes up with -K^T lambda, so lambda points down.
    CHECK(sol.lambda(5) == doctest::Approx(-3.0 * 9.81).epsilon(1e-12));
    CHECK(sol.lambda.head<5>().cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("gravity modes agree") {
  for (Family f : kFamilies) {
    for (int i = 0; i < 10; ++i) {
      const Instance inst = make_instance(f, 23, i);
      SolverOptions weights;
      weights.gravity = GravityMode::LinkWeights;
      const DynamicsSolution a = pv_solve(inst.model, inst.state, inst.constraints);
      const DynamicsSolution b = pv_solve(inst.model, inst.state, inst.constraints, weights);
      CHECK(linalg::relative_error(a.qdd, b.qdd) < 1e-10);
      CHECK(linalg::relative_error(a.lambda, b.lambda) < 1e-10);
      const DynamicsSolution c = pv_early_solve(inst.model, inst.state, inst.constraints, weights);
      CHECK(linalg::relative_error(a.qdd, c.qdd) < 1e-10);
    }
  }
}

TEST_CASE("switching gravity off equals a weightless model") {
  const Instance inst = make_instance(Family::Branched, 24, 0);
  SolverOptions off;
  off.gravity = GravityMode::Off;
  RobotModel weightless = inst.model;
  weightless.set_gravity(Vec3::Zero());
  const DynamicsSolution a = pv_solve(inst.model, inst.state, inst.constraints, off);
  const DynamicsSolution b = pv_solve(weightless, inst.state, inst.constraints);
  CHECK(linalg::relative_error(a.qdd, b.qdd) < 1e-13);
  CHECK(linalg::relative_error(a.lambda, b.lambda) < 1e-13);
}

TEST_CASE("rank-one reflector") {
  SUBCASE("a vector already along the first axis") {
    const auto r = rank1_reflector(Eigen::Vector3d(1, 0, 0), 1.0);
    REQUIRE(r);
    CHECK(r->sigma == doctest::Approx(1.0));
  }
  SUBCASE("singular value of (3, 4) with D = 2") {
    const auto r = rank1_reflector(Eigen::Vector2d(3, 4), 2.0);
    REQUIRE(r);
    CHECK(r->sigma == doctest::Approx(12.5));
  }
  SUBCASE("reflection maps ks onto the first axis") {
    Rng rng = testing::seeded(25);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      VecX ks(5);
      for (Eigen::Index i = 0; i < 5; ++i) ks(i) = n(rng);
      const double D = 0.5 + std::abs(n(rng));
      const auto r = rank1_reflector(ks, D);
      REQUIRE(r);
      const MatX U = MatX::Identity(5, 5) - 2.0 * r->w * r->w.transpose() / r->w.squaredNorm();
      const VecX image = U * ks;
      CHECK(std::abs(image(0) + (ks(0) >= 0 ? 1.0 : -1.0) * ks.norm()) < 1e-14);
      CHECK(image.tail(4).cwiseAbs().maxCoeff() < 1e-14);
      // U (ks ks^T / D) U^T = sigma e0 e0^T.
      const MatX rotated = U * (ks * ks.transpose() / D) * U.transpose();
      CHECK(std::abs(rotated(0, 0) - r->sigma) < 1e-13 * r->sigma);
      CHECK(r->sigma == doctest::Approx(ks.squaredNorm() / D));
    }
  }
  SUBCASE("no rank below the tolerance") {
    CHECK(!rank1_reflector(Eigen::Vector3d(1e-12, 0, 0), 1.0));
    CHECK(!rank1_reflector(VecX(), 1.0));
  }
}

TEST_CASE("early elimination pivots away from a row the joint cannot move") {
  // Joint axes x, y, z. Angular rows x and z on the last link: the z joint
  // cannot act on the first row, so the second one is eliminated there and
  // the x row travels up to the x joint.
  std::vector<Link> links(3);
  const Vec3 axes[] = {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()};
  for (int i = 0; i < 3; ++i) {
    links[static_cast<std::size_t>(i)].name = "l" + std::to_string(i);
    links[static_cast<std::size_t>(i)].parent = i - 1;
    links[static_cast<std::size_t>(i)].joint.axis = axes[i];
    links[static_cast<std::size_t>(i)].joint.origin_xyz = i == 0 ? Vec3::Zero() : Vec3(0.0, 0.0, -0.4);
    links[static_cast<std::size_t>(i)].com = Vec3(0.05, 0.02, -0.2);
  }
  const RobotModel model(links);
  RobotState s = RobotState::Zero(model);
  s.q << 0.3, 0.0, 0.0;
  s.qd << 0.2, -0.4, 0.7;
  s.tau << 0.5, -0.3, 0.1;
  MatX6 K = MatX6::Zero(2, 6);
  K(0, 0) = 1.0;
  K(1, 2) = 1.0;
  ConstraintSet cs;
  cs.add(entry(2, K, Eigen::Vector2d(0.4, -0.6)));

  EarlyWorkspace ws(model, cs);
  DynamicsSolution out;
  pv_early_solve(model, s, cs, ws, out);
  CHECK(ws.eliminated[2]);
  CHECK(ws.pivot[2] == 1);
  CHECK(!ws.eliminated[1]);
  CHECK(ws.eliminated[0]);
  const KktSolution ref = kkt_oracle(model, s, cs);
  CHECK(solution_error(out, ref) < 1e-12);
  CHECK(solution_error(pv_solve(model, s, cs), ref) < 1e-12);
}

TEST_CASE("tiny elimination pivots trigger one refinement step") {
  int refined = 0;
  for (int i = 0; i < 200; ++i) {
    const Instance inst = make_instance(Family::Tree, 0, i);
    EarlyWorkspace ws(inst.model, inst.constraints);
    DynamicsSolution out;
    pv_early_solve(inst.model, inst.state, inst.constraints, ws, out);
    CHECK(ws.refined == ws.small_pivot);
    if (ws.refined) {
      ++refined;
      CHECK(solution_error(out, kkt_oracle(inst.model, inst.state, inst.constraints)) < 1e-10);
    }
  }
  CHECK(refined > 0);
}

TEST_CASE("solver errors") {
  Rng rng = testing::seeded(27);
  const RobotModel chain = make_chain(4, rng);
  const RobotState s = random_state(chain, rng);

  SUBCASE("seven rows on one link") {
    ConstraintSet cs;
    MatX6 K = MatX6::Zero(7, 6);
    K.topRows<6>().setIdentity();
    K.row(6) = MatX6::Ones(1, 6).normalized();
    cs.add(entry(3, K, VecX::Zero(7)));
    CHECK_THROWS_AS(EarlyWorkspace(chain, cs), OverConstrainedError);
    CHECK_THROWS_AS(pv_solve(chain, s, cs), RankDeficientError);
  }
  SUBCASE("rows that reach a fixed base") {
    ConstraintSet cs;
    cs.add(entry(0, MatX6::Identity(2, 6), VecX::Zero(2)));
    try {
      pv_early_solve(chain, s, cs);
      FAIL("expected a rank-deficiency error");
    } catch (const RankDeficientError& e) {
      CHECK(e.factorization() == "root rows");
    }
    CHECK_THROWS_AS(pv_solve(chain, s, cs), RankDeficientError);
  }
  SUBCASE("duplicated rows") {
    ConstraintSet cs;
    MatX6 K(2, 6);
    K << 0, 0, 0, 1, 0, 0, 0, 0, 0, 1, 0, 0;
    cs.add(entry(3, K, VecX::Zero(2)));
    CHECK_THROWS_AS(pv_solve(chain, s, cs), RankDeficientError);
    CHECK_THROWS_AS(pv_early_solve(chain, s, cs), RankDeficientError);
    CHECK_THROWS_AS(kkt_oracle(chain, s, cs), RankDeficientError);
  }
  SUBCASE("weighted rows go to the soft solver") {
    ConstraintSet cs;
    cs.add(entry(3, MatX6::Identity(1, 6), VecX::Zero(1)));
    const ConstraintSet soft = cs.with_uniform_weight(10.0);
    CHECK_THROWS_AS(pv_solve(chain, s, soft), ModelError);
    CHECK_THROWS_AS(pv_soft_solve(chain, s, cs), ModelError);
    CHECK_THROWS_AS(soft.with_uniform_weight(0.0).validate(chain), ModelError);
  }
}

TEST_CASE("soft constraints") {
  const Instance inst = testing::soft_chain();
  const DynamicsSolution hard = pv_solve(inst.model, inst.state, inst.constraints);
  const VecX free = aba(inst.model, inst.state);

  CHECK((pv_soft_solve(inst.model, inst.state, inst.constraints.with_uniform_weight(1e8)).qdd - hard.qdd).norm() <
        1e-4);
  CHECK(linalg::relative_error(
            pv_soft_solve(inst.model, inst.state, inst.constraints.with_uniform_weight(1e-12)).qdd, free) < 1e-8);

  double previous = std::numeric_limits<double>::infinity();
  for (double w : {1e0, 1e2, 1e4, 1e6, 1e8}) {
    const ConstraintSet soft = inst.constraints.with_uniform_weight(w);
    const DynamicsSolution s = pv_soft_solve(inst.model, inst.state, soft);
    CHECK(s.residual <= previous);
    previous = s.residual;
    CHECK(linalg::relative_error(s.qdd, joint_space_soft_solve(inst.model, inst.state, soft)) < 1e-9);
    // Multipliers are the penalty forces w (K a - k). Forming that product
    // directly amplifies rounding by w, so the reference eliminates qdd instead:
    // (J M^-1 J^T + W^-1) lambda = J M^-1 (tau - c) + Jdot qd - k.
    const JointSpaceModel js = joint_space_model(inst.model, inst.state, soft);
    const Eigen::LLT<MatX> M(js.M);
    MatX S = js.J * M.solve(js.J.transpose());
    S.diagonal().array() += 1.0 / w;
    const VecX rhs = js.J * M.solve(inst.state.tau - js.c) + js.Jdot_qd - soft.stacked_targets();
    CHECK(linalg::relative_error(s.lambda, VecX(S.ldlt().solve(rhs))) < 1e-9);
    if (w <= 1e4) {
      const VecX gap = js.J * s.qdd + js.Jdot_qd - soft.stacked_targets();
      CHECK(linalg::relative_error(s.lambda, VecX(w * gap)) < 1e-8);
    }
  }
}

TEST_CASE("workspace solves do not allocate") {
  const Instance refine = [] {
    for (int i = 0;; ++i) {
      Instance inst = make_instance(Family::Tree, 0, i);
      if (EarlyWorkspace ws(inst.model, inst.constraints); true) {
        DynamicsSolution out;
        pv_early_solve(inst.model, inst.state, inst.constraints, ws, out);
        if (ws.refined) return inst;
      }
    }
  }();
  std::vector<Instance> instances = {refine};
  for (Family f : kFamilies) instances.push_back(make_instance(f, 28, 0));

  for (const Instance& inst : instances) {
    CAPTURE(inst.label);
    PvWorkspace ws(inst.model, inst.constraints);
    EarlyWorkspace early(inst.model, inst.constraints);
    const ConstraintSet soft = inst.constraints.with_uniform_weight(1e3);
    const ConstraintSet stiff = inst.constraints.with_uniform_weight(1e6);
    PvWorkspace soft_ws(inst.model, soft);
    PvWorkspace stiff_ws(inst.model, stiff);
    DynamicsSolution a, b, c, d;
    VecX qdd;
    pv_solve(inst.model, inst.state, inst.constraints, ws, a);
    pv_early_solve(inst.model, inst.state, inst.constraints, early, b);
    pv_soft_solve(inst.model, inst.state, soft, soft_ws, c);
    pv_soft_solve(inst.model, inst.state, stiff, stiff_ws, d);
    CHECK(stiff_ws.refined);
    aba(inst.model, inst.state, ws, qdd);

    RobotState moved = inst.state;
    moved.qd *= 0.5;
    Eigen::internal::set_is_malloc_allowed(false);
    for (int rep = 0; rep < 3; ++rep) {
      pv_solve(inst.model, moved, inst.constraints, ws, a);
      pv_early_solve(inst.model, moved, inst.constraints, early, b);
      pv_soft_solve(inst.model, moved, soft, soft_ws, c);
      pv_soft_solve(inst.model, moved, stiff, stiff_ws, d);
    }
    Eigen::internal::set_is_malloc_allowed(true);
    CHECK(solution_error(a, kkt_oracle(inst.model, moved, inst.constraints)) < 1e-8);
    CHECK(linalg::relative_error(b.qdd, a.qdd) < 1e-8);
  }
}

TEST_CASE("structural invariants of the backward sweep") {
  for (Family f : kFamilies) {
    for (int i = 0; i < 25; ++i) {
      const Instance inst = make_instance(f, 29, i);
      PvWorkspace ws(inst.model, inst.constraints);
      DynamicsSolution out;
      pv_solve(inst.model, inst.state, inst.constraints, ws, out);
      for (int k = 0; k < inst.model.num_links(); ++k) {
        if (inst.model.link(k).joint.kind == JointKind::Floating) continue;
        const Vec6 s = inst.model.link(k).joint.axis_column();
        CHECK((s.transpose() * ws.projector(inst.model, k)).cwiseAbs().maxCoeff() < 1e-12);
        const Mat6& H = ws.H[static_cast<std::size_t>(k)];
        CHECK((H - H.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * (1.0 + H.cwiseAbs().maxCoeff()));
        CHECK(Eigen::SelfAdjointEigenSolver<Mat6>(H).eigenvalues().minCoeff() > 0.0);
      }
      if (!inst.model.floating_base()) {
        // With a fixed base the root dual Hessian is J M^-1 J^T in row order.
        const MatX dense = ltl_osim(inst.model, inst.state, inst.constraints);
        for (int r = 0; r < ws.m; ++r) {
          for (int c = 0; c < ws.m; ++c) {
            const double expected = dense(ws.dfs_to_user[static_cast<std::size_t>(r)],
                                          ws.dfs_to_user[static_cast<std::size_t>(c)]);
            CHECK(std::abs(ws.L(r, c) - expected) <= 1e-9 * (1.0 + dense.cwiseAbs().maxCoeff()));
          }
        }
        CHECK(Eigen::SelfAdjointEigenSolver<MatX>(ws.L).eigenvalues().minCoeff() > 0.0);
      }
    }
  }
}

}  // TEST_SUITE
