#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "pvdyn/spatial.hpp"
#include "scenarios.hpp"

using namespace pvdyn;

namespace {

Vec6 random6(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec6 v;
  for (int i = 0; i < 6; ++i) v(i) = n(rng);
  return v;
}

Vec3 random3(Rng& rng) { return random6(rng).head<3>(); }

SpatialTransform random_transform(Rng& rng) {
  const Vec3 axis = random3(rng).normalized();
  std::uniform_real_distribution<double> u(-M_PI, M_PI);
  return SpatialTransform(axis_angle(axis, u(rng)), random3(rng));
}

SpatialInertia random_inertia(Rng& rng) {
  std::uniform_real_distribution<double> u(0.5, 3.0);
  const Mat3 A = Mat3::Random();
  const Mat3 Ic = A * A.transpose() + 0.1 * Mat3::Identity();
  return SpatialInertia::FromMassComInertia(u(rng), random3(rng), Ic);
}

}  // namespace

TEST_SUITE("spatial") {

TEST_CASE("identity transform leaves motion unchanged") {
  Rng rng = testing::seeded(1);
  const Vec6 v = random6(rng);
  CHECK((SpatialTransform::Identity().apply_motion(v) - v).norm() == 0.0);
}

TEST_CASE("translation carries angular velocity into linear velocity") {
  const Vec3 d(0.3, -1.2, 0.7);
  const Vec3 w(0.5, 2.0, -1.0);
  const SpatialTransform X = SpatialTransform::FromTranslation(d);
  Vec6 v;
  v << w, Vec3::Zero();
  const Vec6 out = X.apply_motion(v);
  CHECK((out.head<3>() - w).norm() < 1e-15);
  CHECK((out.tail<3>() - w.cross(d)).norm() < 1e-14);

  // Brute-force 6x6 form: [E 0; -E [r]x  E].
  Mat6 brute = Mat6::Zero();
  brute.topLeftCorner<3, 3>() = X.rotation();
  brute.bottomRightCorner<3, 3>() = X.rotation();
  brute.bottomLeftCorner<3, 3>() = -X.rotation() * skew(d);
  CHECK((brute * v - out).norm() < 1e-14);
}

TEST_CASE("matrix forms agree with the compact operations") {
  Rng rng = testing::seeded(2);
  for (int trial = 0; trial < 20; ++trial) {
    const SpatialTransform X = random_transform(rng);
    const Vec6 m = random6(rng);
    const Vec6 f = random6(rng);
    CHECK((X.motion_matrix() * m - X.apply_motion(m)).norm() < 1e-12);
    CHECK((X.force_matrix() * f - X.apply_force(f)).norm() < 1e-12);
    CHECK((X.motion_matrix().transpose() * f - X.apply_transpose_force(f)).norm() < 1e-12);
    CHECK((X.force_matrix() - X.motion_matrix().inverse().transpose()).norm() < 1e-12);
    CHECK((X.inverse().apply_motion(X.apply_motion(m)) - m).norm() < 1e-12);
    CHECK((X.apply_inverse_motion(X.apply_motion(m)) - m).norm() < 1e-12);
  }
}

TEST_CASE("kinetic energy is frame invariant") {
  Rng rng = testing::seeded(3);
  for (int trial = 0; trial < 100; ++trial) {
    const SpatialTransform X = random_transform(rng);
    const SpatialInertia I = random_inertia(rng);
    const Vec6 v = random6(rng);
    const double here = 0.5 * v.dot(I * v);
    const Vec6 Xv = X.apply_motion(v);
    const double there = 0.5 * Xv.dot(X.apply(I) * Xv);
    CHECK(std::abs(here - there) < 1e-12 * std::max(1.0, std::abs(here)));
  }
}

TEST_CASE("congruence maps an inertia back to the source frame") {
  Rng rng = testing::seeded(4);
  const SpatialTransform X = random_transform(rng);
  const Mat6 H = random_inertia(rng).matrix();
  const Mat6 brute = X.motion_matrix().transpose() * H * X.motion_matrix();
  CHECK((X.congruence_to_source(H) - brute).norm() < 1e-12);
}

TEST_CASE("cross products") {
  Rng rng = testing::seeded(5);
  const Vec6 v = random6(rng);
  CHECK(cross_motion(v, v).norm() < 1e-15);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec6 a = random6(rng);
    const Vec6 m = random6(rng);
    const Vec6 f = random6(rng);
    CHECK(std::abs(cross_motion(a, m).dot(f) + m.dot(cross_force(a, f))) < 1e-12);
    CHECK((cross_motion_matrix(a) * m - cross_motion(a, m)).norm() < 1e-12);
    CHECK((cross_force_matrix(a) + cross_motion_matrix(a).transpose()).norm() < 1e-15);
  }
}

TEST_CASE("symmetric body spinning about a principal axis has no gyroscopic moment") {
  const SpatialInertia I(2.0, Vec3::Zero(), Vec3(0.3, 0.3, 0.5).asDiagonal());
  Vec6 v;
  v << 0, 0, 7.0, 0, 0, 0;
  const Vec6 bias = cross_force(v, I * v);
  CHECK(std::abs(bias(2)) < 1e-15);
  CHECK(bias.norm() < 1e-15);
}

TEST_CASE("composition is associative and preserves the motion-force pairing") {
  Rng rng = testing::seeded(6);
  std::vector<SpatialTransform> chain;
  for (int i = 0; i < 10; ++i) chain.push_back(random_transform(rng));
  SpatialTransform left;
  for (const auto& X : chain) left = left * X;
  SpatialTransform right;
  for (auto it = chain.rbegin(); it != chain.rend(); ++it) right = *it * right;
  CHECK((left.rotation() - right.rotation()).norm() < 1e-12);
  CHECK((left.translation() - right.translation()).norm() < 1e-12);

  const Vec6 m = random6(rng);
  const Vec6 f = random6(rng);
  CHECK(std::abs(left.apply_motion(m).dot(left.apply_force(f)) - m.dot(f)) < 1e-12);
  const Mat3 E = left.rotation();
  CHECK((E * E.transpose() - Mat3::Identity()).norm() < 1e-12);
  CHECK(std::abs(E.determinant() - 1.0) < 1e-12);
}

TEST_CASE("spatial inertia is symmetric positive definite") {
  Rng rng = testing::seeded(7);
  for (int trial = 0; trial < 20; ++trial) {
    const Mat6 H = random_inertia(rng).matrix();
    CHECK((H - H.transpose()).norm() < 1e-14);
    const Eigen::SelfAdjointEigenSolver<Mat6> eig(H);
    CHECK(eig.eigenvalues().minCoeff() > 0.0);
  }
  const SpatialInertia I(1.5, Vec3(0.1, 0.2, 0.3), Mat3::Identity());
  const Vec6 m = Vec6::LinSpaced(6, -1.0, 1.0);
  CHECK((I.matrix() * m - I * m).norm() < 1e-15);
}

TEST_CASE("roll-pitch-yaw round trip") {
  const Vec3 rpy(0.3, -0.7, 2.1);
  CHECK((matrix_to_rpy(rpy_to_matrix(rpy)) - rpy).norm() < 1e-12);
  const Vec3 rv(0.2, -0.4, 0.9);
  CHECK((rotation_log(axis_angle(rv.normalized(), rv.norm())) - rv).norm() < 1e-12);
}

}  // TEST_SUITE
