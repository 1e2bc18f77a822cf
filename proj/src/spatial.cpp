#include "pvdyn/spatial.hpp"

#include <algorithm>
#include <cmath>

namespace pvdyn {

Mat6 cross_motion_matrix(const Vec6& v) {
  const Mat3 w = skew(v.head<3>());
  Mat6 m = Mat6::Zero();
  m.topLeftCorner<3, 3>() = w;
  m.bottomLeftCorner<3, 3>() = skew(v.tail<3>());
  m.bottomRightCorner<3, 3>() = w;
  return m;
}

Mat6 cross_force_matrix(const Vec6& v) { return -cross_motion_matrix(v).transpose(); }

Mat6 SpatialTransform::motion_matrix() const {
  Mat6 X = Mat6::Zero();
  X.topLeftCorner<3, 3>() = E_;
  X.bottomLeftCorner<3, 3>() = -E_ * skew(r_);
  X.bottomRightCorner<3, 3>() = E_;
  return X;
}

Mat6 SpatialTransform::force_matrix() const {
  Mat6 X = Mat6::Zero();
  X.topLeftCorner<3, 3>() = E_;
  X.topRightCorner<3, 3>() = -E_ * skew(r_);
  X.bottomRightCorner<3, 3>() = E_;
  return X;
}

Mat6 SpatialTransform::congruence_to_source(const Mat6& H) const {
  // Column-by-column: X^T (H X). Both factors applied with the structured
  // transform instead of dense 6x6 products.
  Mat6 HX;
  for (int c = 0; c < 6; ++c) {
    HX.col(c) = H * apply_motion(Vec6::Unit(c));
  }
  Mat6 out;
  for (int c = 0; c < 6; ++c) {
    out.col(c) = apply_transpose_force(HX.col(c));
  }
  return out;
}

SpatialInertia SpatialTransform::apply(const SpatialInertia& I) const {
  const double m = I.mass();
  const Vec3 h_shift = I.first_moment() - m * r_;
  const Mat3 Ibar = I.rotational() + skew(r_) * skew(I.first_moment()) + skew(h_shift) * skew(r_);
  return {m, E_ * h_shift, E_ * Ibar * E_.transpose()};
}

SpatialInertia SpatialInertia::FromMassComInertia(double mass, const Vec3& com, const Mat3& Icom) {
  const Mat3 cx = skew(com);
  return {mass, mass * com, Icom - mass * cx * cx};
}

Mat6 SpatialInertia::matrix() const {
  Mat6 M;
  const Mat3 hx = skew(h_);
  M.topLeftCorner<3, 3>() = Ibar_;
  M.topRightCorner<3, 3>() = hx;
  M.bottomLeftCorner<3, 3>() = hx.transpose();
  M.bottomRightCorner<3, 3>() = mass_ * Mat3::Identity();
  return M;
}

Mat3 axis_angle(const Vec3& axis, double angle) {
  return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

Mat3 rpy_to_matrix(const Vec3& rpy) {
  return (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
          Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
      .toRotationMatrix();
}

Vec3 matrix_to_rpy(const Mat3& R) {
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  const double roll = std::atan2(R(2, 1), R(2, 2));
  const double yaw = std::atan2(R(1, 0), R(0, 0));
  return {roll, pitch, yaw};
}

Vec3 rotation_log(const Mat3& R) {
  const Eigen::AngleAxisd aa(R);
  return aa.axis() * aa.angle();
}

}  // namespace pvdyn
