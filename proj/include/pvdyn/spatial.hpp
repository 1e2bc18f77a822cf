#pragma once

// Spatial (6D) vector algebra.
//
// Component ordering is angular-on-top everywhere in this library:
//   motion vector  = (omega, v)   force vector = (n, f)
// A SpatialTransform ^B X_A maps coordinates of frame A into frame B. It is
// stored as (E, r): E rotates A-coordinates into B-coordinates and r is the
// origin of B expressed in A-coordinates, i.e. the 6x6 motion matrix is
//   [ E        0 ]
//   [ -E r^    E ]

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace pvdyn {

using Vec3 = Eigen::Vector3d;
using Vec6 = Eigen::Matrix<double, 6, 1>;
using Mat3 = Eigen::Matrix3d;
using Mat6 = Eigen::Matrix<double, 6, 6>;
using MatX = Eigen::MatrixXd;
using VecX = Eigen::VectorXd;
using MatX6 = Eigen::Matrix<double, Eigen::Dynamic, 6>;

/// Skew-symmetric matrix with skew(a) * b == a.cross(b).
inline Mat3 skew(const Vec3& a) {
  Mat3 m;
  m << 0.0, -a.z(), a.y(),
       a.z(), 0.0, -a.x(),
       -a.y(), a.x(), 0.0;
  return m;
}

class SpatialForce;

/// 6D motion vector (velocity or acceleration), angular part first.
class SpatialMotion {
 public:
  SpatialMotion() : v_(Vec6::Zero()) {}
  SpatialMotion(const Vec3& angular, const Vec3& linear) {
    v_ << angular, linear;
  }
  explicit SpatialMotion(const Vec6& v) : v_(v) {}

  static SpatialMotion Zero() { return SpatialMotion(); }

  auto angular() const { return v_.head<3>(); }
  auto linear() const { return v_.tail<3>(); }
  auto angular() { return v_.head<3>(); }
  auto linear() { return v_.tail<3>(); }
  const Vec6& vec() const { return v_; }
  Vec6& vec() { return v_; }

  SpatialMotion operator+(const SpatialMotion& o) const { return SpatialMotion(Vec6(v_ + o.v_)); }
  SpatialMotion operator-(const SpatialMotion& o) const { return SpatialMotion(Vec6(v_ - o.v_)); }
  SpatialMotion operator-() const { return SpatialMotion(Vec6(-v_)); }
  SpatialMotion operator*(double s) const { return SpatialMotion(Vec6(v_ * s)); }
  SpatialMotion& operator+=(const SpatialMotion& o) { v_ += o.v_; return *this; }

  /// Power pairing with a force vector.
  double dot(const SpatialForce& f) const;

 private:
  Vec6 v_;
};

/// 6D force vector (moment, force).
class SpatialForce {
 public:
  SpatialForce() : f_(Vec6::Zero()) {}
  SpatialForce(const Vec3& moment, const Vec3& force) { f_ << moment, force; }
  explicit SpatialForce(const Vec6& f) : f_(f) {}

  static SpatialForce Zero() { return SpatialForce(); }

  auto moment() const { return f_.head<3>(); }
  auto force() const { return f_.tail<3>(); }
  const Vec6& vec() const { return f_; }
  Vec6& vec() { return f_; }

  SpatialForce operator+(const SpatialForce& o) const { return SpatialForce(Vec6(f_ + o.f_)); }
  SpatialForce operator-(const SpatialForce& o) const { return SpatialForce(Vec6(f_ - o.f_)); }
  SpatialForce operator-() const { return SpatialForce(Vec6(-f_)); }
  SpatialForce operator*(double s) const { return SpatialForce(Vec6(f_ * s)); }
  SpatialForce& operator+=(const SpatialForce& o) { f_ += o.f_; return *this; }

  double dot(const SpatialMotion& m) const { return f_.dot(m.vec()); }

 private:
  Vec6 f_;
};

inline double SpatialMotion::dot(const SpatialForce& f) const { return v_.dot(f.vec()); }

/// v x m (motion cross product).
inline Vec6 cross_motion(const Vec6& v, const Vec6& m) {
  const auto w = v.head<3>();
  const auto vl = v.tail<3>();
  const auto mw = m.head<3>();
  const auto ml = m.tail<3>();
  Vec6 out;
  out << w.cross(mw), w.cross(ml) + vl.cross(mw);
  return out;
}

/// v x* f (force cross product), the negative transpose dual of cross_motion.
inline Vec6 cross_force(const Vec6& v, const Vec6& f) {
  const auto w = v.head<3>();
  const auto vl = v.tail<3>();
  const auto n = f.head<3>();
  const auto fl = f.tail<3>();
  Vec6 out;
  out << w.cross(n) + vl.cross(fl), w.cross(fl);
  return out;
}

inline SpatialMotion cross_motion(const SpatialMotion& v, const SpatialMotion& m) {
  return SpatialMotion(cross_motion(v.vec(), m.vec()));
}
inline SpatialForce cross_force(const SpatialMotion& v, const SpatialForce& f) {
  return SpatialForce(cross_force(v.vec(), f.vec()));
}

/// 6x6 matrix of the operator m -> v x m.
Mat6 cross_motion_matrix(const Vec6& v);
/// 6x6 matrix of the operator f -> v x* f.
Mat6 cross_force_matrix(const Vec6& v);

class SpatialInertia;

/// Rigid transform ^B X_A in (E, r) form, see the header comment.
class SpatialTransform {
 public:
  SpatialTransform() : E_(Mat3::Identity()), r_(Vec3::Zero()) {}
  SpatialTransform(const Mat3& rotation, const Vec3& translation)
      : E_(rotation), r_(translation) {}

  static SpatialTransform Identity() { return {}; }
  /// Frame B is frame A rotated by R (B axes expressed in A are R's columns).
  static SpatialTransform FromRotation(const Mat3& R) { return {R.transpose(), Vec3::Zero()}; }
  static SpatialTransform FromTranslation(const Vec3& r) { return {Mat3::Identity(), r}; }
  /// Frame B has orientation R and origin p relative to frame A.
  static SpatialTransform FromPose(const Mat3& R, const Vec3& p) { return {R.transpose(), p}; }

  const Mat3& rotation() const { return E_; }
  const Vec3& translation() const { return r_; }

  Vec6 apply_motion(const Vec6& m) const {
    Vec6 out;
    out.head<3>().noalias() = E_ * m.head<3>();
    out.tail<3>().noalias() = E_ * (m.tail<3>() - r_.cross(m.head<3>()));
    return out;
  }
  Vec6 apply_force(const Vec6& f) const {
    Vec6 out;
    out.head<3>().noalias() = E_ * (f.head<3>() - r_.cross(f.tail<3>()));
    out.tail<3>().noalias() = E_ * f.tail<3>();
    return out;
  }
  /// X^T f: carries a force from frame B back to frame A.
  Vec6 apply_transpose_force(const Vec6& f) const {
    Vec6 out;
    const Vec3 fl = E_.transpose() * f.tail<3>();
    out.head<3>() = E_.transpose() * f.head<3>() + r_.cross(fl);
    out.tail<3>() = fl;
    return out;
  }
  /// X^{-1} m: carries a motion from frame B back to frame A.
  Vec6 apply_inverse_motion(const Vec6& m) const {
    Vec6 out;
    const Vec3 w = E_.transpose() * m.head<3>();
    out.head<3>() = w;
    out.tail<3>() = E_.transpose() * m.tail<3>() + r_.cross(w);
    return out;
  }

  SpatialMotion apply(const SpatialMotion& m) const { return SpatialMotion(apply_motion(m.vec())); }
  SpatialForce apply(const SpatialForce& f) const { return SpatialForce(apply_force(f.vec())); }
  SpatialInertia apply(const SpatialInertia& I) const;

  /// Composition: (*this) * other == ^C X_A when *this == ^C X_B, other == ^B X_A.
  SpatialTransform operator*(const SpatialTransform& other) const {
    return {E_ * other.E_, other.r_ + other.E_.transpose() * r_};
  }
  SpatialTransform inverse() const { return {E_.transpose(), -E_ * r_}; }

  Mat6 motion_matrix() const;
  Mat6 force_matrix() const;

  /// X^T H X for a 6x6 symmetric matrix H given in frame B; result in frame A.
  Mat6 congruence_to_source(const Mat6& H) const;

 private:
  Mat3 E_;
  Vec3 r_;
};

/// Rigid-body inertia in compact form about the frame origin:
/// mass m, first moment h = m c, rotational inertia Ibar about the origin.
class SpatialInertia {
 public:
  SpatialInertia() : mass_(0.0), h_(Vec3::Zero()), Ibar_(Mat3::Zero()) {}
  SpatialInertia(double mass, const Vec3& first_moment, const Mat3& rotational_about_origin)
      : mass_(mass), h_(first_moment), Ibar_(rotational_about_origin) {}

  /// From mass, centre of mass c and rotational inertia about the centre of mass.
  static SpatialInertia FromMassComInertia(double mass, const Vec3& com, const Mat3& Icom);

  double mass() const { return mass_; }
  const Vec3& first_moment() const { return h_; }
  const Mat3& rotational() const { return Ibar_; }
  Vec3 com() const { return h_ / mass_; }

  Mat6 matrix() const;
  Vec6 operator*(const Vec6& m) const {
    Vec6 out;
    out.head<3>() = Ibar_ * m.head<3>() + h_.cross(m.tail<3>());
    out.tail<3>() = mass_ * m.tail<3>() - h_.cross(m.head<3>());
    return out;
  }
  SpatialForce operator*(const SpatialMotion& m) const { return SpatialForce((*this) * m.vec()); }

  SpatialInertia operator+(const SpatialInertia& o) const {
    return {mass_ + o.mass_, h_ + o.h_, Ibar_ + o.Ibar_};
  }

 private:
  double mass_;
  Vec3 h_;
  Mat3 Ibar_;
};

/// Rotation matrix for a rotation of `angle` about unit `axis`.
Mat3 axis_angle(const Vec3& axis, double angle);
/// Fixed-axis roll/pitch/yaw: Rz(yaw) * Ry(pitch) * Rx(roll).
Mat3 rpy_to_matrix(const Vec3& rpy);
/// Inverse of rpy_to_matrix (yaw/pitch/roll extraction).
Vec3 matrix_to_rpy(const Mat3& R);
/// Rotation vector (axis * angle) of R, angle in [0, pi].
Vec3 rotation_log(const Mat3& R);

}  // namespace pvdyn
