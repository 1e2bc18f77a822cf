#include "pvdyn/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "pvdyn/errors.hpp"

namespace pvdyn {

const char* to_string(JointKind kind) {
  switch (kind) {
    case JointKind::Revolute: return "revolute";
    case JointKind::Prismatic: return "prismatic";
    case JointKind::Floating: return "floating";
  }
  return "unknown";
}

Mat3 quaternion_to_matrix(const double* wxyz) {
  Eigen::Quaterniond q(wxyz[0], wxyz[1], wxyz[2], wxyz[3]);
  return q.normalized().toRotationMatrix();
}

SpatialTransform Joint::tree_transform() const {
  return SpatialTransform::FromPose(rpy_to_matrix(origin_rpy), origin_xyz);
}

SpatialTransform Joint::joint_transform(const double* q) const {
  switch (kind) {
    case JointKind::Revolute:
      return SpatialTransform::FromRotation(axis_angle(axis, q[0]));
    case JointKind::Prismatic:
      return SpatialTransform::FromTranslation(axis * q[0]);
    case JointKind::Floating:
      return SpatialTransform::FromPose(quaternion_to_matrix(q + 3), Vec3(q[0], q[1], q[2]));
  }
  return {};
}

Vec6 Joint::axis_column() const {
  Vec6 s = Vec6::Zero();
  if (kind == JointKind::Revolute) {
    s.head<3>() = axis;
  } else if (kind == JointKind::Prismatic) {
    s.tail<3>() = axis;
  }
  return s;
}

MatX motion_subspace(const Joint& joint) {
  if (joint.kind == JointKind::Floating) return Mat6::Identity();
  return joint.axis_column();
}

RobotModel::RobotModel(std::vector<Link> links, Vec3 gravity)
    : links_(std::move(links)), gravity_(std::move(gravity)) {
  const int n = num_links();
  children_.assign(static_cast<std::size_t>(n), {});
  depths_.assign(static_cast<std::size_t>(n), 0);
  v_idx_.assign(static_cast<std::size_t>(n), 0);
  q_idx_.assign(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const Link& l = links_[static_cast<std::size_t>(i)];
    if (l.parent >= i || l.parent < -1) {
      std::ostringstream os;
      os << "link " << i << " ('" << l.name << "') has parent " << l.parent
         << "; links must be topologically ordered (parent index < own index)";
      throw ModelError(os.str());
    }
    if (!(l.mass > 0.0) || !std::isfinite(l.mass)) {
      throw ModelError("link '" + l.name + "' has nonpositive mass");
    }
    if (l.joint.kind != JointKind::Floating) {
      const double norm = l.joint.axis.norm();
      if (std::abs(norm - 1.0) > 1e-10) {
        throw ModelError("joint axis of link '" + l.name + "' is not unit length");
      }
    } else if (i != 0 || l.parent != -1) {
      throw ModelError("only link 0, attached to the world, may carry a floating joint");
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> es(0.5 * (l.inertia_com + l.inertia_com.transpose()));
    if (es.eigenvalues().minCoeff() <= 0.0 ||
        (l.inertia_com - l.inertia_com.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
      throw ModelError("link '" + l.name + "' rotational inertia is not symmetric positive definite");
    }
    if (l.parent < 0) {
      roots_.push_back(i);
      depths_[static_cast<std::size_t>(i)] = 1;
    } else {
      children_[static_cast<std::size_t>(l.parent)].push_back(i);
      depths_[static_cast<std::size_t>(i)] = depths_[static_cast<std::size_t>(l.parent)] + 1;
    }
    depth_ = std::max(depth_, depths_[static_cast<std::size_t>(i)]);
    v_idx_[static_cast<std::size_t>(i)] = nv_;
    q_idx_[static_cast<std::size_t>(i)] = nq_;
    nv_ += l.joint.dof();
    nq_ += l.joint.config_size();
    inertias_.push_back(l.spatial_inertia());
    trees_.push_back(l.joint.tree_transform());
  }
  floating_ = n > 0 && links_[0].joint.kind == JointKind::Floating;
}

int RobotModel::find_link(const std::string& name) const {
  for (int i = 0; i < num_links(); ++i) {
    if (links_[static_cast<std::size_t>(i)].name == name) return i;
  }
  return -1;
}

bool RobotModel::is_ancestor(int ancestor, int link) const {
  for (int j = link; j >= 0; j = parent(j)) {
    if (j == ancestor) return true;
  }
  return false;
}

std::vector<int> RobotModel::dof_parents() const {
  std::vector<int> out(static_cast<std::size_t>(nv_), -1);
  for (int i = 0; i < num_links(); ++i) {
    const int p = parent(i);
    int prev = p < 0 ? -1 : v_index(p) + link(p).joint.dof() - 1;
    for (int d = 0; d < link(i).joint.dof(); ++d) {
      out[static_cast<std::size_t>(v_index(i) + d)] = prev;
      prev = v_index(i) + d;
    }
  }
  return out;
}

VecX RobotModel::neutral_configuration() const {
  VecX q = VecX::Zero(nq_);
  if (floating_) q(3) = 1.0;
  return q;
}

bool RobotModel::operator==(const RobotModel& o) const {
  if (num_links() != o.num_links() || gravity_ != o.gravity_) return false;
  for (int i = 0; i < num_links(); ++i) {
    const Link& a = link(i);
    const Link& b = o.link(i);
    if (a.name != b.name || a.parent != b.parent || a.joint.kind != b.joint.kind ||
        a.joint.axis != b.joint.axis || a.joint.origin_xyz != b.joint.origin_xyz ||
        a.joint.origin_rpy != b.joint.origin_rpy || a.mass != b.mass || a.com != b.com ||
        a.inertia_com != b.inertia_com) {
      return false;
    }
  }
  return true;
}

ConstraintSet::ConstraintSet(std::vector<ConstraintEntry> entries) : entries_(std::move(entries)) {}

void ConstraintSet::add(ConstraintEntry entry) { entries_.push_back(std::move(entry)); }

int ConstraintSet::rows() const {
  int m = 0;
  for (const auto& e : entries_) m += e.rows();
  return m;
}

int ConstraintSet::row_offset(std::size_t e) const {
  int m = 0;
  for (std::size_t i = 0; i < e; ++i) m += entries_[i].rows();
  return m;
}

bool ConstraintSet::has_soft_weights() const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [](const ConstraintEntry& e) { return e.soft_weight.has_value(); });
}

bool ConstraintSet::all_soft() const {
  return std::all_of(entries_.begin(), entries_.end(),
                     [](const ConstraintEntry& e) { return e.soft_weight.has_value(); });
}

void ConstraintSet::normalize() {
  for (auto& e : entries_) {
    for (Eigen::Index r = 0; r < e.K.rows(); ++r) {
      const double norm = e.K.row(r).norm();
      if (!(norm > 0.0)) throw ModelError("constraint row with zero norm on link " + std::to_string(e.link));
      e.K.row(r) /= norm;
      e.k(r) /= norm;
    }
  }
}

VecX ConstraintSet::stacked_targets() const {
  VecX k(rows());
  int off = 0;
  for (const auto& e : entries_) {
    k.segment(off, e.rows()) = e.k;
    off += e.rows();
  }
  return k;
}

ConstraintSet ConstraintSet::with_uniform_weight(double weight) const {
  ConstraintSet out = *this;
  for (auto& e : out.entries_) e.soft_weight = VecX::Constant(e.rows(), weight);
  return out;
}

ConstraintSet ConstraintSet::hard() const {
  ConstraintSet out = *this;
  for (auto& e : out.entries_) e.soft_weight.reset();
  return out;
}

void ConstraintSet::validate(const RobotModel& model) const {
  for (const auto& e : entries_) {
    if (e.link < 0 || e.link >= model.num_links()) {
      throw ModelError("constraint references unknown link " + std::to_string(e.link));
    }
    if (e.k.size() != e.K.rows()) {
      throw ModelError("constraint on link " + std::to_string(e.link) + ": K and k row counts differ");
    }
    if (e.soft_weight) {
      if (e.soft_weight->size() != e.K.rows()) {
        throw ModelError("constraint on link " + std::to_string(e.link) + ": soft_weight size mismatch");
      }
      if (!(e.soft_weight->array() > 0.0).all()) {
        throw ModelError("constraint on link " + std::to_string(e.link) + ": soft weights must be positive");
      }
    }
  }
}

RobotState RobotState::Zero(const RobotModel& model) {
  RobotState s;
  s.q = model.neutral_configuration();
  s.qd = VecX::Zero(model.dof());
  s.tau = VecX::Zero(model.dof());
  return s;
}

void RobotState::validate(const RobotModel& model) const {
  if (q.size() != model.config_size() || qd.size() != model.dof() || tau.size() != model.dof()) {
    std::ostringstream os;
    os << "state dimensions (q " << q.size() << ", qd " << qd.size() << ", tau " << tau.size()
       << ") do not match model (nq " << model.config_size() << ", nv " << model.dof() << ")";
    throw ModelError(os.str());
  }
  if (!f_ext.empty() && static_cast<int>(f_ext.size()) != model.num_links()) {
    throw ModelError("f_ext must be empty or hold one wrench per link");
  }
}

}  // namespace pvdyn
