#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pvdyn/spatial.hpp"

namespace pvdyn {

enum class JointKind { Revolute, Prismatic, Floating };

const char* to_string(JointKind kind);

/// Joint connecting a link to its parent. The force subspace equals the
/// motion subspace for every supported kind (unit axes), so S^T T = 1.
struct Joint {
  JointKind kind = JointKind::Revolute;
  Vec3 axis = Vec3::UnitZ();
  /// Home pose of the joint frame in the parent link frame.
  Vec3 origin_xyz = Vec3::Zero();
  Vec3 origin_rpy = Vec3::Zero();

  int dof() const { return kind == JointKind::Floating ? 6 : 1; }
  /// Number of configuration coordinates (floating: position + unit quaternion).
  int config_size() const { return kind == JointKind::Floating ? 7 : 1; }

  /// ^{joint} X_{parent} at the home pose.
  SpatialTransform tree_transform() const;
  /// ^{link} X_{joint} for configuration coordinates q (size config_size()).
  SpatialTransform joint_transform(const double* q) const;
  /// Motion subspace column for single-dof joints, body frame.
  Vec6 axis_column() const;
};

/// 6 x dof motion subspace S of a joint.
MatX motion_subspace(const Joint& joint);

struct Link {
  std::string name;
  /// Parent link index, -1 for the world.
  int parent = -1;
  Joint joint;
  double mass = 1.0;
  Vec3 com = Vec3::Zero();
  /// Rotational inertia about the centre of mass, link frame.
  Mat3 inertia_com = Mat3::Identity();

  SpatialInertia spatial_inertia() const {
    return SpatialInertia::FromMassComInertia(mass, com, inertia_com);
  }
};

/// Topologically ordered kinematic tree (parent index < own index).
class RobotModel {
 public:
  RobotModel() = default;
  RobotModel(std::vector<Link> links, Vec3 gravity = Vec3(0.0, 0.0, -9.81));

  const std::vector<Link>& links() const { return links_; }
  const Link& link(int i) const { return links_[static_cast<std::size_t>(i)]; }
  int num_links() const { return static_cast<int>(links_.size()); }
  int parent(int i) const { return links_[static_cast<std::size_t>(i)].parent; }
  const std::vector<int>& children(int i) const { return children_[static_cast<std::size_t>(i)]; }
  /// Links attached directly to the world.
  const std::vector<int>& roots() const { return roots_; }

  /// Total degrees of freedom n.
  int dof() const { return nv_; }
  /// Size of the configuration vector q_p.
  int config_size() const { return nq_; }
  /// Longest root-to-leaf path, counted in links.
  int depth() const { return depth_; }
  int link_depth(int i) const { return depths_[static_cast<std::size_t>(i)]; }
  int v_index(int i) const { return v_idx_[static_cast<std::size_t>(i)]; }
  int q_index(int i) const { return q_idx_[static_cast<std::size_t>(i)]; }

  bool floating_base() const { return floating_; }
  /// Floating base link index (always 0 when floating_base()).
  int base_link() const { return 0; }

  const Vec3& gravity() const { return gravity_; }
  void set_gravity(const Vec3& g) { gravity_ = g; }
  /// Spatial gravity acceleration (0, g).
  Vec6 gravity_spatial() const {
    Vec6 a;
    a << 0.0, 0.0, 0.0, gravity_;
    return a;
  }

  const SpatialInertia& inertia(int i) const { return inertias_[static_cast<std::size_t>(i)]; }
  const SpatialTransform& tree_transform(int i) const { return trees_[static_cast<std::size_t>(i)]; }

  int find_link(const std::string& name) const;
  /// True when `ancestor` lies on the path from `link` to the world (inclusive).
  bool is_ancestor(int ancestor, int link) const;
  /// Dof-level parent array for tree-sparse factorizations: -1 marks the root.
  std::vector<int> dof_parents() const;

  /// Neutral configuration (zero angles, identity base orientation).
  VecX neutral_configuration() const;

  bool operator==(const RobotModel& o) const;

 private:
  std::vector<Link> links_;
  Vec3 gravity_ = Vec3(0.0, 0.0, -9.81);
  std::vector<std::vector<int>> children_;
  std::vector<int> roots_;
  std::vector<int> depths_, v_idx_, q_idx_;
  std::vector<SpatialInertia> inertias_;
  std::vector<SpatialTransform> trees_;
  int nv_ = 0, nq_ = 0, depth_ = 0;
  bool floating_ = false;
};

/// Acceleration constraint K a = k on one link. K rows act on the link's
/// spatial acceleration expressed in a world-aligned frame at the link origin.
struct ConstraintEntry {
  int link = 0;
  MatX6 K;
  VecX k;
  /// Soft-constraint penalty weights (the diagonal of R^{-1}), one per row.
  std::optional<VecX> soft_weight;

  int rows() const { return static_cast<int>(K.rows()); }
};

class ConstraintSet {
 public:
  ConstraintSet() = default;
  explicit ConstraintSet(std::vector<ConstraintEntry> entries);

  void add(ConstraintEntry entry);
  const std::vector<ConstraintEntry>& entries() const { return entries_; }
  std::vector<ConstraintEntry>& entries() { return entries_; }
  bool empty() const { return entries_.empty(); }
  /// Total number of rows m.
  int rows() const;
  /// First global row of entry e (user ordering).
  int row_offset(std::size_t e) const;
  bool has_soft_weights() const;
  bool all_soft() const;

  /// Scales every row of K to unit norm and scales k identically.
  void normalize();
  /// Stacked k in user ordering.
  VecX stacked_targets() const;
  /// Copy with every row given the same penalty weight.
  ConstraintSet with_uniform_weight(double weight) const;
  /// Copy with penalty weights removed.
  ConstraintSet hard() const;

  void validate(const RobotModel& model) const;

 private:
  std::vector<ConstraintEntry> entries_;
};

/// Joint-space state plus input channels.
struct RobotState {
  VecX q;    ///< configuration, size model.config_size()
  VecX qd;   ///< generalized velocity, size model.dof()
  VecX tau;  ///< generalized force, size model.dof()
  /// External wrench on each link, link frame. Empty means none.
  std::vector<SpatialForce> f_ext;

  static RobotState Zero(const RobotModel& model);
  void validate(const RobotModel& model) const;
};

/// Rotation matrix of a unit quaternion stored (w, x, y, z).
Mat3 quaternion_to_matrix(const double* wxyz);

/// Position-level constraint whose error can be measured, used by the
/// simulator to build stabilized acceleration targets.
struct AnchoredConstraint {
  enum class Family { WorldPoint, WorldWeld };
  Family family = Family::WorldPoint;
  int link = 0;
  /// Constrained point in link coordinates (world-point only).
  Vec3 point = Vec3::Zero();
  /// World anchor; captured from the initial state when absent.
  std::optional<Vec3> anchor;
  std::optional<Mat3> anchor_rotation;
  /// World directions constrained by a world-point constraint; all three when empty.
  std::vector<Vec3> axes;
  std::optional<double> soft_weight;

  int rows() const {
    if (family == Family::WorldWeld) return 6;
    return axes.empty() ? 3 : static_cast<int>(axes.size());
  }
};

}  // namespace pvdyn
