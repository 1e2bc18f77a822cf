#include "pvdyn/generators.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "pvdyn/baseline.hpp"
#include "pvdyn/errors.hpp"
#include "pvdyn/kinematics.hpp"

namespace pvdyn {

namespace {

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-3);
  return v.normalized();
}

Vec3 random_box(Rng& rng, double half) {
  return {uniform(rng, -half, half), uniform(rng, -half, half), uniform(rng, -half, half)};
}

/// Physically valid rotational inertia: random principal moments that
/// satisfy the triangle inequality, in a random orientation.
Mat3 random_inertia(Rng& rng, double scale) {
  const double a = uniform(rng, 0.5, 1.0) * scale;
  const double b = uniform(rng, 0.5, 1.0) * scale;
  const double c = uniform(rng, std::abs(a - b) + 0.05 * scale, a + b);
  const Mat3 R = axis_angle(random_unit(rng), uniform(rng, -M_PI, M_PI));
  const Mat3 I = R * Vec3(a, b, c).asDiagonal() * R.transpose();
  return 0.5 * (I + I.transpose());
}

Link random_link(Rng& rng, const std::string& name, int parent, bool allow_prismatic) {
  Link l;
  l.name = name;
  l.parent = parent;
  l.joint.kind = (allow_prismatic && uniform(rng, 0.0, 1.0) < 0.15) ? JointKind::Prismatic
                                                                     : JointKind::Revolute;
  l.joint.axis = random_unit(rng);
  l.joint.origin_xyz = parent < 0 ? Vec3::Zero() : Vec3(random_unit(rng) * uniform(rng, 0.15, 0.35));
  l.joint.origin_rpy = random_box(rng, 0.5);
  l.mass = uniform(rng, 0.5, 2.0);
  l.com = random_box(rng, 0.1);
  l.inertia_com = random_inertia(rng, 0.02);
  return l;
}

Link floating_base(double mass = 8.0) {
  Link base;
  base.name = "base";
  base.parent = -1;
  base.joint.kind = JointKind::Floating;
  base.mass = mass;
  base.inertia_com = Vec3(0.1, 0.25, 0.3).asDiagonal();
  return base;
}

Link simple_link(const std::string& name, int parent, const Vec3& axis, const Vec3& xyz, double mass,
                 const Vec3& com, double inertia) {
  Link l;
  l.name = name;
  l.parent = parent;
  l.joint.kind = JointKind::Revolute;
  l.joint.axis = axis;
  l.joint.origin_xyz = xyz;
  l.mass = mass;
  l.com = com;
  l.inertia_com = Mat3::Identity() * inertia;
  return l;
}

MatX6 random_rows(Rng& rng, int rows) {
  std::normal_distribution<double> n(0.0, 1.0);
  MatX6 K(rows, 6);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < 6; ++c) K(r, c) = n(rng);
    K.row(r).normalize();
  }
  return K;
}

VecX random_targets(Rng& rng, int rows) {
  VecX k(rows);
  for (int r = 0; r < rows; ++r) k(r) = uniform(rng, -2.0, 2.0);
  return k;
}

std::vector<int> leaves(const RobotModel& model) {
  std::vector<int> out;
  for (int i = 0; i < model.num_links(); ++i) {
    if (model.children(i).empty() && !(model.floating_base() && i == 0)) out.push_back(i);
  }
  return out;
}

ConstraintSet random_constraint_set(Family family, const RobotModel& model, const RobotState& state,
                                    Rng& rng) {
  ConstraintSet cs;
  auto add = [&](int link, MatX6 K) {
    ConstraintEntry e;
    e.link = link;
    e.k = random_targets(rng, static_cast<int>(K.rows()));
    e.K = std::move(K);
    cs.add(std::move(e));
  };
  const std::vector<int> tips = leaves(model);
  switch (family) {
    case Family::Chain: {
      const int n = model.num_links();
      const int tip_rows = uniform_int(rng, 1, std::min(6, n));
      add(n - 1, random_rows(rng, tip_rows));
      if (n - tip_rows >= 3 && uniform(rng, 0.0, 1.0) < 0.5) {
        const int mid = uniform_int(rng, 1, n - 2);
        add(mid, random_rows(rng, uniform_int(rng, 1, std::min(2, mid))));
      }
      break;
    }
    case Family::Tree: {
      const int count = uniform_int(rng, 1, std::min<int>(3, static_cast<int>(tips.size())));
      for (int c = 0; c < count; ++c) {
        const int leaf = tips[static_cast<std::size_t>(c)];
        add(leaf, random_rows(rng, uniform_int(rng, 1, std::min(3, model.link_depth(leaf)))));
      }
      break;
    }
    case Family::Branched: {
      for (int leaf : tips) {
        if (uniform(rng, 0.0, 1.0) < 0.8) {
          add(leaf, random_rows(rng, uniform_int(rng, 1, std::min(3, model.link_depth(leaf) - 1))));
        }
      }
      if (cs.empty() || uniform(rng, 0.0, 1.0) < 0.25) add(0, random_rows(rng, uniform_int(rng, 1, 3)));
      break;
    }
    case Family::Ladder: {
      for (int leaf : tips) {
        MatX6 K = MatX6::Identity(6, 6);
        add(leaf, std::move(K));
      }
      break;
    }
  }
  (void)state;
  return cs;
}

}  // namespace

double dual_condition(const RobotModel& model, const RobotState& state, const ConstraintSet& cs) {
  const JointSpaceModel js = joint_space_model(model, state, cs);
  const MatX A = js.J * js.M.ldlt().solve(js.J.transpose());
  const Eigen::SelfAdjointEigenSolver<MatX> es(A);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!(lo > 0.0)) return std::numeric_limits<double>::infinity();
  return hi / lo;
}


RobotModel make_pendulum(double mass, double length) {
  std::vector<Link> links;
  links.push_back(simple_link("bob", -1, Vec3::UnitY(), Vec3::Zero(), mass, Vec3(0, 0, -length), 1e-6));
  return RobotModel(std::move(links));
}

RobotModel make_double_pendulum(double mass, double length) {
  std::vector<Link> links;
  links.push_back(simple_link("upper", -1, Vec3::UnitY(), Vec3::Zero(), mass, Vec3(0, 0, -length), 1e-6));
  links.push_back(
      simple_link("lower", 0, Vec3::UnitY(), Vec3(0, 0, -length), mass, Vec3(0, 0, -length), 1e-6));
  return RobotModel(std::move(links));
}

RobotModel make_planar_arm(int links_count, double length) {
  if (links_count < 1) throw ModelError("planar arm needs at least one link");
  std::vector<Link> links;
  for (int i = 0; i < links_count; ++i) {
    const Vec3 xyz = i == 0 ? Vec3::Zero() : Vec3(length, 0, 0);
    links.push_back(simple_link("arm" + std::to_string(i), i - 1, Vec3::UnitY(), xyz, 1.0,
                                Vec3(0.5 * length, 0, 0), 0.01));
  }
  return RobotModel(std::move(links));
}

RobotModel make_chain(int n, Rng& rng) {
  if (n < 1) throw ModelError("chain needs at least one link");
  std::vector<Link> links;
  for (int i = 0; i < n; ++i) links.push_back(random_link(rng, "link" + std::to_string(i), i - 1, true));
  return RobotModel(std::move(links));
}

RobotModel make_random_tree(int n, int max_depth, Rng& rng) {
  if (n < 1 || max_depth < 1) throw ModelError("tree needs n >= 1 and depth >= 1");
  std::vector<Link> links;
  std::vector<int> depth;
  for (int i = 0; i < n; ++i) {
    int parent = -1;
    if (i > 0) {
      do {
        parent = uniform_int(rng, 0, i - 1);
      } while (depth[static_cast<std::size_t>(parent)] >= max_depth);
    }
    depth.push_back(parent < 0 ? 1 : depth[static_cast<std::size_t>(parent)] + 1);
    links.push_back(random_link(rng, "link" + std::to_string(i), parent, true));
  }
  return RobotModel(std::move(links));
}

RobotModel make_branched(int branches, int depth, Rng& rng) {
  if (branches < 1 || depth < 1) throw ModelError("branched model needs branches >= 1 and depth >= 1");
  std::vector<Link> links;
  links.push_back(floating_base());
  for (int b = 0; b < branches; ++b) {
    const double angle = 2.0 * M_PI * b / branches;
    for (int d = 0; d < depth; ++d) {
      const int parent = d == 0 ? 0 : static_cast<int>(links.size()) - 1;
      Link l = random_link(rng, "b" + std::to_string(b) + "_" + std::to_string(d), parent, false);
      if (d == 0) l.joint.origin_xyz = Vec3(0.3 * std::cos(angle), 0.3 * std::sin(angle), 0.0);
      links.push_back(std::move(l));
    }
  }
  return RobotModel(std::move(links));
}

RobotModel make_quadruped() {
  std::vector<Link> links;
  links.push_back(floating_base(10.0));
  const char* names[] = {"fl", "fr", "hl", "hr"};
  const double sx[] = {1, 1, -1, -1};
  const double sy[] = {1, -1, 1, -1};
  for (int leg = 0; leg < 4; ++leg) {
    const std::string n = names[leg];
    const int hip = static_cast<int>(links.size());
    links.push_back(simple_link(n + "_hip", 0, Vec3::UnitX(), Vec3(0.3 * sx[leg], 0.15 * sy[leg], 0.0),
                                0.8, Vec3(0, 0.03 * sy[leg], 0), 0.002));
    links.push_back(simple_link(n + "_thigh", hip, Vec3::UnitY(), Vec3(0, 0.06 * sy[leg], 0), 1.0,
                                Vec3(0, 0, -0.12), 0.005));
    links.push_back(simple_link(n + "_calf", hip + 1, Vec3::UnitY(), Vec3(0, 0, -0.25), 0.4,
                                Vec3(0, 0, -0.12), 0.002));
  }
  return RobotModel(std::move(links));
}

RobotModel make_ladder(int rungs, Rng& rng) {
  if (rungs < 1) throw ModelError("ladder needs at least one rung");
  std::vector<Link> links;
  int spine_tip = -1;
  for (int r = 0; r < rungs; ++r) {
    for (int s = 0; s < 3; ++s) {
      links.push_back(random_link(rng, "spine" + std::to_string(3 * r + s), spine_tip, false));
      spine_tip = static_cast<int>(links.size()) - 1;
    }
    int parent = spine_tip;
    for (int j = 0; j < 7; ++j) {
      links.push_back(random_link(rng, "rung" + std::to_string(r) + "_" + std::to_string(j), parent, false));
      parent = static_cast<int>(links.size()) - 1;
    }
  }
  return RobotModel(std::move(links));
}

RobotState random_state(const RobotModel& model, Rng& rng, bool with_ext) {
  RobotState s = RobotState::Zero(model);
  for (int i = 0; i < model.num_links(); ++i) {
    const Joint& j = model.link(i).joint;
    const int qi = model.q_index(i);
    if (j.kind == JointKind::Floating) {
      s.q.segment<3>(qi) = random_box(rng, 1.0);
      std::normal_distribution<double> n(0.0, 1.0);
      Eigen::Vector4d quat(n(rng), n(rng), n(rng), n(rng));
      s.q.segment<4>(qi + 3) = quat.normalized();
    } else if (j.kind == JointKind::Prismatic) {
      s.q(qi) = uniform(rng, -0.3, 0.3);
    } else {
      s.q(qi) = uniform(rng, -M_PI, M_PI);
    }
  }
  for (int v = 0; v < model.dof(); ++v) {
    s.qd(v) = uniform(rng, -1.0, 1.0);
    s.tau(v) = uniform(rng, -2.0, 2.0);
  }
  if (with_ext) {
    for (int i = 0; i < model.num_links(); ++i) s.f_ext.emplace_back(random_box(rng, 1.0), random_box(rng, 1.0));
  }
  return s;
}

std::vector<AnchoredConstraint> foot_constraints(const RobotModel& model, double foot_offset) {
  std::vector<AnchoredConstraint> out;
  for (int leaf : leaves(model)) {
    AnchoredConstraint c;
    c.family = AnchoredConstraint::Family::WorldPoint;
    c.link = leaf;
    c.point = Vec3(0, 0, -foot_offset);
    out.push_back(c);
  }
  return out;
}

ConstraintEntry anchored_rows(const RobotModel& model, const RobotState& state, const AnchoredConstraint& c) {
  KinematicsCache kin;
  forward_positions(model, state.q, kin);
  ConstraintEntry e;
  e.link = c.link;
  if (c.family == AnchoredConstraint::Family::WorldWeld) {
    e.K = MatX6::Identity(6, 6);
  } else {
    const Vec3 rho = kin.rotation(c.link) * c.point;
    Eigen::Matrix<double, 3, 6> full;
    full << -skew(rho), Mat3::Identity();
    if (c.axes.empty()) {
      e.K = full;
    } else {
      e.K.resize(static_cast<Eigen::Index>(c.axes.size()), 6);
      for (std::size_t r = 0; r < c.axes.size(); ++r) {
        e.K.row(static_cast<Eigen::Index>(r)) = c.axes[r].transpose() * full;
      }
    }
  }
  e.k = VecX::Zero(e.K.rows());
  return e;
}

const char* to_string(Family family) {
  switch (family) {
    case Family::Chain: return "chain";
    case Family::Tree: return "tree";
    case Family::Branched: return "branched";
    case Family::Ladder: return "ladder";
  }
  return "unknown";
}

Family family_from_string(const std::string& name) {
  if (name == "chain") return Family::Chain;
  if (name == "tree") return Family::Tree;
  if (name == "branched") return Family::Branched;
  if (name == "ladder") return Family::Ladder;
  throw ModelError("unknown family '" + name + "' (expected chain, tree, branched or ladder)");
}

bool early_elimination_feasible(const RobotModel& model, const ConstraintSet& constraints) {
  std::vector<int> rows(static_cast<std::size_t>(model.num_links()), 0);
  for (const auto& e : constraints.entries()) rows[static_cast<std::size_t>(e.link)] += e.rows();
  for (int i = model.num_links() - 1; i >= 0; --i) {
    const int r = rows[static_cast<std::size_t>(i)];
    if (r > 6) return false;
    if (model.link(i).joint.kind == JointKind::Floating) continue;
    const int up = std::max(0, r - 1);
    const int p = model.parent(i);
    if (p < 0) {
      if (up > 0) return false;
    } else {
      rows[static_cast<std::size_t>(p)] += up;
    }
  }
  return true;
}

Instance make_instance(Family family, std::uint64_t seed, int index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(family), static_cast<std::uint32_t>(index)};
  Rng rng(seq);
  for (int attempt = 0; attempt < 200; ++attempt) {
    Instance inst;
    switch (family) {
      case Family::Chain: {
        const int n = uniform_int(rng, 2, 32);
        inst.model = make_chain(n, rng);
        inst.label = "chain(n=" + std::to_string(n) + ")";
        break;
      }
      case Family::Tree: {
        const int depth = uniform_int(rng, 2, 6);
        const int n = uniform_int(rng, depth + 1, 24);
        inst.model = make_random_tree(n, depth, rng);
        inst.label = "tree(n=" + std::to_string(n) + ",d<=" + std::to_string(depth) + ")";
        break;
      }
      case Family::Branched: {
        const int branches = uniform_int(rng, 2, 4);
        const int depth = uniform_int(rng, 2, 5);
        inst.model = make_branched(branches, depth, rng);
        inst.label = "branched(r=" + std::to_string(branches) + ",d=" + std::to_string(depth) + ")";
        break;
      }
      case Family::Ladder: {
        const int rungs = uniform_int(rng, 1, 4);
        inst.model = make_ladder(rungs, rng);
        inst.label = "ladder(rungs=" + std::to_string(rungs) + ")";
        break;
      }
    }
    inst.state = random_state(inst.model, rng, uniform(rng, 0.0, 1.0) < 0.5);
    inst.constraints = random_constraint_set(family, inst.model, inst.state, rng);
    if (!early_elimination_feasible(inst.model, inst.constraints)) continue;
    if (dual_condition(inst.model, inst.state, inst.constraints) > 1e6) continue;
    inst.label += "#" + std::to_string(index);
    return inst;
  }
  throw ModelError(std::string("could not draw a well-conditioned ") + to_string(family) + " instance");
}

Instance make_bench_instance(Family family, int size, std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(family),
                    static_cast<std::uint32_t>(size), 0xbe7cu};
  Rng rng(seq);
  Instance inst;
  switch (family) {
    case Family::Chain: {
      inst.model = make_chain(size, rng);
      ConstraintEntry e;
      e.link = size - 1;
      e.K = MatX6::Identity(6, 6);
      e.k = random_targets(rng, 6);
      inst.constraints.add(std::move(e));
      break;
    }
    case Family::Ladder: {
      inst.model = make_ladder(size, rng);
      for (int leaf : leaves(inst.model)) {
        ConstraintEntry e;
        e.link = leaf;
        e.K = MatX6::Identity(6, 6);
        e.k = random_targets(rng, 6);
        inst.constraints.add(std::move(e));
      }
      break;
    }
    case Family::Branched: {
      inst.model = make_branched(4, size, rng);
      for (int leaf : leaves(inst.model)) {
        ConstraintEntry e;
        e.link = leaf;
        e.K = random_rows(rng, 3);
        e.k = random_targets(rng, 3);
        inst.constraints.add(std::move(e));
      }
      break;
    }
    case Family::Tree:
      throw ModelError("no benchmark scenario for the tree family");
  }
  inst.state = random_state(inst.model, rng);
  inst.label = std::string(to_string(family)) + "(" + std::to_string(size) + ")";
  return inst;
}

}  // namespace pvdyn
