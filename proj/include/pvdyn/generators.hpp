#pragma once

// Procedural robots and randomized test instances. Everything is seeded so a
// (generator, seed) pair always produces the same bytes.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "pvdyn/model.hpp"

namespace pvdyn {

using Rng = std::mt19937_64;

/// Revolute-y pendulum hanging along -z: mass at distance `length` below the
/// joint, q = 0 straight down.
RobotModel make_pendulum(double mass = 1.0, double length = 1.0);
/// Two stacked pendulum links of equal mass and length.
RobotModel make_double_pendulum(double mass = 1.0, double length = 1.0);
/// Planar three-link arm (revolute y) used for pinned-tip (four-bar) simulations.
RobotModel make_planar_arm(int links, double length = 0.5);

/// Serial chain of n revolute joints with random axes, offsets and inertias.
RobotModel make_chain(int n, Rng& rng);
/// Random fixed-base tree with n links and depth at most max_depth.
RobotModel make_random_tree(int n, int max_depth, Rng& rng);
/// Floating base with `branches` serial limbs of `depth` links each.
RobotModel make_branched(int branches, int depth, Rng& rng);
/// Floating base with four 3-link legs (hip ab/adduction, hip and knee pitch).
RobotModel make_quadruped();
/// Fixed spine of three links per rung; every rung hangs a seven-link branch
/// whose tip is welded to the world.
RobotModel make_ladder(int rungs, Rng& rng);

/// Random configuration, velocity and torque; floating bases get a random
/// unit quaternion. External wrenches are added when `with_ext` is set.
RobotState random_state(const RobotModel& model, Rng& rng, bool with_ext = false);

/// World-point constraints at the foot (tip) of every leaf branch of a
/// quadruped-like model, anchored where the feet currently are. The foot sits
/// `foot_offset` below the last joint along its link -z axis.
std::vector<AnchoredConstraint> foot_constraints(const RobotModel& model, double foot_offset = 0.25);

/// Rows of K acting on the world-aligned link acceleration for an anchored
/// constraint at the given state (targets left to the caller).
ConstraintEntry anchored_rows(const RobotModel& model, const RobotState& state, const AnchoredConstraint& c);

/// Condition number of J M^{-1} J^T, infinity when singular.
double dual_condition(const RobotModel& model, const RobotState& state, const ConstraintSet& constraints);

enum class Family { Chain, Tree, Branched, Ladder };

const char* to_string(Family family);
Family family_from_string(const std::string& name);

struct Instance {
  std::string label;
  RobotModel model;
  RobotState state;
  ConstraintSet constraints;
};

/// The randomized instance `index` of a family; the same (family, seed, index)
/// always yields the same instance. Constraint sets are full row rank with a
/// bounded condition number and are solvable joint by joint (at most six rows
/// meet at any link during early elimination).
Instance make_instance(Family family, std::uint64_t seed, int index);

/// Benchmark scenarios: chain(n) with a 6D tip constraint, ladder(rungs) with
/// welded rung tips, branched(depth) with four limbs and 3D foot constraints.
Instance make_bench_instance(Family family, int size, std::uint64_t seed);

/// Rows of a tree that survive joint-by-joint elimination, assuming generic
/// (nonzero) projections: own rows plus max(0, child rows - 1) per child.
/// Returns false when some link would hold more than six rows or rows would
/// reach a fixed base.
bool early_elimination_feasible(const RobotModel& model, const ConstraintSet& constraints);

}  // namespace pvdyn
