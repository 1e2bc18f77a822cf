#pragma once

// JSON model / constraint documents and the decimal float format shared by
// every text output.
//
// Model document:
//   { "links": [ { "name": "...", "parent": <index | name | null>,
//                  "joint": { "kind": "revolute|prismatic|floating",
//                             "axis": [3], "xyz": [3], "rpy": [3] },
//                  "mass": m, "com": [3],
//                  "inertia6": [ixx, iyy, izz, ixy, ixz, iyz] } ],
//     "floating_base": bool, "gravity": [3] }
// Parents given by index must precede the child. Parents given by name may
// appear in any order; links are then reindexed topologically.
//
// Constraint document:
//   { "constraints": [ { "link": <index | name>, "K": [[6], ...], "k": [...],
//                        "soft_weight": [...] } ] }
// Rows of K are normalized to unit length on load and k is scaled with them.
// Entries with "type": "world_point" | "world_weld" describe anchored
// constraints for the simulator instead of raw K/k rows.

#include <string>
#include <string_view>
#include <vector>

#include "pvdyn/model.hpp"

namespace pvdyn {

RobotModel load_model(std::string_view document);
RobotModel load_model_file(const std::string& path);
std::string serialize_model(const RobotModel& model);

struct ConstraintDocument {
  ConstraintSet constraints;
  std::vector<AnchoredConstraint> anchored;
};

ConstraintDocument load_constraints(std::string_view document, const RobotModel& model);
ConstraintDocument load_constraints_file(const std::string& path, const RobotModel& model);
std::string serialize_constraints(const ConstraintSet& constraints);

/// Shortest-exact decimal is not required anywhere; every text output uses
/// 17 significant digits, which round-trips IEEE doubles bit-exactly.
std::string format_double(double x);

std::string read_text_file(const std::string& path);

}  // namespace pvdyn
