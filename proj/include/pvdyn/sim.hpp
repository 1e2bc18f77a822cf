#pragma once

#include <string>
#include <vector>

#include "pvdyn/model.hpp"
#include "pvdyn/solvers.hpp"

namespace pvdyn {

enum class Integrator { SemiImplicitEuler, Rk4 };
enum class SolverKind { Pv, PvEarly, PvSoft };

const char* to_string(Integrator integrator);
const char* to_string(SolverKind solver);
Integrator integrator_from_string(const std::string& name);
SolverKind solver_from_string(const std::string& name);

struct SimConfig {
  double dt = 1e-3;
  double duration = 1.0;
  Integrator integrator = Integrator::SemiImplicitEuler;
  SolverKind solver = SolverKind::Pv;
  /// Penalty weight for pv-soft when a constraint carries none of its own.
  double soft_weight = 1e6;
  /// Baumgarte time constant T; stabilization off when `stabilize` is false.
  double baumgarte_T = 0.1;
  bool stabilize = true;

  void validate() const;
};

/// Critically damped error dynamics: -(2/T) edot - e / T^2.
VecX baumgarte_acceleration(const VecX& e, const VecX& edot, double T);

struct ConstraintErrors {
  VecX position;
  VecX velocity;
};

/// Position and velocity errors of anchored constraints (anchors must be set).
ConstraintErrors constraint_errors(const RobotModel& model, const RobotState& state,
                                   const std::vector<AnchoredConstraint>& anchored);

/// Fills missing anchors from the current pose.
void capture_anchors(const RobotModel& model, const RobotState& state,
                     std::vector<AnchoredConstraint>& anchored);

/// Acceleration-level constraint set for the anchored constraints at `state`.
/// With stabilization the targets follow baumgarte_acceleration, otherwise
/// they hold the constrained points at zero acceleration. Rows are normalized.
ConstraintSet baumgarte_targets(const RobotModel& model, const RobotState& state,
                                const std::vector<AnchoredConstraint>& anchored, double T,
                                bool stabilize = true);

struct TrajectorySample {
  double t = 0.0;
  VecX q, qd, qdd, lambda;
  double con_pos_err = 0.0;
  double con_vel_err = 0.0;
  double energy = 0.0;
};

struct Trajectory {
  std::vector<TrajectorySample> samples;

  std::string csv_header() const;
  std::string to_csv() const;
};

/// Time-stepping driver. Raw K/k constraints have no measurable position
/// error, so they are only accepted with stabilization off.
class Simulator {
 public:
  Simulator(const RobotModel& model, std::vector<AnchoredConstraint> anchored, ConstraintSet raw,
            SimConfig config);

  /// Constraint set used at `state` (anchored rows followed by raw rows).
  ConstraintSet constraints_at(const RobotState& state) const;
  /// Accelerations and multipliers at `state`.
  DynamicsSolution dynamics(const RobotState& state);
  /// Advances `state` by one step of dt. `current`, when given, is the
  /// solution at `state` and saves one solve.
  RobotState step(const RobotState& state, const DynamicsSolution* current = nullptr);
  Trajectory run(const RobotState& initial);

  const std::vector<AnchoredConstraint>& anchored() const { return anchored_; }
  const SimConfig& config() const { return config_; }

 private:
  TrajectorySample sample(double t, const RobotState& state, const DynamicsSolution& sol) const;

  const RobotModel& model_;
  std::vector<AnchoredConstraint> anchored_;
  ConstraintSet raw_;
  SimConfig config_;
  PvWorkspace pv_ws_;
  EarlyWorkspace early_ws_;
  double time_ = 0.0;
};

/// Configuration after moving with generalized velocity v for time h.
/// Floating-base orientation is composed on the rotation group and renormalized.
VecX integrate_configuration(const RobotModel& model, const VecX& q, const VecX& v, double h);

Trajectory simulate(const RobotModel& model, const RobotState& initial,
                    std::vector<AnchoredConstraint> anchored, ConstraintSet raw, const SimConfig& config);

}  // namespace pvdyn
