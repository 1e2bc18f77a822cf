#pragma once

// Library side of the `pvdyn` command-line tool: the verification suite,
// the benchmark harness and subcommand entry points. The executable in
// tools/ only wires these to CLI11.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pvdyn/errors.hpp"
#include "pvdyn/generators.hpp"
#include "pvdyn/io.hpp"

namespace pvdyn::cli {

enum ExitCode : int { kOk = 0, kCheckFailure = 1, kUsageError = 2 };

/// Thrown for bad flags or inputs that the user must fix (exit code 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

// ---- verification -------------------------------------------------------

/// Deliberate defects used to prove that the suite catches them.
enum class Fault { None, JtLambdaSign };

Fault fault_from_string(const std::string& name);

/// Worst observed error of one named property over all instances it ran on.
struct CheckResult {
  std::string name;
  double tolerance = 0.0;
  double worst = 0.0;
  int cases = 0;
  int failures = 0;
  std::string worst_case;

  bool passed() const { return failures == 0; }
  void record(double error, const std::string& label);
};

struct VerifyOptions {
  std::uint64_t seed = 0;
  /// Randomized instances per generator family.
  int count = 20;
  std::vector<Family> families = {Family::Chain, Family::Tree, Family::Branched, Family::Ladder};
  /// Optional user model (with constraints) checked on random states.
  std::optional<std::string> model_path;
  std::optional<std::string> constraints_path;
  Fault fault = Fault::None;
};

struct VerifyReport {
  std::vector<CheckResult> checks;
  int instances = 0;
  double seconds = 0.0;

  bool passed() const;
  const CheckResult& check(const std::string& name) const;
  void print(std::ostream& os) const;
};

VerifyReport run_verify(const VerifyOptions& options);

// ---- benchmarks ---------------------------------------------------------

enum class BenchSolver { Pv, PvEarly, PvSoft, Aba, PvOsim, LtlOsim, Kkt };

const char* to_string(BenchSolver solver);
BenchSolver bench_solver_from_string(const std::string& name);

struct BenchOptions {
  Family family = Family::Chain;
  std::vector<int> sizes;
  std::vector<BenchSolver> solvers = {BenchSolver::Pv};
  int reps = 200;
  std::uint64_t seed = 0;
};

struct BenchRow {
  std::string scenario;
  /// Family size parameter (links, rungs or limb depth).
  int size = 0;
  int n = 0;
  int m = 0;
  int d = 0;
  BenchSolver solver = BenchSolver::Pv;
  double median_ns = 0.0;
  double p10_ns = 0.0;
  double p90_ns = 0.0;
  int iterations = 0;
  /// Sum of the outputs of one solve, verified against the oracle before timing.
  double checksum = 0.0;
};

struct BenchReport {
  std::vector<BenchRow> rows;

  static std::string csv_header();
  std::string to_csv() const;
  const BenchRow& row(int size, BenchSolver solver) const;
};

/// Times every (size, solver) pair. Each result is first checked against the
/// dense oracle; a mismatch throws instead of reporting a fast wrong answer.
BenchReport run_bench(const BenchOptions& options);

// ---- model sources ------------------------------------------------------

/// A model file path, or `builtin:<name>` with name one of pendulum,
/// double_pendulum, quadruped, planar_arm:N, chain:N, ladder:R, branched:R,D.
RobotModel resolve_model(const std::string& spec, std::uint64_t seed);

/// Anchored foot constraints of the built-in quadruped, the pinned tip of
/// planar arms (x and z), the double pendulum tip held on a vertical line,
/// or nothing for other built-ins.
std::vector<AnchoredConstraint> builtin_constraints(const std::string& spec, const RobotModel& model);

// ---- subcommands --------------------------------------------------------

/// Parses argv and runs a subcommand; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pvdyn::cli
