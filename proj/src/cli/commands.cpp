#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "pvdyn/cli.hpp"
#include "pvdyn/errors.hpp"
#include "pvdyn/osim.hpp"
#include "pvdyn/sim.hpp"

namespace pvdyn::cli {

namespace {

constexpr const char* kBuiltin = "builtin:";

bool is_builtin(const std::string& spec) { return spec.rfind(kBuiltin, 0) == 0; }

std::vector<int> parse_ints(const std::string& text, const std::string& what) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("bad " + what + " '" + text + "'");
    }
  }
  return out;
}

std::string builtin_name(const std::string& spec, std::string* args) {
  std::string rest = spec.substr(std::string(kBuiltin).size());
  const auto colon = rest.find(':');
  if (args) *args = colon == std::string::npos ? "" : rest.substr(colon + 1);
  return rest.substr(0, colon);
}

void require_file(const std::string& path, const char* flag) {
  if (!std::filesystem::is_regular_file(path)) {
    throw UsageError(std::string(flag) + ": no such file '" + path + "'");
  }
}

/// Writes to --out when given, otherwise to `fallback`.
void emit(const std::string& text, const std::string& path, std::ostream& fallback) {
  if (path.empty()) {
    fallback << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw UsageError("cannot write '" + path + "'");
  f << text;
}

RobotState load_state(const std::string& path, const RobotModel& model) {
  require_file(path, "--state");
  RobotState s = RobotState::Zero(model);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw LoadError(path + ": " + e.what());
  }
  auto read = [&](const char* key, VecX& v) {
    if (!doc.contains(key)) return;
    const auto values = doc.at(key).get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != v.size()) {
      throw LoadError(path + ": '" + key + "' needs " + std::to_string(v.size()) + " entries");
    }
    for (std::size_t i = 0; i < values.size(); ++i) v(static_cast<Eigen::Index>(i)) = values[i];
  };
  read("q", s.q);
  read("qd", s.qd);
  read("tau", s.tau);
  s.validate(model);
  return s;
}

/// Bent pose for planar arms (the straight arm is a singular four-bar), the
/// neutral pose otherwise.
RobotState default_state(const std::string& spec, const RobotModel& model) {
  RobotState s = RobotState::Zero(model);
  if (is_builtin(spec) && builtin_name(spec, nullptr) == "planar_arm") {
    for (int i = 0; i < model.dof(); ++i) s.q(i) = i == 0 ? 0.6 : (i % 2 == 1 ? -1.2 : 1.2);
  }
  if (is_builtin(spec) && builtin_name(spec, nullptr) == "double_pendulum") s.q << 0.8, -0.5;
  return s;
}

struct Common {
  std::string model;
  std::string constraints;
  std::string state;
  std::uint64_t seed = 0;
  std::string out;
  std::string format = "csv";
};

void add_common(CLI::App* cmd, Common& c, bool model_required) {
  auto* m = cmd->add_option("--model", c.model, "Model JSON file or builtin:<name>");
  if (model_required) m->required();
  cmd->add_option("--constraints", c.constraints, "Constraint JSON file");
  cmd->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  cmd->add_option("--out", c.out, "Output file (default: standard output)");
  cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv"}))->capture_default_str();
}

ConstraintDocument constraints_for(const Common& c, const RobotModel& model) {
  if (!c.constraints.empty()) {
    require_file(c.constraints, "--constraints");
    return load_constraints_file(c.constraints, model);
  }
  ConstraintDocument doc;
  if (is_builtin(c.model)) doc.anchored = builtin_constraints(c.model, model);
  return doc;
}

int cmd_verify(const Common& c, int count, const std::string& fault, std::ostream& out) {
  VerifyOptions options;
  options.seed = c.seed;
  options.count = count;
  options.fault = fault_from_string(fault);
  if (!c.model.empty()) {
    if (is_builtin(c.model)) throw UsageError("verify --model takes a file; built-in models are always checked");
    require_file(c.model, "--model");
    options.model_path = c.model;
  }
  if (!c.constraints.empty()) {
    if (c.model.empty()) throw UsageError("--constraints needs --model");
    require_file(c.constraints, "--constraints");
    options.constraints_path = c.constraints;
  }
  const VerifyReport report = run_verify(options);
  std::ostringstream os;
  report.print(os);
  emit(os.str(), c.out, out);
  if (!c.out.empty()) report.print(out);
  return report.passed() ? kOk : kCheckFailure;
}

int cmd_bench(const Common& c, const std::string& family, const std::string& sizes, const std::string& solvers,
              int reps, std::ostream& out) {
  BenchOptions options;
  try {
    options.family = family_from_string(family);
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  options.sizes = parse_ints(sizes, "--sizes");
  options.solvers.clear();
  std::stringstream ss(solvers);
  std::string name;
  while (std::getline(ss, name, ',')) options.solvers.push_back(bench_solver_from_string(name));
  options.reps = reps;
  options.seed = c.seed;
  emit(run_bench(options).to_csv(), c.out, out);
  return kOk;
}

int cmd_simulate(const Common& c, SimConfig config, bool open_loop, std::ostream& out, std::ostream& err) {
  config.stabilize = !open_loop;
  try {
    config.validate();
  } catch (const ModelError& e) {
    throw UsageError(e.what());
  }
  if (!is_builtin(c.model)) require_file(c.model, "--model");
  const RobotModel model = resolve_model(c.model, c.seed);
  const ConstraintDocument doc = constraints_for(c, model);
  const RobotState initial = c.state.empty() ? default_state(c.model, model) : load_state(c.state, model);
  ConstraintSet raw = doc.constraints;
  if (config.solver != SolverKind::PvSoft) raw = raw.hard();
  const Trajectory traj = simulate(model, initial, doc.anchored, raw, config);
  emit(traj.to_csv(), c.out, out);

  double worst = 0.0;
  for (const auto& s : traj.samples) worst = std::max(worst, s.con_pos_err);
  const TrajectorySample& last = traj.samples.back();
  std::ostream& summary = c.out.empty() ? err : out;
  summary << "samples " << traj.samples.size() << ", final con_pos_err " << format_double(last.con_pos_err)
          << ", final con_vel_err " << format_double(last.con_vel_err) << ", max con_pos_err "
          << format_double(worst) << '\n';
  return kOk;
}

int cmd_osim(const Common& c, std::ostream& out) {
  if (!is_builtin(c.model)) require_file(c.model, "--model");
  const RobotModel model = resolve_model(c.model, c.seed);
  const ConstraintDocument doc = constraints_for(c, model);
  RobotState state;
  if (!c.state.empty()) {
    state = load_state(c.state, model);
  } else {
    std::seed_seq seq{static_cast<std::uint32_t>(c.seed), static_cast<std::uint32_t>(c.seed >> 32), 0x051du};
    Rng rng(seq);
    state = random_state(model, rng);
  }
  ConstraintSet cs = doc.constraints.hard();
  for (const auto& a : doc.anchored) cs.add(anchored_rows(model, state, a));
  cs.normalize();
  if (cs.empty()) throw UsageError("osim needs constraints (--constraints or a built-in model with feet)");
  const OsimResult r = pv_osim(model, state.q, cs);
  std::ostringstream os;
  for (Eigen::Index i = 0; i < r.inverse.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.inverse.cols(); ++j) {
      if (j > 0) os << ',';
      os << format_double(r.inverse(i, j));
    }
    os << '\n';
  }
  emit(os.str(), c.out, out);
  return kOk;
}

}  // namespace

RobotModel resolve_model(const std::string& spec, std::uint64_t seed) {
  if (!is_builtin(spec)) return load_model_file(spec);
  std::string args;
  const std::string name = builtin_name(spec, &args);
  const std::vector<int> p = args.empty() ? std::vector<int>{} : parse_ints(args, "built-in model arguments");
  auto need = [&](std::size_t count, const char* usage) {
    if (p.size() != count) throw UsageError(std::string("usage: builtin:") + usage);
  };
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0xb11du};
  Rng rng(seq);
  try {
    if (name == "pendulum") {
      need(0, "pendulum");
      return make_pendulum();
    }
    if (name == "double_pendulum") {
      need(0, "double_pendulum");
      return make_double_pendulum();
    }
    if (name == "quadruped") {
      need(0, "quadruped");
      return make_quadruped();
    }
    if (name == "planar_arm") {
      need(1, "planar_arm:N");
      return make_planar_arm(p[0]);
    }
    if (name == "chain") {
      need(1, "chain:N");
      return make_chain(p[0], rng);
    }
    if (name == "ladder") {
      need(1, "ladder:R");
      return make_ladder(p[0], rng);
    }
    if (name == "branched") {
      need(2, "branched:R,D");
      return make_branched(p[0], p[1], rng);
    }
  } catch (const ModelError& e) {
    throw UsageError(e.what());
  }
  throw UsageError("unknown built-in model '" + name +
                   "' (pendulum, double_pendulum, quadruped, planar_arm:N, chain:N, ladder:R, branched:R,D)");
}

std::vector<AnchoredConstraint> builtin_constraints(const std::string& spec, const RobotModel& model) {
  if (!is_builtin(spec)) return {};
  const std::string name = builtin_name(spec, nullptr);
  if (name == "quadruped") return foot_constraints(model);
  if (name == "planar_arm") {
    AnchoredConstraint tip;
    tip.link = model.num_links() - 1;
    tip.point = Vec3(0.5, 0.0, 0.0);
    tip.axes = {Vec3::UnitX(), Vec3::UnitZ()};
    return {tip};
  }
  if (name == "double_pendulum") {
    AnchoredConstraint tip;
    tip.link = 1;
    tip.point = Vec3(0.0, 0.0, -1.0);
    tip.axes = {Vec3::UnitX()};
    return {tip};
  }
  return {};
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Constrained rigid-body dynamics: verification, benchmarks and simulation", "pvdyn"};
  app.require_subcommand(1);

  Common common;
  int count = 20;
  std::string fault;
  auto* verify = app.add_subcommand("verify", "Cross-check every solver against the dense oracle");
  add_common(verify, common, false);
  verify->add_option("--count", count, "Random instances per family")->capture_default_str();
  verify->add_option("--inject-fault", fault, "")->group("");

  std::string family = "chain";
  std::string sizes = "16,32,64,128";
  std::string solvers = "pv";
  int reps = 200;
  auto* bench = app.add_subcommand("bench", "Time solvers on a family of procedural models (CSV)");
  add_common(bench, common, false);
  bench->add_option("--family", family, "chain, ladder or branched")->capture_default_str();
  bench->add_option("--sizes", sizes, "Ascending comma-separated sizes")->capture_default_str();
  bench->add_option("--solvers", solvers, "Comma-separated: pv, pv-early, pv-soft, aba, pv-osim, ltl-osim, kkt")
      ->capture_default_str();
  bench->add_option("--reps", reps, "Timed repetitions (at least 100)")->capture_default_str();

  SimConfig config;
  std::string integrator = "semi-implicit-euler";
  std::string solver = "pv";
  bool open_loop = false;
  auto* sim = app.add_subcommand("simulate", "Simulate and write the trajectory (CSV)");
  add_common(sim, common, true);
  sim->add_option("--state", common.state, "Initial state JSON {\"q\", \"qd\", \"tau\"}");
  sim->add_option("--dt", config.dt, "Time step [s]")->capture_default_str();
  sim->add_option("--duration", config.duration, "Duration [s]")->capture_default_str();
  sim->add_option("--integrator", integrator, "semi-implicit-euler or rk4")->capture_default_str();
  sim->add_option("--solver", solver, "pv, pv-early or pv-soft")->capture_default_str();
  sim->add_option("--soft-weight", config.soft_weight, "Penalty weight for pv-soft")->capture_default_str();
  sim->add_option("--baumgarte-T", config.baumgarte_T, "Stabilization period [s]")->capture_default_str();
  sim->add_flag("--open-loop", open_loop, "Disable Baumgarte stabilization");

  auto* osim = app.add_subcommand("osim", "Print the inverse operational-space inertia (CSV)");
  add_common(osim, common, true);
  osim->add_option("--state", common.state, "State JSON (default: random from --seed)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << "error: " << e.what() << "\n";
    return kUsageError;
  }

  try {
    if (*verify) return cmd_verify(common, count, fault, out);
    if (*bench) return cmd_bench(common, family, sizes, solvers, reps, out);
    if (*sim) {
      try {
        config.integrator = integrator_from_string(integrator);
        config.solver = solver_from_string(solver);
      } catch (const Error& e) {
        throw UsageError(e.what());
      }
      return cmd_simulate(common, config, open_loop, out, err);
    }
    if (*osim) return cmd_osim(common, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const LoadError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kCheckFailure;
  }
  return kUsageError;
}

}  // namespace pvdyn::cli
