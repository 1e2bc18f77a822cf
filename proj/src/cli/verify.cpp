#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "pvdyn/baseline.hpp"
#include "pvdyn/cli.hpp"
#include "pvdyn/errors.hpp"
#include "pvdyn/kinematics.hpp"
#include "pvdyn/linalg.hpp"
#include "pvdyn/osim.hpp"
#include "pvdyn/solvers.hpp"

namespace pvdyn::cli {

Fault fault_from_string(const std::string& name) {
  if (name.empty() || name == "none") return Fault::None;
  if (name == "jt-lambda-sign") return Fault::JtLambdaSign;
  throw UsageError("unknown fault '" + name + "' (expected jt-lambda-sign)");
}

void CheckResult::record(double error, const std::string& label) {
  ++cases;
  if (!(error <= tolerance)) ++failures;
  if (cases == 1 || !(error <= worst)) {
    worst = error;
    worst_case = label;
  }
}

bool VerifyReport::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed(); });
}

const CheckResult& VerifyReport::check(const std::string& name) const {
  for (const auto& c : checks) {
    if (c.name == name) return c;
  }
  throw Error("no check named '" + name + "'");
}

void VerifyReport::print(std::ostream& os) const {
  char line[256];
  for (const auto& c : checks) {
    std::snprintf(line, sizeof line, "%s  %-26s worst %.3e  tol %.0e  cases %d", c.passed() ? "PASS" : "FAIL",
                  c.name.c_str(), c.worst, c.tolerance, c.cases);
    os << line;
    if (!c.passed()) os << "  failures " << c.failures << " (worst: " << c.worst_case << ")";
    os << '\n';
  }
  std::snprintf(line, sizeof line, "%d instances in %.2f s: %s\n", instances, seconds,
                passed() ? "all checks passed" : "CHECKS FAILED");
  os << line;
}

namespace {

struct Suite {
  explicit Suite(Fault f) : fault(f) {
    add("pv-vs-oracle", 1e-8);
    add("pv-early-vs-oracle", 1e-8);
    add("kkt-residual", 1e-8);
    add("aba-reduction", 1e-12);
    add("gravity-modes", 1e-10);
    add("osim-pv-vs-ltl", 1e-8);
    add("osim-pv-vs-dense", 1e-8);
    add("osim-ltl-vs-dense", 1e-8);
    add("osim-fast", 1e-8);
    add("projector-annihilation", 1e-12);
    add("articulated-inertia-spd", 1e-10);
    add("root-dual-hessian-psd", 1e-10);
    add("ltl-sparsity", 1e-12);
    add("ltl-reconstruction", 1e-10);
    add("energy-identity", 1e-10);
    add("soft-monotone", 0.0);
    add("soft-joint-space", 1e-9);
    add("solver-errors", 0.0);
  }

  void add(const char* name, double tol) {
    CheckResult c;
    c.name = name;
    c.tolerance = tol;
    checks.push_back(c);
  }
  CheckResult& operator[](const char* name) {
    for (auto& c : checks) {
      if (c.name == name) return c;
    }
    throw Error(std::string("no check named ") + name);
  }

  void run(const Instance& inst);

  Fault fault;
  std::vector<CheckResult> checks;
  std::uint64_t rng_seed = 0;
};

double symmetric_min_eigen(const MatX& A) {
  if (A.rows() == 0) return 0.0;
  const Eigen::SelfAdjointEigenSolver<MatX> eig(A, Eigen::EigenvaluesOnly);
  return eig.eigenvalues().minCoeff();
}

double max_abs(const MatX& A) { return A.size() == 0 ? 0.0 : A.cwiseAbs().maxCoeff(); }

/// Reverse-ordered dense Cholesky (L^T L = M, L lower) with no structure
/// assumed, for comparison against the tree-sparse factor.
MatX dense_reverse_cholesky(const MatX& M) {
  const Eigen::Index n = M.rows();
  MatX P = M.reverse();  // reverses both rows and columns
  const Eigen::LLT<MatX> llt(P);
  if (llt.info() != Eigen::Success) throw RankDeficientError("LTL", "dense reference factorization failed");
  const MatX C = llt.matrixL();
  MatX L(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) L(i, j) = C(n - 1 - j, n - 1 - i);
  }
  return L;
}

bool dof_ancestor(const std::vector<int>& parents, int ancestor, int dof) {
  for (int v = dof; v >= 0; v = parents[static_cast<std::size_t>(v)]) {
    if (v == ancestor) return true;
  }
  return false;
}

void Suite::run(const Instance& inst) {
  const RobotModel& model = inst.model;
  const RobotState& state = inst.state;
  const ConstraintSet& cs = inst.constraints;
  const std::string& label = inst.label;
  const bool constrained = !cs.empty();

  const KktSolution ref = kkt_oracle(model, state, cs);
  PvWorkspace ws(model, cs);
  DynamicsSolution pv;
  pv_solve(model, state, cs, ws, pv);
  if (fault == Fault::JtLambdaSign) pv.lambda = -pv.lambda;
  (*this)["pv-vs-oracle"].record(
      std::max(linalg::relative_error(pv.qdd, ref.qdd), linalg::relative_error(pv.lambda, ref.lambda)), label);

  const DynamicsSolution early = pv_early_solve(model, state, cs);
  (*this)["pv-early-vs-oracle"].record(
      std::max(linalg::relative_error(early.qdd, ref.qdd), linalg::relative_error(early.lambda, ref.lambda)),
      label);

  const JointSpaceModel js = joint_space_model(model, state, cs);
  for (const DynamicsSolution* sol : std::initializer_list<const DynamicsSolution*>{&pv, &early}) {
    const VecX lhs = js.M * sol->qdd + js.c + js.J.transpose() * sol->lambda;
    const VecX con = js.J * sol->qdd + js.Jdot_qd;
    const double scale = std::max({1.0, max_abs(state.tau), max_abs(js.c)});
    double err = max_abs(lhs - state.tau) / scale;
    if (constrained) err = std::max(err, linalg::relative_error(con, cs.stacked_targets()));
    (*this)["kkt-residual"].record(err, label);
  }

  const VecX qdd_aba = aba(model, state);
  const DynamicsSolution free = pv_solve(model, state, ConstraintSet{});
  (*this)["aba-reduction"].record(linalg::relative_error(free.qdd, qdd_aba), label);

  SolverOptions weights;
  weights.gravity = GravityMode::LinkWeights;
  const DynamicsSolution pv_w = pv_solve(model, state, cs, weights);
  const DynamicsSolution early_w = pv_early_solve(model, state, cs, weights);
  (*this)["gravity-modes"].record(std::max(linalg::relative_error(pv_w.qdd, pv.qdd),
                                           linalg::relative_error(early_w.qdd, early.qdd)),
                                  label);

  // Structural invariants of the backward sweep just run.
  {
    double annihilation = 0.0;
    double spd = 0.0;
    for (int i = 0; i < model.num_links(); ++i) {
      const auto ui = static_cast<std::size_t>(i);
      const Mat6& H = ws.H[ui];
      const double scale = std::max(1.0, max_abs(H));
      spd = std::max(spd, max_abs(H - H.transpose()) / scale);
      const Eigen::LLT<Mat6> llt(H);
      if (llt.info() != Eigen::Success) spd = std::max(spd, 1.0);
      if (model.link(i).joint.kind == JointKind::Floating) continue;
      const Vec6 s = model.link(i).joint.axis_column();
      annihilation = std::max(annihilation, max_abs(s.transpose() * ws.projector(model, i)));
    }
    (*this)["projector-annihilation"].record(annihilation, label);
    (*this)["articulated-inertia-spd"].record(spd, label);
    if (constrained) {
      const double scale = std::max(1.0, max_abs(ws.L));
      const double asym = max_abs(ws.L - ws.L.transpose()) / scale;
      const double neg = std::max(0.0, -symmetric_min_eigen(ws.L)) / scale;
      (*this)["root-dual-hessian-psd"].record(std::max(asym, neg), label);
    }
  }

  {
    const MatX L = ltl_factor(js.M, model.dof_parents());
    const MatX dense = dense_reverse_cholesky(js.M);
    const auto parents = model.dof_parents();
    const double scale = std::max(1.0, max_abs(L));
    double structural = 0.0;
    for (int i = 0; i < model.dof(); ++i) {
      for (int j = 0; j < i; ++j) {
        if (!dof_ancestor(parents, j, i)) {
          structural = std::max({structural, std::abs(L(i, j)) / scale, std::abs(dense(i, j)) / scale});
        }
      }
    }
    (*this)["ltl-sparsity"].record(structural, label);
    (*this)["ltl-reconstruction"].record(linalg::relative_error(MatX(L.transpose() * L), js.M), label);
  }

  {
    const KinematicsCache kin = forward_sweep(model, state);
    double sum = 0.0;
    for (int i = 0; i < model.num_links(); ++i) {
      const Vec6& v = kin.v[static_cast<std::size_t>(i)];
      sum += v.dot(model.inertia(i) * v);
    }
    const double quad = state.qd.dot(js.M * state.qd);
    (*this)["energy-identity"].record(std::abs(quad - sum) / std::max(1.0, std::abs(quad)), label);
  }

  if (!constrained) return;

  const OsimResult osim = pv_osim(model, state.q, cs);
  const MatX ltl = ltl_osim(model, state, cs);
  const MatX dense = js.J * Eigen::LLT<MatX>(js.M).solve(MatX(js.J.transpose()));
  (*this)["osim-pv-vs-ltl"].record(linalg::relative_error(osim.inverse, ltl), label);
  (*this)["osim-pv-vs-dense"].record(linalg::relative_error(osim.inverse, dense), label);
  (*this)["osim-ltl-vs-dense"].record(linalg::relative_error(ltl, dense), label);

  if (osim.floating && osim.base_rows == 0) {
    const FastOsimOperator fast(osim);
    Rng rng(rng_seed++);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 3; ++trial) {
      VecX y(cs.rows());
      for (Eigen::Index r = 0; r < y.size(); ++r) y(r) = u(rng);
      (*this)["osim-fast"].record(linalg::relative_error(fast.apply(y), osim.solve(y)), label);
    }
  }

  double previous = 0.0;
  for (int step = 0; step < 3; ++step) {
    const double w = std::pow(10.0, 2 + 2 * step);
    const DynamicsSolution soft = pv_soft_solve(model, state, cs.with_uniform_weight(w));
    // Allow for rounding once the residual has reached its floor.
    if (step > 0) (*this)["soft-monotone"].record(std::max(0.0, soft.residual - previous - 1e-12), label);
    previous = soft.residual;
    if (step == 1) {
      const VecX reference = joint_space_soft_solve(model, state, cs.with_uniform_weight(w));
      (*this)["soft-joint-space"].record(linalg::relative_error(soft.qdd, reference), label);
    }
  }
}

std::vector<Instance> user_instances(const VerifyOptions& options) {
  std::vector<Instance> out;
  if (!options.model_path) return out;
  const RobotModel model = load_model_file(*options.model_path);
  ConstraintDocument doc;
  if (options.constraints_path) doc = load_constraints_file(*options.constraints_path, model);
  std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                    0x05e7u};
  Rng rng(seq);
  for (int i = 0; i < options.count; ++i) {
    Instance inst;
    inst.model = model;
    inst.state = random_state(model, rng, i % 2 == 1);
    inst.constraints = doc.constraints.hard();
    for (const auto& a : doc.anchored) {
      ConstraintEntry e = anchored_rows(model, inst.state, a);
      e.k = VecX::Zero(e.rows());
      inst.constraints.add(std::move(e));
    }
    inst.constraints.normalize();
    inst.label = "user#" + std::to_string(i);
    out.push_back(std::move(inst));
  }
  return out;
}

/// Every leg block of L_b^A must be well conditioned on its own for the
/// fast operator, which inverts the blocks one leg at a time.
bool legs_well_conditioned(const Instance& inst) {
  const OsimResult r = pv_osim(inst.model, inst.state.q, inst.constraints);
  for (const auto& [begin, count] : r.branch_blocks) {
    const Eigen::SelfAdjointEigenSolver<MatX> es(r.L_b.block(begin, begin, count, count));
    const double lo = es.eigenvalues().minCoeff();
    if (!(lo > 0.0) || es.eigenvalues().maxCoeff() > 1e6 * lo) return false;
  }
  return true;
}

std::vector<Instance> quadruped_instances(const VerifyOptions& options) {
  std::vector<Instance> out;
  const RobotModel model = make_quadruped();
  std::seed_seq seq{static_cast<std::uint32_t>(options.seed), static_cast<std::uint32_t>(options.seed >> 32),
                    0x9ad0u};
  Rng rng(seq);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto feet = foot_constraints(model);
  for (int i = 0; i < options.count; ++i) {
    Instance inst;
    inst.model = model;
    // Random joint angles can straighten a knee; such poses are redrawn.
    do {
      inst.state = random_state(model, rng, i % 2 == 1);
      inst.constraints = ConstraintSet{};
      for (const auto& foot : feet) {
        ConstraintEntry e = anchored_rows(model, inst.state, foot);
        e.k = VecX(e.rows());
        for (Eigen::Index r = 0; r < e.k.size(); ++r) e.k(r) = u(rng);
        inst.constraints.add(std::move(e));
      }
      inst.constraints.normalize();
    } while (dual_condition(model, inst.state, inst.constraints) > 1e6 || !legs_well_conditioned(inst));
    inst.label = "quadruped#" + std::to_string(i);
    out.push_back(std::move(inst));
  }
  return out;
}

}  // namespace

VerifyReport run_verify(const VerifyOptions& options) {
  if (options.count <= 0) throw UsageError("--count must be at least 1");
  const auto start = std::chrono::steady_clock::now();
  Suite suite(options.fault);
  suite.rng_seed = options.seed;
  VerifyReport report;
  auto run_one = [&](const Instance& inst) {
    ++report.instances;
    try {
      suite.run(inst);
      suite["solver-errors"].record(0.0, inst.label);
    } catch (const Error& e) {
      suite["solver-errors"].record(1.0, inst.label + ": " + e.what());
    }
  };
  for (Family family : options.families) {
    for (int i = 0; i < options.count; ++i) run_one(make_instance(family, options.seed, i));
  }
  for (const Instance& inst : quadruped_instances(options)) run_one(inst);
  for (const Instance& inst : user_instances(options)) run_one(inst);
  report.checks = suite.checks;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

}  // namespace pvdyn::cli
