#include <algorithm>
#include <chrono>
#include <functional>
#include <memory>
#include <sstream>

#include "pvdyn/baseline.hpp"
#include "pvdyn/cli.hpp"
#include "pvdyn/errors.hpp"
#include "pvdyn/linalg.hpp"
#include "pvdyn/osim.hpp"
#include "pvdyn/solvers.hpp"

namespace pvdyn::cli {

namespace {

constexpr double kSoftWeight = 1e6;
constexpr double kVerifyTolerance = 1e-8;
/// Each timing sample covers at least this long, batching fast solves.
constexpr double kMinSampleNs = 20000.0;

struct Entry {
  BenchSolver solver;
  const char* name;
};

constexpr Entry kSolvers[] = {
    {BenchSolver::Pv, "pv"},           {BenchSolver::PvEarly, "pv-early"}, {BenchSolver::PvSoft, "pv-soft"},
    {BenchSolver::Aba, "aba"},         {BenchSolver::PvOsim, "pv-osim"},   {BenchSolver::LtlOsim, "ltl-osim"},
    {BenchSolver::Kkt, "kkt"},
};

double sum(const VecX& v) { return v.sum(); }
double sum(const MatX& m) { return m.sum(); }

void verify(const char* what, double error) {
  if (!(error <= kVerifyTolerance)) {
    std::ostringstream os;
    os << what << " disagrees with the reference by " << error << "; refusing to time it";
    throw Error(os.str());
  }
}

/// Sets up one solver on an instance: checks its output against an
/// independent reference and returns the timed closure plus a checksum.
std::function<void()> prepare(BenchSolver solver, const Instance& inst, double& checksum) {
  const RobotModel& model = inst.model;
  const RobotState& state = inst.state;
  const ConstraintSet& cs = inst.constraints;
  switch (solver) {
    case BenchSolver::Pv: {
      auto ws = std::make_shared<PvWorkspace>(model, cs);
      auto out = std::make_shared<DynamicsSolution>();
      pv_solve(model, state, cs, *ws, *out);
      const KktSolution ref = kkt_oracle(model, state, cs);
      verify("pv", std::max(linalg::relative_error(out->qdd, ref.qdd), linalg::relative_error(out->lambda, ref.lambda)));
      checksum = sum(out->qdd) + sum(out->lambda);
      return [&model, &state, &cs, ws, out] { pv_solve(model, state, cs, *ws, *out); };
    }
    case BenchSolver::PvEarly: {
      auto ws = std::make_shared<EarlyWorkspace>(model, cs);
      auto out = std::make_shared<DynamicsSolution>();
      pv_early_solve(model, state, cs, *ws, *out);
      const KktSolution ref = kkt_oracle(model, state, cs);
      verify("pv-early",
             std::max(linalg::relative_error(out->qdd, ref.qdd), linalg::relative_error(out->lambda, ref.lambda)));
      checksum = sum(out->qdd) + sum(out->lambda);
      return [&model, &state, &cs, ws, out] { pv_early_solve(model, state, cs, *ws, *out); };
    }
    case BenchSolver::PvSoft: {
      auto soft = std::make_shared<ConstraintSet>(cs.with_uniform_weight(kSoftWeight));
      auto ws = std::make_shared<PvWorkspace>(model, *soft);
      auto out = std::make_shared<DynamicsSolution>();
      pv_soft_solve(model, state, *soft, *ws, *out);
      verify("pv-soft", linalg::relative_error(out->qdd, joint_space_soft_solve(model, state, *soft)));
      checksum = sum(out->qdd) + sum(out->lambda);
      return [&model, &state, soft, ws, out] { pv_soft_solve(model, state, *soft, *ws, *out); };
    }
    case BenchSolver::Aba: {
      auto ws = std::make_shared<PvWorkspace>(model, ConstraintSet{});
      auto qdd = std::make_shared<VecX>();
      aba(model, state, *ws, *qdd);
      verify("aba", linalg::relative_error(*qdd, kkt_oracle(model, state, ConstraintSet{}).qdd));
      checksum = sum(*qdd);
      return [&model, &state, ws, qdd] { aba(model, state, *ws, *qdd); };
    }
    case BenchSolver::PvOsim: {
      const OsimResult r = pv_osim(model, state.q, cs);
      verify("pv-osim", linalg::relative_error(r.inverse, ltl_osim(model, state, cs)));
      checksum = sum(r.inverse);
      return [&model, &state, &cs] { (void)pv_osim(model, state.q, cs); };
    }
    case BenchSolver::LtlOsim: {
      const MatX r = ltl_osim(model, state, cs);
      verify("ltl-osim", linalg::relative_error(r, pv_osim(model, state.q, cs).inverse));
      checksum = sum(r);
      return [&model, &state, &cs] { (void)ltl_osim(model, state, cs); };
    }
    case BenchSolver::Kkt: {
      const KktSolution r = kkt_oracle(model, state, cs);
      const DynamicsSolution pv = pv_solve(model, state, cs);
      verify("kkt", std::max(linalg::relative_error(r.qdd, pv.qdd), linalg::relative_error(r.lambda, pv.lambda)));
      checksum = sum(r.qdd) + sum(r.lambda);
      return [&model, &state, &cs] { (void)kkt_oracle(model, state, cs); };
    }
  }
  throw Error("unhandled solver");
}

double percentile(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double pos = p * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double elapsed_ns(const std::function<void()>& fn, int calls) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int c = 0; c < calls; ++c) fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::nano>(t1 - t0).count();
}

}  // namespace

const char* to_string(BenchSolver solver) {
  for (const auto& e : kSolvers) {
    if (e.solver == solver) return e.name;
  }
  return "?";
}

BenchSolver bench_solver_from_string(const std::string& name) {
  for (const auto& e : kSolvers) {
    if (name == e.name) return e.solver;
  }
  throw UsageError("unknown solver '" + name + "' (expected pv, pv-early, pv-soft, aba, pv-osim, ltl-osim or kkt)");
}

std::string BenchReport::csv_header() {
  return "scenario,n,m,d,solver,median_ns,p10_ns,p90_ns,iterations,checksum";
}

std::string BenchReport::to_csv() const {
  std::ostringstream os;
  os << csv_header() << '\n';
  for (const auto& r : rows) {
    os << r.scenario << ',' << r.n << ',' << r.m << ',' << r.d << ',' << to_string(r.solver) << ','
       << format_double(r.median_ns) << ',' << format_double(r.p10_ns) << ',' << format_double(r.p90_ns) << ','
       << r.iterations << ',' << format_double(r.checksum) << '\n';
  }
  return os.str();
}

const BenchRow& BenchReport::row(int size, BenchSolver solver) const {
  for (const auto& r : rows) {
    if (r.size == size && r.solver == solver) return r;
  }
  throw Error("no benchmark row for size " + std::to_string(size) + " and solver " + to_string(solver));
}

BenchReport run_bench(const BenchOptions& options) {
  if (options.family == Family::Tree) throw UsageError("bench families are chain, ladder and branched");
  if (options.sizes.empty()) throw UsageError("--sizes needs at least one size");
  if (options.solvers.empty()) throw UsageError("--solvers needs at least one solver");
  if (options.reps < 100) throw UsageError("--reps must be at least 100");
  for (std::size_t i = 0; i < options.sizes.size(); ++i) {
    if (options.sizes[i] < 1) throw UsageError("sizes must be positive");
    if (i > 0 && options.sizes[i] <= options.sizes[i - 1]) throw UsageError("--sizes must be strictly ascending");
  }

  BenchReport report;
  for (int size : options.sizes) {
    const Instance inst = make_bench_instance(options.family, size, options.seed);
    for (BenchSolver solver : options.solvers) {
      BenchRow row;
      row.scenario = inst.label;
      row.size = size;
      row.n = inst.model.dof();
      row.m = inst.constraints.rows();
      row.d = inst.model.depth();
      row.solver = solver;
      const std::function<void()> fn = prepare(solver, inst, row.checksum);

      // Warm up, then size batches so that each sample is well above the
      // clock resolution.
      int batch = 1;
      double warm = elapsed_ns(fn, 1);
      for (int w = 0; w < 10; ++w) warm = std::min(warm, elapsed_ns(fn, 1));
      if (warm < kMinSampleNs) batch = static_cast<int>(kMinSampleNs / std::max(warm, 1.0)) + 1;

      std::vector<double> samples;
      samples.reserve(static_cast<std::size_t>(options.reps));
      for (int r = 0; r < options.reps; ++r) samples.push_back(elapsed_ns(fn, batch) / batch);
      row.median_ns = percentile(samples, 0.5);
      row.p10_ns = percentile(samples, 0.1);
      row.p90_ns = percentile(samples, 0.9);
      row.iterations = options.reps * batch;
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace pvdyn::cli
