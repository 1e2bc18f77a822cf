#include "pvdyn/osim.hpp"

#include <sstream>

#include "pv_internal.hpp"
#include "pvdyn/errors.hpp"
#include "pvdyn/linalg.hpp"

namespace pvdyn {

namespace {

void factor_or_throw(MatX& A, const char* name) {
  if (const auto bad = linalg::cholesky_in_place(A)) {
    std::ostringstream os;
    os << "pivot " << *bad << " of " << A.rows() << " constraint rows; the rows are dependent";
    throw RankDeficientError(name, os.str());
  }
  A.triangularView<Eigen::StrictlyUpper>().setZero();
}

}  // namespace

VecX OsimResult::solve(const VecX& y) const {
  VecX x = y;
  linalg::cholesky_solve_in_place(factor, x);
  return x;
}

OsimResult pv_osim(const RobotModel& model, const VecX& q, const ConstraintSet& constraints) {
  if (constraints.empty()) throw ModelError("pv_osim needs at least one constraint");
  if (q.size() != model.config_size()) throw ModelError("configuration size does not match the model");
  constraints.validate(model);
  PvWorkspace ws(model, constraints);
  forward_positions(model, q, ws.kin);
  detail::seed_links(model, nullptr, &constraints, ws, SolverOptions{}, detail::Seed::Inertia, true);
  ws.L.setZero();
  detail::backward_sweep(model, ws, false, true);

  const int m = ws.m;
  OsimResult out;
  out.user_to_dfs.assign(static_cast<std::size_t>(m), 0);
  for (int r = 0; r < m; ++r) out.user_to_dfs[static_cast<std::size_t>(ws.dfs_to_user[static_cast<std::size_t>(r)])] = r;

  MatX L0 = ws.L;
  if (ws.floating) {
    out.floating = true;
    out.L_b = ws.L;
    out.K_b = ws.K;
    out.H_b = ws.H[0];
    out.base_rows = ws.own_count[0];
    for (int c : model.children(0)) {
      const auto uc = static_cast<std::size_t>(c);
      if (ws.row_count[uc] > 0) out.branch_blocks.emplace_back(ws.row_begin[uc], ws.row_count[uc]);
    }
    const Eigen::LLT<Mat6> llt(ws.H[0]);
    if (llt.info() != Eigen::Success) throw ModelError("base articulated inertia is not positive definite");
    const MatX HinvKt = llt.solve(MatX(ws.K.transpose()));
    L0.noalias() += ws.K * HinvKt;
  }
  out.inverse.resize(m, m);
  for (int r = 0; r < m; ++r) {
    for (int c = 0; c < m; ++c) {
      out.inverse(r, c) = L0(out.user_to_dfs[static_cast<std::size_t>(r)], out.user_to_dfs[static_cast<std::size_t>(c)]);
    }
  }
  out.factor = out.inverse;
  factor_or_throw(out.factor, "L0^A");
  return out;
}

FastOsimOperator::FastOsimOperator(const OsimResult& osim) {
  if (!osim.floating) throw ModelError("the fast OSIM operator needs a floating-base model");
  if (osim.base_rows > 0) {
    throw RankDeficientError("L_b^A", "rows on the base link give L_b^A a zero block; use pv_osim");
  }
  m_ = static_cast<int>(osim.inverse.rows());
  user_to_dfs_ = osim.user_to_dfs;
  blocks_ = osim.branch_blocks;
  if (blocks_.empty()) throw RankDeficientError("L_b^A", "no constrained branch; use pv_osim");
  for (const auto& [begin, count] : blocks_) {
    MatX B = osim.L_b.block(begin, begin, count, count);
    if (const auto bad = linalg::cholesky_in_place(B)) {
      std::ostringstream os;
      os << "branch block at rows [" << begin << ", " << begin + count << ") is singular (pivot " << *bad
         << "); use pv_osim";
      throw RankDeficientError("L_b^A", os.str());
    }
    block_factors_.push_back(std::move(B));
  }
  LK_ = osim.K_b;
  for (int c = 0; c < 6; ++c) LK_.col(c) = block_solve(osim.K_b.col(c));
  const Mat6 inner = osim.H_b + osim.K_b.transpose() * LK_;
  inner_.compute(inner);
  if (inner_.info() != Eigen::Success) {
    throw RankDeficientError("H_b^A + K_b^T Lambda_b K_b", "not positive definite");
  }
}

VecX FastOsimOperator::block_solve(const VecX& y_dfs) const {
  VecX x = y_dfs;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    auto seg = x.segment(blocks_[b].first, blocks_[b].second);
    linalg::cholesky_solve_in_place(block_factors_[b], seg);
  }
  return x;
}

VecX FastOsimOperator::apply(const VecX& y) const {
  if (y.size() != m_) throw ModelError("vector size does not match the constraint rows");
  VecX y_dfs(m_);
  for (int r = 0; r < m_; ++r) y_dfs(user_to_dfs_[static_cast<std::size_t>(r)]) = y(r);
  const VecX t = block_solve(y_dfs);
  const Vec6 inner_rhs = LK_.transpose() * y_dfs;
  const VecX x_dfs = t - LK_ * inner_.solve(inner_rhs);
  VecX x(m_);
  for (int r = 0; r < m_; ++r) x(r) = x_dfs(user_to_dfs_[static_cast<std::size_t>(r)]);
  return x;
}

VecX pv_osim_fast_apply(const RobotModel& model, const VecX& q, const ConstraintSet& constraints,
                        const VecX& y) {
  return FastOsimOperator(pv_osim(model, q, constraints)).apply(y);
}

}  // namespace pvdyn
