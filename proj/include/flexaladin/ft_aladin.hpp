#pragma once

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "flexaladin/errors.hpp"
#include "flexaladin/linalg.hpp"
#include "flexaladin/local_solver.hpp"
#include "flexaladin/objectives.hpp"
#include "flexaladin/polling.hpp"
#include "flexaladin/trace.hpp"

namespace flexaladin {

struct FtConfig {
  HessianPolicy hessian = HessianPolicy::exact();
  /// Optional per-agent policies; when nonempty, entry i replaces `hessian` for agent i.
  std::vector<HessianPolicy> agent_hessian;
  double local_tolerance = 1e-10;

  void validate() const {
    if (!(local_tolerance > 0.0)) throw ValidationError("local_tolerance", "must be positive");
  }

  const HessianPolicy& policy(int i) const {
    return agent_hessian.empty() ? hessian : agent_hessian.at(static_cast<std::size_t>(i));
  }
};

struct FtSlate {
  VectorXd x;
  VectorXd g;
  MatrixXd B;
  VectorXd y;
  bool clamped = false;
};

struct FtState {
  std::vector<FtSlate> slates;
  VectorXd lambda;
  int k = 0;
};

/// Dual gradient R and dual Hessian M of the coordination QP.
struct DualSystem {
  VectorXd R;
  MatrixXd M;
};

/// Reciprocal condition estimate of M below which it is treated as singular.
inline constexpr double kDualRcondFloor = 1e-13;

namespace detail {

inline DualSystem dual_system(const ResourceProblem& p, const std::vector<FtSlate>& slates) {
  const Eigen::Index m = p.m();
  DualSystem d{-p.b, MatrixXd::Zero(m, m)};
  for (std::size_t i = 0; i < slates.size(); ++i) {
    const auto& sl = slates[i];
    Eigen::LLT<MatrixXd> Bf(sl.B);
    if (Bf.info() != Eigen::Success) throw NumericError("B_" + std::to_string(i) + " is not positive definite");
    d.R += p.A[i] * (sl.x - Bf.solve(sl.g));
    d.M += p.A[i] * Bf.solve(p.A[i].transpose());
  }
  d.M = linalg::symmetrize(d.M);
  return d;
}

inline Eigen::LLT<MatrixXd> factor_dual(const MatrixXd& M) {
  Eigen::LLT<MatrixXd> llt(M);
  const double rcond = llt.info() == Eigen::Success ? llt.rcond() : 0.0;
  if (llt.info() != Eigen::Success || rcond < kDualRcondFloor) {
    throw RankError("dual Hessian M is singular (rcond estimate " + std::to_string(rcond) +
                        "); stacked coupling matrix must have full row rank",
                    rcond);
  }
  return llt;
}

}  // namespace detail

inline FtState ft_init(const ResourceProblem& problem, std::vector<VectorXd> y0,
                       VectorXd lambda0, const FtConfig& cfg) {
  problem.validate_shapes();
  cfg.validate();
  const int N = problem.agents();
  if (!cfg.agent_hessian.empty() && static_cast<int>(cfg.agent_hessian.size()) != N) {
    throw ValidationError("hessian.matrices", "need one policy per agent");
  }
  if (y0.empty()) {
    for (int i = 0; i < N; ++i) y0.push_back(VectorXd::Zero(problem.dim(i)));
  }
  if (static_cast<int>(y0.size()) != N) throw DimensionError("y0: expected one vector per agent");
  if (lambda0.size() == 0) lambda0 = VectorXd::Zero(problem.m());
  linalg::require_size(lambda0, problem.m(), "lambda0");

  FtState s;
  s.lambda = std::move(lambda0);
  s.slates.resize(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    linalg::require_size(y0[ui], problem.dim(i), "y0 entry");
    auto& sl = s.slates[ui];
    sl.y = y0[ui];
    sl.x = y0[ui];
    sl.B = initial_hessian(cfg.policy(i), *problem.objectives[ui], sl.y);
    sl.g = evaluate_gradient_resource(sl.B, sl.y, sl.x, problem.A[ui], s.lambda);
  }
  detail::factor_dual(detail::dual_system(problem, s.slates).M);
  return s;
}

inline FtSlate ft_agent_step(const ResourceProblem& problem, const FtState& state, int i,
                             const FtConfig& cfg, int k) {
  const auto ui = static_cast<std::size_t>(i);
  const auto& f = *problem.objectives.at(ui);
  const FtSlate& cur = state.slates.at(ui);
  LocalSolveReport rep =
      solve_local_resource(f, state.lambda, cur.y, problem.A[ui], cur.B, cfg.local_tolerance);
  FtSlate next;
  next.x = std::move(rep.x_plus);
  next.g = evaluate_gradient_resource(cur.B, cur.y, next.x, problem.A[ui], state.lambda);
  next.B = update_hessian(cfg.policy(i), f, next.x, cur.B, k, cur.x, &next.clamped);
  next.y = cur.y;
  return next;
}

struct FtCoordination {
  VectorXd lambda;
  std::vector<VectorXd> ys;
  DualSystem dual;
};

/// lambda+ = M^{-1} R,  y_i+ = x_i - B_i^{-1}(g_i + A_i' lambda+).
/// Afterwards sum_i A_i y_i+ = b holds up to rounding.
inline FtCoordination ft_coordinate(const FtState& state, const ResourceProblem& problem) {
  FtCoordination c;
  c.dual = detail::dual_system(problem, state.slates);
  c.lambda = detail::factor_dual(c.dual.M).solve(c.dual.R);
  for (std::size_t i = 0; i < state.slates.size(); ++i) {
    const auto& sl = state.slates[i];
    c.ys.push_back(sl.x - sl.B.llt().solve(sl.g + problem.A[i].transpose() * c.lambda));
  }
  return c;
}

inline ResourceRecord make_resource_record(const FtState& s, const ResourceProblem& p,
                                           std::vector<int> active) {
  ResourceRecord r;
  r.k = s.k;
  r.active = std::move(active);
  r.lambda = s.lambda;
  for (std::size_t i = 0; i < s.slates.size(); ++i) {
    const auto& sl = s.slates[i];
    r.ys.push_back(sl.y);
    r.x.push_back(sl.x);
    r.g.push_back(sl.g);
    r.B.push_back(sl.B);
    if (sl.clamped) r.clamped.push_back(static_cast<int>(i));
    r.stationarity = std::max(r.stationarity, (sl.g + p.A[i].transpose() * s.lambda).norm());
  }
  r.feasibility = p.coupling_residual(r.ys).norm();
  return r;
}

using FtObserver = std::function<void(ResourceRecord&, const FtState&)>;

struct FtRunOptions {
  std::vector<VectorXd> y0;
  VectorXd lambda0;
  std::vector<FtObserver> observers;
};

inline void ft_iterate(const ResourceProblem& problem, const FtConfig& cfg, FtState& state,
                       const ActiveSet& active) {
  const int k = active.k;
  for (auto& sl : state.slates) sl.clamped = false;
  for (int i : active.members) {
    try {
      state.slates[static_cast<std::size_t>(i)] = ft_agent_step(problem, state, i, cfg, k);
    } catch (const Error& e) {
      throw EngineError(k, i, e.what());
    }
  }
  FtCoordination c;
  try {
    c = ft_coordinate(state, problem);
  } catch (const Error& e) {
    throw EngineError(k, std::nullopt, e.what());
  }
  state.lambda = std::move(c.lambda);
  for (std::size_t i = 0; i < state.slates.size(); ++i) state.slates[i].y = std::move(c.ys[i]);
  state.k = k;
}

/// Flexible typical ALADIN for sum_i A_i x_i = b. K+1 records, row 0 initial.
inline ResourceTrace run_ft(const ResourceProblem& problem, const FtConfig& cfg,
                            const PollingConfig& polling, int K, const FtRunOptions& opts = {}) {
  if (K < 1) throw ValidationError("K", "must be at least 1");
  cfg.validate();
  polling.validate(problem.agents());
  FtState state = ft_init(problem, opts.y0, opts.lambda0, cfg);

  ResourceTrace trace;
  trace.meta.engine = "ft";
  trace.meta.variant = "typical";
  trace.meta.policy = cfg.hessian.name();
  trace.meta.p = polling.mode == PollingMode::Full ? 1.0 : polling.p;
  trace.meta.seed = polling.seed;
  trace.meta.local_tolerance = cfg.local_tolerance;
  trace.records.reserve(static_cast<std::size_t>(K) + 1);

  auto emit = [&](std::vector<int> active) {
    ResourceRecord rec = make_resource_record(state, problem, std::move(active));
    for (const auto& obs : opts.observers) obs(rec, state);
    trace.records.push_back(std::move(rec));
  };
  emit({});
  for (int k = 1; k <= K; ++k) {
    const ActiveSet active = draw_active_set(polling, problem.agents(), k);
    ft_iterate(problem, cfg, state, active);
    emit(active.members);
  }
  return trace;
}

}  // namespace flexaladin
