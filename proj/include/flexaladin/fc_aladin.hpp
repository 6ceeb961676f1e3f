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

enum class FcVariant { ExactBProx, ExactRhoProx, Inexact };
enum class Mixing { Realized, MeanField };

inline std::string to_string(FcVariant v) {
  switch (v) {
    case FcVariant::ExactBProx: return "exact_B_prox";
    case FcVariant::ExactRhoProx: return "exact_rho_prox";
    case FcVariant::Inexact: return "inexact";
  }
  return "?";
}

inline std::string to_string(Mixing m) { return m == Mixing::Realized ? "realized" : "mean_field"; }

struct FcConfig {
  HessianPolicy hessian = HessianPolicy::exact();
  /// Optional per-agent policies; when nonempty, entry i replaces `hessian` for agent i.
  std::vector<HessianPolicy> agent_hessian;
  double local_tolerance = 1e-10;
  FcVariant variant = FcVariant::ExactBProx;
  /// Prox weight of the exact_rho_prox variant.
  double rho = 1.0;
  Mixing mixing = Mixing::Realized;
  /// Mixture weight for mean_field; run_fc falls back to the polling p.
  std::optional<double> mixing_p;

  void validate() const {
    if (!(local_tolerance > 0.0)) throw ValidationError("local_tolerance", "must be positive");
    if (variant == FcVariant::ExactRhoProx && !(rho > 0.0)) {
      throw ValidationError("variant.rho", "must be positive");
    }
    if (mixing == Mixing::MeanField && variant != FcVariant::Inexact) {
      throw ValidationError("variant.mixing", "mean_field requires the inexact variant");
    }
    if (mixing_p && !(*mixing_p > 0.0 && *mixing_p <= 1.0)) {
      throw ValidationError("variant.mixing_p", "must lie in (0, 1]");
    }
    bool state_independent = hessian.state_independent();
    for (const auto& h : agent_hessian) state_independent = state_independent && h.state_independent();
    if (variant == FcVariant::Inexact && !state_independent) {
      throw ValidationError("hessian.policy",
                            "inexact variant needs a fixed or schedule policy (B is held per iteration)");
    }
  }

  const HessianPolicy& policy(int i) const {
    return agent_hessian.empty() ? hessian : agent_hessian.at(static_cast<std::size_t>(i));
  }
};

/// What the coordinator holds for agent i.
struct FcSlate {
  VectorXd x;
  VectorXd g;
  MatrixXd B;
  VectorXd lambda;
  bool clamped = false;
};

struct FcState {
  VectorXd y;
  std::vector<FcSlate> slates;
  int k = 0;

  int agents() const { return static_cast<int>(slates.size()); }
};

/// Initial coordinator state: lambda shifted to sum to zero, x_i = y0,
/// B_i from the policy at y0, g_i = B_i (y0 - x_i) - lambda_i.
inline FcState fc_init(const ConsensusProblem& problem, const VectorXd& y0,
                       std::vector<VectorXd> lambda0, const FcConfig& cfg) {
  problem.validate();
  cfg.validate();
  const int N = problem.agents();
  if (!cfg.agent_hessian.empty() && static_cast<int>(cfg.agent_hessian.size()) != N) {
    throw ValidationError("hessian.matrices", "need one policy per agent");
  }
  linalg::require_size(y0, problem.n, "y0");
  if (lambda0.empty()) lambda0.assign(static_cast<std::size_t>(N), VectorXd::Zero(problem.n));
  if (static_cast<int>(lambda0.size()) != N) {
    throw DimensionError("lambda0: expected " + std::to_string(N) + " entries");
  }
  for (const auto& l : lambda0) linalg::require_size(l, problem.n, "lambda0 entry");
  detail::recenter(lambda0);

  FcState s;
  s.y = y0;
  s.slates.resize(static_cast<std::size_t>(N));
  for (int i = 0; i < N; ++i) {
    auto& sl = s.slates[static_cast<std::size_t>(i)];
    const auto& f = *problem.objectives[static_cast<std::size_t>(i)];
    sl.lambda = lambda0[static_cast<std::size_t>(i)];
    sl.B = initial_hessian(cfg.policy(i), f, y0);
    sl.x = y0;
    sl.g = evaluate_gradient_consensus(sl.B, y0, sl.x, sl.lambda);
  }
  return s;
}

/// Local step of agent i (exact variants). Returns the agent's new slate;
/// lambda is left for the coordinator to overwrite.
inline FcSlate fc_agent_step(const ConsensusProblem& problem, const FcState& state, int i,
                             const FcConfig& cfg, int k) {
  const auto& f = *problem.objectives.at(static_cast<std::size_t>(i));
  const FcSlate& cur = state.slates.at(static_cast<std::size_t>(i));
  const MatrixXd prox = cfg.variant == FcVariant::ExactRhoProx
                            ? MatrixXd(cfg.rho * MatrixXd::Identity(problem.n, problem.n))
                            : cur.B;
  LocalSolveReport rep = solve_local_consensus(f, cur.lambda, state.y, prox, cfg.local_tolerance);
  FcSlate next;
  next.x = std::move(rep.x_plus);
  next.g = evaluate_gradient_consensus(prox, state.y, next.x, cur.lambda);
  next.B = update_hessian(cfg.policy(i), f, next.x, cur.B, k, cur.x, &next.clamped);
  next.lambda = cur.lambda;
  return next;
}

/// Closed-form consensus step without an inner solve:
/// x+ = y - B^{-1}(lambda_i + df(y)),  g+ = df(x+).
inline std::pair<VectorXd, VectorXd> fc_inexact_agent_step(const Objective& f, const VectorXd& y,
                                                           const VectorXd& lambda_i,
                                                           const MatrixXd& B_i) {
  VectorXd x = y - B_i.ldlt().solve(lambda_i + f.subgradient(y));
  VectorXd g = f.subgradient(x);
  return {std::move(x), std::move(g)};
}

struct Coordination {
  VectorXd y;
  std::vector<VectorXd> lambdas;
};

namespace detail {

inline Coordination coordinate(const std::vector<FcSlate>& slates, const std::vector<VectorXd>& xs,
                               const std::vector<VectorXd>& gs) {
  const Eigen::Index n = slates.front().x.size();
  MatrixXd sumB = MatrixXd::Zero(n, n);
  VectorXd rhs = VectorXd::Zero(n);
  for (std::size_t i = 0; i < slates.size(); ++i) {
    sumB += slates[i].B;
    rhs += slates[i].B * xs[i] - gs[i];
  }
  Eigen::LLT<MatrixXd> llt(linalg::symmetrize(sumB));
  if (llt.info() != Eigen::Success) throw NumericError("coordination: sum of B_i is not positive definite");
  Coordination c;
  c.y = llt.solve(rhs);
  c.lambdas.reserve(slates.size());
  for (const auto& sl : slates) c.lambdas.push_back(sl.B * (sl.x - c.y) - sl.g);
  return c;
}

}  // namespace detail

/// y+ = (sum B_i)^{-1} sum (B_i x_i - g_i),  lambda_i+ = B_i (x_i - y+) - g_i,
/// over all agents with their current (possibly stale) slates.
inline Coordination fc_coordinate(const FcState& state) {
  std::vector<VectorXd> xs, gs;
  for (const auto& sl : state.slates) {
    xs.push_back(sl.x);
    gs.push_back(sl.g);
  }
  return detail::coordinate(state.slates, xs, gs);
}

/// Coordination of the inexact variant. Realized mixing is fc_coordinate;
/// mean_field replaces the new (x_i, g_i) of active agents by
/// p * new + (1 - p) * previous in the y-update only.
inline Coordination fc_inexact_coordinate(const FcState& state, const std::vector<FcSlate>& previous,
                                          const ActiveSet& active, const FcConfig& cfg, double p) {
  if (cfg.mixing == Mixing::MeanField && cfg.variant != FcVariant::Inexact) {
    throw ValidationError("variant.mixing", "mean_field requires the inexact variant");
  }
  if (cfg.mixing == Mixing::Realized) return fc_coordinate(state);
  std::vector<VectorXd> xs, gs;
  for (std::size_t i = 0; i < state.slates.size(); ++i) {
    const auto& sl = state.slates[i];
    if (active.contains(static_cast<int>(i))) {
      xs.push_back(p * sl.x + (1.0 - p) * previous[i].x);
      gs.push_back(p * sl.g + (1.0 - p) * previous[i].g);
    } else {
      xs.push_back(sl.x);
      gs.push_back(sl.g);
    }
  }
  return detail::coordinate(state.slates, xs, gs);
}

inline ConsensusRecord make_consensus_record(const FcState& s, std::vector<int> active) {
  ConsensusRecord r;
  r.k = s.k;
  r.active = std::move(active);
  r.y = s.y;
  VectorXd lsum = VectorXd::Zero(s.y.size());
  for (std::size_t i = 0; i < s.slates.size(); ++i) {
    const auto& sl = s.slates[i];
    r.lambdas.push_back(sl.lambda);
    r.x.push_back(sl.x);
    r.g.push_back(sl.g);
    r.B.push_back(sl.B);
    if (sl.clamped) r.clamped.push_back(static_cast<int>(i));
    r.primal_residual = std::max(r.primal_residual, (sl.x - s.y).norm());
    lsum += sl.lambda;
  }
  r.dual_sum = lsum.norm();
  return r;
}

using FcObserver = std::function<void(ConsensusRecord&, const FcState&)>;

struct FcRunOptions {
  VectorXd y0;                         // empty: zero vector
  std::vector<VectorXd> lambda0;       // empty: zeros
  std::vector<FcObserver> observers;   // called once per record, in order
};

/// Executes one FC-ALADIN iteration on `state` with the given active set.
inline void fc_iterate(const ConsensusProblem& problem, const FcConfig& cfg, FcState& state,
                       const ActiveSet& active, double p) {
  const int k = active.k;
  const std::vector<FcSlate> previous = state.slates;
  for (auto& sl : state.slates) sl.clamped = false;

  if (cfg.variant == FcVariant::Inexact) {
    // B is a function of k only; the coordinator refreshes it for everyone.
    for (int i = 0; i < state.agents(); ++i) {
      auto& sl = state.slates[static_cast<std::size_t>(i)];
      sl.B = update_hessian(cfg.policy(i), *problem.objectives[static_cast<std::size_t>(i)], sl.x, sl.B, k,
                            std::nullopt, &sl.clamped);
    }
    for (int i : active.members) {
      auto& sl = state.slates[static_cast<std::size_t>(i)];
      try {
        auto [x, g] = fc_inexact_agent_step(*problem.objectives[static_cast<std::size_t>(i)], state.y,
                                            sl.lambda, sl.B);
        sl.x = std::move(x);
        sl.g = std::move(g);
      } catch (const Error& e) {
        throw EngineError(k, i, e.what());
      }
    }
  } else {
    for (int i : active.members) {
      try {
        state.slates[static_cast<std::size_t>(i)] = fc_agent_step(problem, state, i, cfg, k);
      } catch (const Error& e) {
        throw EngineError(k, i, e.what());
      }
    }
  }

  Coordination c;
  try {
    c = cfg.variant == FcVariant::Inexact ? fc_inexact_coordinate(state, previous, active, cfg, p)
                                          : fc_coordinate(state);
  } catch (const Error& e) {
    throw EngineError(k, std::nullopt, e.what());
  }
  state.y = std::move(c.y);
  for (std::size_t i = 0; i < state.slates.size(); ++i) state.slates[i].lambda = std::move(c.lambdas[i]);
  state.k = k;
}

/// Flexible consensus ALADIN: init, then K rounds of
/// {draw active set, local steps of active agents, coordination}.
/// The returned trace has K+1 records (row 0 is the initial state).
inline ConsensusTrace run_fc(const ConsensusProblem& problem, const FcConfig& cfg,
                             const PollingConfig& polling, int K, const FcRunOptions& opts = {}) {
  if (K < 1) throw ValidationError("K", "must be at least 1");
  cfg.validate();
  polling.validate(problem.agents());
  const VectorXd y0 = opts.y0.size() ? opts.y0 : VectorXd::Zero(problem.n);
  FcState state = fc_init(problem, y0, opts.lambda0, cfg);
  const double p = cfg.mixing_p.value_or(polling.p);

  ConsensusTrace trace;
  trace.meta.engine = "fc";
  trace.meta.variant = to_string(cfg.variant);
  trace.meta.mixing = to_string(cfg.mixing);
  trace.meta.policy = cfg.hessian.name();
  trace.meta.p = polling.mode == PollingMode::Full ? 1.0 : polling.p;
  trace.meta.rho = cfg.variant == FcVariant::ExactRhoProx ? cfg.rho : 0.0;
  trace.meta.seed = polling.seed;
  trace.meta.local_tolerance = cfg.local_tolerance;
  trace.records.reserve(static_cast<std::size_t>(K) + 1);

  auto emit = [&](std::vector<int> active) {
    ConsensusRecord rec = make_consensus_record(state, std::move(active));
    for (const auto& obs : opts.observers) obs(rec, state);
    trace.records.push_back(std::move(rec));
  };
  emit({});
  for (int k = 1; k <= K; ++k) {
    const ActiveSet active = draw_active_set(polling, problem.agents(), k);
    fc_iterate(problem, cfg, state, active, p);
    emit(active.members);
  }
  return trace;
}

}  // namespace flexaladin
