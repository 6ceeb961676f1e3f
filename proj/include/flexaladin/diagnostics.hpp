#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flexaladin/errors.hpp"
#include "flexaladin/fc_aladin.hpp"
#include "flexaladin/ft_aladin.hpp"
#include "flexaladin/linalg.hpp"
#include "flexaladin/objectives.hpp"
#include "flexaladin/trace.hpp"

namespace flexaladin {

// ---------------------------------------------------------------------------
// Energy and residuals

/// L(y, lambda) = sum_i ||y - y*||^2_{B_i} + ||lambda_i - lambda_i*||^2_{B_i^{-1}}
inline double energy(const VectorXd& y, const std::vector<VectorXd>& lambdas,
                     const ConsensusSolution& sol, const std::vector<MatrixXd>& B) {
  if (lambdas.size() != B.size() || lambdas.size() != sol.lambda_star.size()) {
    throw DimensionError("energy: agent count mismatch");
  }
  const VectorXd dy = y - sol.y_star;
  double L = 0.0;
  for (std::size_t i = 0; i < B.size(); ++i) {
    Eigen::LLT<MatrixXd> llt(B[i]);
    if (llt.info() != Eigen::Success) throw NumericError("energy: B_" + std::to_string(i) + " is singular");
    const VectorXd dl = lambdas[i] - sol.lambda_star[i];
    L += dy.dot(B[i] * dy) + dl.dot(llt.solve(dl));
  }
  return L;
}

inline double energy(const ConsensusRecord& r, const ConsensusSolution& sol) {
  return energy(r.y, r.lambdas, sol, r.B);
}

/// Observer that stores the energy of every record.
inline FcObserver energy_observer(const ConsensusSolution& sol) {
  return [sol](ConsensusRecord& rec, const FcState&) { rec.energy = energy(rec, sol); };
}

struct ConsensusResiduals {
  double primal = 0.0;    // max_i ||x_i - y||
  double dual_sum = 0.0;  // ||sum_i lambda_i||
};

inline ConsensusResiduals consensus_residuals(const FcState& s) {
  ConsensusResiduals r;
  VectorXd sum = VectorXd::Zero(s.y.size());
  for (const auto& sl : s.slates) {
    r.primal = std::max(r.primal, (sl.x - s.y).norm());
    sum += sl.lambda;
  }
  r.dual_sum = sum.norm();
  return r;
}

struct ResourceResiduals {
  double feasibility = 0.0;   // ||sum_i A_i y_i - b||
  double stationarity = 0.0;  // max_i ||g_i + A_i' lambda||
};

inline ResourceResiduals resource_residuals(const FtState& s, const ResourceProblem& p) {
  ResourceResiduals r;
  std::vector<VectorXd> ys;
  for (std::size_t i = 0; i < s.slates.size(); ++i) {
    ys.push_back(s.slates[i].y);
    r.stationarity = std::max(r.stationarity, (s.slates[i].g + p.A[i].transpose() * s.lambda).norm());
  }
  r.feasibility = p.coupling_residual(ys).norm();
  return r;
}

// ---------------------------------------------------------------------------
// Rate estimation

/// Values below this are treated as exact zeros and end the fit window.
inline constexpr double kRateFitFloor = 1e-300;

/// exp(slope) of the least-squares line through (k, log v_k), k >= burn_in.
/// Returns 0 if the sequence reaches zero immediately after the burn-in.
inline double fit_linear_rate(const std::vector<double>& values, int burn_in) {
  if (burn_in < 0 || values.size() < static_cast<std::size_t>(burn_in) + 3) {
    throw ValidationError("values", "need at least burn_in + 3 values");
  }
  std::vector<double> logs;
  for (std::size_t k = static_cast<std::size_t>(burn_in); k < values.size(); ++k) {
    if (!(values[k] >= kRateFitFloor)) break;
    logs.push_back(std::log(values[k]));
  }
  if (logs.size() < 2) return 0.0;
  const double m = static_cast<double>(logs.size());
  const double xbar = (m - 1.0) / 2.0;
  double ybar = 0.0;
  for (double l : logs) ybar += l;
  ybar /= m;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t j = 0; j < logs.size(); ++j) {
    const double dx = static_cast<double>(j) - xbar;
    sxy += dx * (logs[j] - ybar);
    sxx += dx * dx;
  }
  return std::exp(sxy / sxx);
}

// ---------------------------------------------------------------------------
// Ensembles

/// Runs M independent FC-ALADIN trials that differ only in the polling seed
/// (base_seed + t). Trials are returned in seed order.
inline std::vector<ConsensusTrace> run_fc_ensemble(const ConsensusProblem& problem, const FcConfig& cfg,
                                                   PollingConfig polling, int K, int M,
                                                   std::uint64_t base_seed, const FcRunOptions& opts = {}) {
  if (M < 1) throw ValidationError("trials", "must be at least 1");
  std::vector<ConsensusTrace> out;
  out.reserve(static_cast<std::size_t>(M));
  for (int t = 0; t < M; ++t) {
    polling.seed = base_seed + static_cast<std::uint64_t>(t);
    out.push_back(run_fc(problem, cfg, polling, K, opts));
  }
  return out;
}

/// Monte Carlo estimate of E[L(y^k, lambda^k)].
struct TrialEnsemble {
  int trials = 0;
  double p = 1.0;
  /// energies[t][k]: trial t, record k (k = 0 is the initial point).
  std::vector<std::vector<double>> energies;
  std::vector<double> mean;
  /// Standard error of the mean of L^{k+1} - L^k, per k.
  std::vector<double> step_stderr;
  double alpha_hat = 1.0;
  /// max over k >= 1 of mean[k+1] / mean[k].
  double max_step_ratio = 0.0;
  /// mean[k+1] <= mean[k] + 3 * step_stderr[k] for every k >= 1.
  bool mean_nonincreasing = true;
  std::vector<int> increasing_steps;
  /// Agents never polled, over all trials.
  std::vector<int> never_active;
};

/// Expectation-level contraction check for strongly convex quadratic
/// consensus problems with constant Hessian approximations.
inline TrialEnsemble theorem1_ensemble(const ConsensusProblem& problem, const FcConfig& cfg,
                                       double p, int K, int M, std::uint64_t base_seed,
                                       const FcRunOptions& opts = {}) {
  for (const auto& f : problem.objectives) {
    const auto* q = dynamic_cast<const QuadraticObjective*>(f.get());
    if (!q || q->mu() <= 0.0) throw ValidationError("problem", "needs strongly convex quadratic objectives");
  }
  bool fixed = cfg.agent_hessian.empty() ? cfg.hessian.is_fixed() : true;
  for (const auto& h : cfg.agent_hessian) fixed = fixed && h.is_fixed();
  if (!fixed) throw ValidationError("hessian.policy", "needs constant (fixed) matrices");
  if (K < 3) throw ValidationError("K", "need at least 3 iterations to fit a rate");
  const ConsensusSolution sol = solve_consensus_oracle(problem);

  PollingConfig polling;
  polling.p = p;
  polling.mode = p >= 1.0 ? PollingMode::Full : PollingMode::Bernoulli;
  const auto traces = run_fc_ensemble(problem, cfg, polling, K, M, base_seed, opts);

  TrialEnsemble ens;
  ens.trials = M;
  ens.p = p;
  const std::size_t rows = static_cast<std::size_t>(K) + 1;
  ens.mean.assign(rows, 0.0);
  for (const auto& tr : traces) {
    std::vector<double> L;
    for (const auto& rec : tr.records) L.push_back(energy(rec, sol));
    for (std::size_t k = 0; k < rows; ++k) ens.mean[k] += L[k] / M;
    ens.energies.push_back(std::move(L));
    auto miss = verify_coverage(tr.active_sets(), problem.agents());
    ens.never_active.insert(ens.never_active.end(), miss.begin(), miss.end());
  }
  std::sort(ens.never_active.begin(), ens.never_active.end());
  ens.never_active.erase(std::unique(ens.never_active.begin(), ens.never_active.end()), ens.never_active.end());

  ens.step_stderr.assign(rows - 1, 0.0);
  for (std::size_t k = 0; k + 1 < rows; ++k) {
    double md = ens.mean[k + 1] - ens.mean[k];
    double var = 0.0;
    for (const auto& L : ens.energies) {
      const double d = (L[k + 1] - L[k]) - md;
      var += d * d;
    }
    var = M > 1 ? var / (M - 1) : 0.0;
    ens.step_stderr[k] = std::sqrt(var / M);
  }
  // Rounding-level allowance relative to the first post-init energy.
  const double round_off = 1e-13 * ens.mean[1];
  for (std::size_t k = 1; k + 1 < rows; ++k) {
    if (ens.mean[k] > 0.0) ens.max_step_ratio = std::max(ens.max_step_ratio, ens.mean[k + 1] / ens.mean[k]);
    if (ens.mean[k + 1] > ens.mean[k] + 3.0 * ens.step_stderr[k] + round_off) {
      ens.mean_nonincreasing = false;
      ens.increasing_steps.push_back(static_cast<int>(k));
    }
  }
  ens.alpha_hat = fit_linear_rate(ens.mean, 1);
  return ens;
}

// ---------------------------------------------------------------------------
// Local rate of the rho-prox variant

struct Theorem2Report {
  /// max ||B_i - hess f_i(x_i+)|| over iterations and active agents.
  double gamma = 0.0;
  /// min_i lambda_min(B_i + rho I).
  double sigma = 0.0;
  double rho = 0.0;
  /// (rho + 1) gamma / sigma
  double bound = 0.0;
  /// Mean over trials of rho N / sigma ||y - y*|| + 1/sigma sum_i ||lambda_i - lambda_i*||, per record.
  std::vector<double> merit_sequence;
  /// ratio[k] = merit[k] / merit[k-1] for k >= 1 (ratio[0] unused).
  std::vector<double> ratios;
  /// Ensemble-mean version of the monitored assumption, per iteration k >= 1.
  std::vector<bool> assumption_holds;
  /// Fraction of trials where the realized assumption held, per iteration.
  std::vector<double> assumption_rate_realized;
  std::vector<int> assumption_violations;
  /// Iterations k >= 2 whose ratio was compared against bound + slack.
  std::vector<int> checked;
  /// Iterations skipped because merit[k-1] was at the rounding floor.
  std::vector<int> below_floor;
  double max_checked_ratio = 0.0;
  int hessian_clamps = 0;
};

/// Merit values at or below kMeritRelFloor * merit[0] (or kMeritAbsFloor)
/// are at the local-solve rounding floor and are not rate-checked.
inline constexpr double kMeritRelFloor = 1e-8;
inline constexpr double kMeritAbsFloor = 1e-12;

inline Theorem2Report theorem2_report(const std::vector<ConsensusTrace>& traces, const ConsensusProblem& problem,
                                      const ConsensusSolution& sol, double rho) {
  if (traces.empty()) throw ValidationError("traces", "need at least one trace");
  if (!problem.all_smooth()) throw CapabilityError("theorem2_report needs smooth objectives");
  if (!(rho > 0.0)) throw ValidationError("rho", "must be positive");
  const auto N = static_cast<std::size_t>(problem.agents());
  const std::size_t rows = traces.front().records.size();
  const MatrixXd I = MatrixXd::Identity(problem.n, problem.n);

  Theorem2Report rep;
  rep.rho = rho;
  rep.sigma = std::numeric_limits<double>::infinity();
  for (const auto& tr : traces) {
    if (tr.records.size() != rows) throw ValidationError("traces", "all traces need the same length");
    for (const auto& rec : tr.records) {
      for (std::size_t i = 0; i < N; ++i) rep.sigma = std::min(rep.sigma, linalg::min_eigenvalue(rec.B[i] + rho * I));
      rep.hessian_clamps += static_cast<int>(rec.clamped.size());
      if (rec.k == 0) continue;
      for (int i : rec.active) {
        const auto ui = static_cast<std::size_t>(i);
        const MatrixXd H = problem.objectives[ui]->hessian(rec.x[ui]);
        rep.gamma = std::max(rep.gamma, linalg::spectral_norm_sym(rec.B[ui] - H));
      }
    }
  }
  rep.bound = (rho + 1.0) * rep.gamma / rep.sigma;

  const double Nd = static_cast<double>(N);
  auto merit = [&](const ConsensusRecord& r) {
    double m = rho * Nd / rep.sigma * (r.y - sol.y_star).norm();
    for (std::size_t i = 0; i < N; ++i) m += (r.lambdas[i] - sol.lambda_star[i]).norm() / rep.sigma;
    return m;
  };
  auto spread = [&](const ConsensusRecord& r) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) s += (r.x[i] - sol.y_star).norm();
    return s;
  };

  const double M = static_cast<double>(traces.size());
  rep.merit_sequence.assign(rows, 0.0);
  std::vector<double> mean_spread(rows, 0.0);
  rep.assumption_rate_realized.assign(rows, 0.0);
  for (const auto& tr : traces) {
    for (std::size_t k = 0; k < rows; ++k) {
      rep.merit_sequence[k] += merit(tr.records[k]) / M;
      mean_spread[k] += spread(tr.records[k]) / M;
      if (k >= 1 && merit(tr.records[k - 1]) >= spread(tr.records[k])) rep.assumption_rate_realized[k] += 1.0 / M;
    }
  }
  const double floor = std::max(kMeritAbsFloor, kMeritRelFloor * rep.merit_sequence[0]);
  rep.ratios.assign(rows, 0.0);
  rep.assumption_holds.assign(rows, true);
  for (std::size_t k = 1; k < rows; ++k) {
    const double prev = rep.merit_sequence[k - 1];
    rep.ratios[k] = prev > 0.0 ? rep.merit_sequence[k] / prev : 0.0;
    rep.assumption_holds[k] = prev >= mean_spread[k];
    if (k < 2) continue;
    if (!rep.assumption_holds[k]) {
      rep.assumption_violations.push_back(static_cast<int>(k));
    } else if (prev <= floor) {
      rep.below_floor.push_back(static_cast<int>(k));
    } else {
      rep.checked.push_back(static_cast<int>(k));
      rep.max_checked_ratio = std::max(rep.max_checked_ratio, rep.ratios[k]);
    }
  }
  return rep;
}

inline Theorem2Report theorem2_report(const ConsensusTrace& trace, const ConsensusProblem& problem,
                                      const ConsensusSolution& sol, double rho) {
  return theorem2_report(std::vector<ConsensusTrace>{trace}, problem, sol, rho);
}

// ---------------------------------------------------------------------------
// Inexact variant: step-size condition and optimality gap

struct Theorem3Report {
  int horizon = 0;
  double p = 1.0;
  /// Extreme eigenvalues of (sum_i B_i^k)^{-1}, k = 1..K.
  std::vector<double> psi_min_sequence;
  std::vector<double> psi_max_sequence;
  /// Bound used in the quantities below: analytic when known, else empirical.
  double G = 0.0;
  double G_empirical = 0.0;
  std::optional<double> G_analytic;
  double phi1 = 0.0;
  double phi2 = 0.0;
  /// sum_k (psi_max^k)^2 G^2 / sum_k psi_min^k
  double condition_ratio = 0.0;
  /// min_{k=1..K} F(y^k) - f*
  double best_gap = 0.0;
  /// Right-hand side of the summed descent inequality bounding best_gap.
  double gap_bound = 0.0;
};

/// ||sum_i df_i|| <= G holds analytically for all-L1 problems with G = N sqrt(n).
inline std::optional<double> analytic_subgradient_bound(const ConsensusProblem& p) {
  for (const auto& f : p.objectives) {
    if (!dynamic_cast<const AbsDeviationObjective*>(f.get())) return std::nullopt;
  }
  return p.agents() * std::sqrt(static_cast<double>(p.n));
}

/// `horizon` limits the evaluation to the first K iterations of the trace.
inline Theorem3Report theorem3_report(const ConsensusTrace& trace, const ConsensusProblem& problem,
                                      const ConsensusSolution& sol, double p,
                                      std::optional<int> horizon = std::nullopt) {
  if (trace.meta.variant != to_string(FcVariant::Inexact)) {
    throw ValidationError("trace", "missing schedule metadata: trace is not from the inexact variant");
  }
  const int K = horizon.value_or(static_cast<int>(trace.records.size()) - 1);
  if (K < 2 || K >= static_cast<int>(trace.records.size())) {
    throw ValidationError("horizon", "must lie in [2, trace length - 1]");
  }
  const auto N = static_cast<std::size_t>(problem.agents());
  const auto& R = trace.records;

  Theorem3Report rep;
  rep.horizon = K;
  rep.p = p;
  double sum_min = 0.0, sum_max = 0.0, sum_max_sq = 0.0;
  rep.best_gap = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= K; ++k) {
    const auto& rec = R[static_cast<std::size_t>(k)];
    MatrixXd S = MatrixXd::Zero(problem.n, problem.n);
    VectorXd gsum = VectorXd::Zero(problem.n);
    for (std::size_t i = 0; i < N; ++i) {
      S += rec.B[i];
      gsum += rec.g[i];
    }
    const double pmin = 1.0 / linalg::max_eigenvalue(S);
    const double pmax = 1.0 / linalg::min_eigenvalue(S);
    rep.psi_min_sequence.push_back(pmin);
    rep.psi_max_sequence.push_back(pmax);
    sum_min += pmin;
    sum_max += pmax;
    sum_max_sq += pmax * pmax;
    rep.G_empirical = std::max(rep.G_empirical, gsum.norm());
    rep.best_gap = std::min(rep.best_gap, problem.value(rec.y) - sol.f_star);
  }
  rep.G_analytic = analytic_subgradient_bound(problem);
  rep.G = rep.G_analytic.value_or(rep.G_empirical);

  // y^j of the recursion is record j-1; x^{j+1} is computed from it in record j.
  auto spread = [&](int yrow, int xrow) {
    double s = 0.0;
    for (std::size_t i = 0; i < N; ++i) {
      s += (R[static_cast<std::size_t>(yrow)].y - R[static_cast<std::size_t>(xrow)].x[i]).norm();
    }
    return s;
  };
  rep.phi1 = p * rep.G * sum_max * spread(K - 1, K) / (2.0 * sum_min);
  rep.phi2 = (1.0 - p) * rep.G * sum_max * spread(K - 2, K - 1) / (2.0 * sum_min);
  rep.condition_ratio = sum_max_sq * rep.G * rep.G / sum_min;

  auto d2 = [&](int row) { return (R[static_cast<std::size_t>(row)].y - sol.y_star).squaredNorm(); };
  rep.gap_bound = ((1.0 - p) * d2(0) + d2(1) + (p - 1.0) * d2(K - 2) - d2(K - 1)) / (4.0 * sum_min) +
                  rep.condition_ratio + rep.phi1 + rep.phi2;
  return rep;
}

}  // namespace flexaladin
