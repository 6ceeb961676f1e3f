#pragma once

// Synchronous consensus / typical ALADIN written directly from the
// closed-form coordination formulas, without polling, slates or stale
// bookkeeping. Used as the reference the flexible engines must reduce to
// when every agent is polled every round.

#include <vector>

#include <Eigen/Dense>

#include "flexaladin/fc_aladin.hpp"
#include "flexaladin/ft_aladin.hpp"
#include "flexaladin/local_solver.hpp"
#include "flexaladin/objectives.hpp"

namespace flexaladin {

/// Consensus ALADIN with every agent active in every round.
inline ConsensusTrace run_c_aladin(const ConsensusProblem& problem, const FcConfig& cfg, int K,
                                   VectorXd y, std::vector<VectorXd> lambda) {
  if (K < 1) throw ValidationError("K", "must be at least 1");
  const auto N = static_cast<std::size_t>(problem.agents());
  const Eigen::Index n = problem.n;
  if (y.size() == 0) y = VectorXd::Zero(n);
  if (lambda.empty()) lambda.assign(N, VectorXd::Zero(n));
  VectorXd mean = VectorXd::Zero(n);
  for (const auto& l : lambda) mean += l;
  mean /= static_cast<double>(N);
  for (auto& l : lambda) l -= mean;

  std::vector<VectorXd> x(N, y), g(N);
  std::vector<MatrixXd> B(N);
  for (std::size_t i = 0; i < N; ++i) {
    B[i] = initial_hessian(cfg.policy(static_cast<int>(i)), *problem.objectives[i], y);
    g[i] = -lambda[i];
  }

  ConsensusTrace trace;
  auto record = [&](int k) {
    ConsensusRecord r;
    r.k = k;
    r.y = y;
    r.lambdas = lambda;
    r.x = x;
    r.g = g;
    r.B = B;
    trace.records.push_back(std::move(r));
  };
  record(0);

  const MatrixXd I = MatrixXd::Identity(n, n);
  for (int k = 1; k <= K; ++k) {
    for (std::size_t i = 0; i < N; ++i) {
      const auto& f = *problem.objectives[i];
      if (cfg.variant == FcVariant::Inexact) {
        B[i] = update_hessian(cfg.policy(static_cast<int>(i)), f, x[i], B[i], k);
        x[i] = y - B[i].ldlt().solve(lambda[i] + f.subgradient(y));
        g[i] = f.subgradient(x[i]);
        continue;
      }
      const MatrixXd prox = cfg.variant == FcVariant::ExactRhoProx ? MatrixXd(cfg.rho * I) : B[i];
      const VectorXd xn = solve_local_consensus(f, lambda[i], y, prox, cfg.local_tolerance).x_plus;
      g[i] = prox * (y - xn) - lambda[i];
      B[i] = update_hessian(cfg.policy(static_cast<int>(i)), f, xn, B[i], k, x[i]);
      x[i] = xn;
    }
    MatrixXd H = MatrixXd::Zero(n, n);
    VectorXd rhs = VectorXd::Zero(n);
    for (std::size_t i = 0; i < N; ++i) {
      H += B[i];
      rhs += B[i] * x[i] - g[i];
    }
    y = linalg::symmetrize(H).llt().solve(rhs);
    for (std::size_t i = 0; i < N; ++i) lambda[i] = B[i] * (x[i] - y) - g[i];
    record(k);
  }
  return trace;
}

/// Typical ALADIN with every agent active in every round.
inline ResourceTrace run_t_aladin(const ResourceProblem& problem, const FtConfig& cfg, int K,
                                  std::vector<VectorXd> y, VectorXd lambda) {
  if (K < 1) throw ValidationError("K", "must be at least 1");
  const auto N = static_cast<std::size_t>(problem.agents());
  if (y.empty()) {
    for (std::size_t i = 0; i < N; ++i) y.push_back(VectorXd::Zero(problem.objectives[i]->dimension()));
  }
  if (lambda.size() == 0) lambda = VectorXd::Zero(problem.m());

  std::vector<VectorXd> x = y, g(N);
  std::vector<MatrixXd> B(N);
  for (std::size_t i = 0; i < N; ++i) {
    B[i] = initial_hessian(cfg.policy(static_cast<int>(i)), *problem.objectives[i], y[i]);
    g[i] = -problem.A[i].transpose() * lambda;
  }

  ResourceTrace trace;
  auto record = [&](int k) {
    ResourceRecord r;
    r.k = k;
    r.lambda = lambda;
    r.ys = y;
    r.x = x;
    r.g = g;
    r.B = B;
    r.feasibility = problem.coupling_residual(y).norm();
    trace.records.push_back(std::move(r));
  };
  record(0);

  for (int k = 1; k <= K; ++k) {
    for (std::size_t i = 0; i < N; ++i) {
      const auto& f = *problem.objectives[i];
      const VectorXd xn =
          solve_local_resource(f, lambda, y[i], problem.A[i], B[i], cfg.local_tolerance).x_plus;
      g[i] = B[i] * (y[i] - xn) - problem.A[i].transpose() * lambda;
      B[i] = update_hessian(cfg.policy(static_cast<int>(i)), f, xn, B[i], k, x[i]);
      x[i] = xn;
    }
    VectorXd R = -problem.b;
    MatrixXd M = MatrixXd::Zero(problem.m(), problem.m());
    for (std::size_t i = 0; i < N; ++i) {
      const MatrixXd Binv = B[i].inverse();
      R += problem.A[i] * (x[i] - Binv * g[i]);
      M += problem.A[i] * Binv * problem.A[i].transpose();
    }
    lambda = linalg::symmetrize(M).ldlt().solve(R);
    for (std::size_t i = 0; i < N; ++i) {
      y[i] = x[i] - B[i].inverse() * (g[i] + problem.A[i].transpose() * lambda);
    }
    record(k);
  }
  return trace;
}

}  // namespace flexaladin
