#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "flexaladin/benchmarks.hpp"
#include "flexaladin/diagnostics.hpp"

using namespace flexaladin;

namespace {

VectorXd v1(double a) { return VectorXd::Constant(1, a); }
MatrixXd m1(double a) { return MatrixXd::Constant(1, 1, a); }

ConsensusSolution two_agent_solution() { return {v1(1), {v1(-1), v1(1)}, 1.0}; }

PollingConfig bernoulli(double p, std::uint64_t seed) {
  PollingConfig c;
  c.p = p;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(Energy, Examples) {
  const auto sol = two_agent_solution();
  EXPECT_DOUBLE_EQ(energy(v1(0), {v1(0), v1(0)}, sol, {m1(1), m1(1)}), 4.0);
  EXPECT_DOUBLE_EQ(energy(v1(1), {v1(-1), v1(1)}, sol, {m1(1), m1(1)}), 0.0);
  // y-part weighted by B, lambda-part by B^{-1}.
  EXPECT_DOUBLE_EQ(energy(v1(0), {v1(-1), v1(1)}, sol, {m1(2), m1(2)}), 4.0);
  EXPECT_DOUBLE_EQ(energy(v1(1), {v1(0), v1(0)}, sol, {m1(2), m1(2)}), 1.0);
}

TEST(Energy, PositiveAwayFromOptimum) {
  std::mt19937_64 rng(3);
  const auto prob = benchmarks::random_quadratic_consensus(2, 3, 2, 10.0);
  const auto sol = solve_consensus_oracle(prob);
  std::vector<MatrixXd> B;
  for (int i = 0; i < 3; ++i) B.push_back(benchmarks::random_spd(rng, 2, 0.5, 4.0));
  EXPECT_NEAR(energy(sol.y_star, sol.lambda_star, sol, B), 0.0, 1e-20);
  for (int t = 0; t < 50; ++t) {
    auto l = sol.lambda_star;
    l[static_cast<std::size_t>(t % 3)] += 1e-3 * benchmarks::random_vector(rng, 2);
    EXPECT_GT(energy(sol.y_star + 1e-3 * benchmarks::random_vector(rng, 2), l, sol, B), 0.0);
  }
}

TEST(Residuals, Consensus) {
  FcState s;
  s.y = v1(1);
  s.slates = {{v1(0), v1(0), m1(1), v1(-1), false}, {v1(1), v1(0), m1(1), v1(1), false}};
  const auto r = consensus_residuals(s);
  EXPECT_DOUBLE_EQ(r.primal, 1.0);
  EXPECT_DOUBLE_EQ(r.dual_sum, 0.0);
}

TEST(Residuals, ConsensusFixedPoint) {
  const auto prob = benchmarks::two_agent_quadratic();
  const auto sol = solve_consensus_oracle(prob);
  const auto s = fc_init(prob, sol.y_star, sol.lambda_star, FcConfig{});
  const auto r = consensus_residuals(s);
  EXPECT_LE(r.primal, 1e-10);
  EXPECT_LE(r.dual_sum, 1e-10);
}

TEST(Residuals, Resource) {
  const auto prob = benchmarks::scalar_resource();
  FtConfig cfg;
  FtState s = ft_init(prob, {v1(0), v1(0)}, v1(0), cfg);
  ft_iterate(prob, cfg, s, ActiveSet{1, {0, 1}});
  EXPECT_LE(resource_residuals(s, prob).feasibility, 1e-12);
  // Exact curvature: y and lambda are optimal after one round, x after two.
  ft_iterate(prob, cfg, s, ActiveSet{2, {0, 1}});
  auto r = resource_residuals(s, prob);
  EXPECT_LE(r.feasibility, 1e-12);
  EXPECT_LE(r.stationarity, 1e-12);

  const auto rp = benchmarks::random_quadratic_resource(4, 4, 2);
  const auto sol = solve_resource_oracle(rp);
  FtState opt = ft_init(rp, sol.x_star, sol.lambda_star, cfg);
  for (std::size_t i = 0; i < opt.slates.size(); ++i) opt.slates[i].g = rp.objectives[i]->gradient(sol.x_star[i]);
  EXPECT_LE(resource_residuals(opt, rp).stationarity, 1e-9);
  ft_iterate(rp, cfg, opt, ActiveSet{1, {1}});
  EXPECT_LE(resource_residuals(opt, rp).feasibility, 1e-9);
}

TEST(FitLinearRate, Examples) {
  EXPECT_NEAR(fit_linear_rate({4, 1, 0.25}, 0), 0.25, 1e-14);
  EXPECT_NEAR(fit_linear_rate({3, 3, 3}, 0), 1.0, 1e-14);
  EXPECT_NEAR(fit_linear_rate({1, 0.5, 0.26, 0.124}, 0), 0.5, 0.02);
  EXPECT_NEAR(fit_linear_rate({100, 8, 4, 2, 1}, 1), 0.5, 1e-14);
  EXPECT_THROW(fit_linear_rate({1, 2}, 0), ValidationError);
}

TEST(Theorem1, OneStepSolveWithExactValuedFixedMatrices) {
  const auto prob = benchmarks::random_quadratic_consensus(5, 5, 2, 100.0);
  FcConfig cfg;
  for (const auto& f : prob.objectives) {
    cfg.agent_hessian.push_back(HessianPolicy::fixed(dynamic_cast<const QuadraticObjective&>(*f).Q()));
  }
  FcRunOptions o;
  o.y0 = VectorXd::Constant(2, 3.0);
  const auto ens = theorem1_ensemble(prob, cfg, 1.0, 5, 1, 0, o);
  EXPECT_LE(ens.mean[1], 1e-18 * ens.mean[0]);
}

TEST(Theorem1, MeanEnergyContracts) {
  const auto prob = benchmarks::random_quadratic_consensus(6, 5, 2, 100.0);
  FcConfig cfg;
  cfg.hessian = HessianPolicy::fixed_scaled(10.0);
  std::vector<double> alphas;
  for (double p : {0.25, 0.5, 0.75, 1.0}) {
    const auto ens = theorem1_ensemble(prob, cfg, p, 30, 500, 77);
    EXPECT_TRUE(ens.mean_nonincreasing) << "p=" << p;
    EXPECT_LT(ens.alpha_hat, 1.0) << "p=" << p;
    EXPECT_TRUE(ens.never_active.empty());
    alphas.push_back(ens.alpha_hat);
  }
  for (std::size_t j = 1; j < alphas.size(); ++j) EXPECT_LE(alphas[j], alphas[j - 1] + 0.02);
}

TEST(Theorem1, Preconditions) {
  FcConfig exact;
  EXPECT_THROW(theorem1_ensemble(benchmarks::two_agent_quadratic(), exact, 0.5, 10, 5, 0), ValidationError);
  FcConfig fixed;
  fixed.hessian = HessianPolicy::fixed_scaled(1.0);
  EXPECT_THROW(theorem1_ensemble(benchmarks::two_agent_quadratic(), fixed, 0.5, 10, 0, 0), ValidationError);
  EXPECT_THROW(theorem1_ensemble(benchmarks::trig_pair(), fixed, 0.5, 10, 5, 0), ValidationError);
}

TEST(Theorem2, ExactPolicyHasZeroMismatch) {
  const auto prob = benchmarks::trig_pair();
  const auto sol = solve_consensus_oracle(prob);
  FcConfig cfg;
  cfg.variant = FcVariant::ExactRhoProx;
  cfg.rho = 2.0;
  FcRunOptions o;
  o.y0 = sol.y_star.array() + 0.05;
  const auto t = run_fc(prob, cfg, bernoulli(1.0, 0), 6, o);
  const auto rep = theorem2_report(t, prob, sol, cfg.rho);
  EXPECT_EQ(rep.hessian_clamps, 0);
  EXPECT_DOUBLE_EQ(rep.gamma, 0.0);
  EXPECT_DOUBLE_EQ(rep.bound, 0.0);
}

TEST(Theorem2, ConstantOffsetGivesMeasuredGamma) {
  const auto prob = benchmarks::two_agent_quadratic();
  const auto sol = solve_consensus_oracle(prob);
  FcConfig cfg;
  cfg.variant = FcVariant::ExactRhoProx;
  cfg.rho = 2.0;
  cfg.hessian = HessianPolicy::fixed(m1(1.1));
  const auto t = run_fc(prob, cfg, bernoulli(0.5, 2), 8);
  const auto rep = theorem2_report(t, prob, sol, 2.0);
  EXPECT_NEAR(rep.gamma, 0.1, 1e-15);
  EXPECT_NEAR(rep.sigma, 3.1, 1e-15);
}

TEST(Theorem2, SigmaOfUnitB) {
  const auto prob = benchmarks::two_agent_quadratic();
  const auto sol = solve_consensus_oracle(prob);
  FcConfig cfg;
  cfg.variant = FcVariant::ExactRhoProx;
  cfg.rho = 2.0;
  cfg.hessian = HessianPolicy::fixed(m1(1.0));
  const auto t = run_fc(prob, cfg, bernoulli(1.0, 0), 3);
  EXPECT_DOUBLE_EQ(theorem2_report(t, prob, sol, 2.0).sigma, 3.0);
}

TEST(Theorem2, RatioWithinBoundWhereAssumptionHolds) {
  const auto prob = benchmarks::trig_pair();
  const auto sol = solve_consensus_oracle(prob);
  FcConfig cfg;
  cfg.variant = FcVariant::ExactRhoProx;
  cfg.rho = 2.0;
  cfg.hessian = HessianPolicy::fixed(prob.objectives[0]->hessian(sol.y_star) + m1(0.1));
  FcRunOptions o;
  o.y0 = sol.y_star.array() + 0.08;
  const auto traces = run_fc_ensemble(prob, cfg, bernoulli(1.0, 0), 12, 5, 0, o);
  const auto rep = theorem2_report(traces, prob, sol, 2.0);
  // The offset is exactly 0.1 at the optimum; iterates away from it only add.
  EXPECT_GE(rep.gamma, 0.1 - 1e-12);
  EXPECT_FALSE(rep.checked.empty());
  for (int k : rep.checked) EXPECT_LE(rep.ratios[static_cast<std::size_t>(k)], rep.bound + 0.05);
  // Each iteration from 2 on is classified exactly once.
  EXPECT_EQ(rep.checked.size() + rep.assumption_violations.size() + rep.below_floor.size(), 11u);
}

TEST(Theorem3, ConstantBGivesConstantConditionRatio) {
  const auto prob = benchmarks::lad_triplet();
  const auto sol = solve_consensus_oracle(prob);
  FcConfig cfg;
  cfg.variant = FcVariant::Inexact;
  constexpr double beta = 2.0;
  cfg.hessian = HessianPolicy::fixed_scaled(beta);
  FcRunOptions o;
  o.y0 = v1(3.0);
  const auto t = run_fc(prob, cfg, bernoulli(0.7, 1), 400, o);
  const auto a = theorem3_report(t, prob, sol, 0.7, 100);
  const auto b = theorem3_report(t, prob, sol, 0.7, 400);
  for (double psi : b.psi_min_sequence) EXPECT_NEAR(psi, 1.0 / (3 * beta), 1e-15);
  for (double psi : b.psi_max_sequence) EXPECT_NEAR(psi, 1.0 / (3 * beta), 1e-15);
  EXPECT_NEAR(a.condition_ratio, 9.0 / (3 * beta), 1e-12);
  EXPECT_NEAR(b.condition_ratio, a.condition_ratio, 1e-12);
}

TEST(Theorem3, ScheduleShrinksConditionRatio) {
  const auto prob = benchmarks::lad_triplet();
  const auto sol = solve_consensus_oracle(prob);
  FcConfig cfg;
  cfg.variant = FcVariant::Inexact;
  cfg.hessian = HessianPolicy::schedule(1.0, 0.5);
  FcRunOptions o;
  o.y0 = v1(-3.7);
  const auto t = run_fc(prob, cfg, bernoulli(0.7, 3), 10000, o);
  const auto a = theorem3_report(t, prob, sol, 0.7, 1000);
  const auto b = theorem3_report(t, prob, sol, 0.7, 10000);
  for (int k = 1; k <= 10000; k += 997) {
    EXPECT_NEAR(b.psi_min_sequence[static_cast<std::size_t>(k - 1)], 1.0 / (3.0 * std::sqrt(k)), 1e-15);
  }
  EXPECT_LT(b.condition_ratio, a.condition_ratio);
  EXPECT_LT(b.phi1 + b.phi2, a.phi1 + a.phi2);
  EXPECT_LE(b.best_gap, a.best_gap);
  EXPECT_LE(b.best_gap, 0.05);
  ASSERT_TRUE(b.G_analytic.has_value());
  EXPECT_DOUBLE_EQ(*b.G_analytic, 3.0);
  EXPECT_GE(b.G, b.G_empirical);

  // Independent evaluation of the condition ratio from its definition.
  double smin = 0, smax2 = 0;
  for (int k = 1; k <= 1000; ++k) {
    smin += 1.0 / (3.0 * std::sqrt(k));
    smax2 += 1.0 / (9.0 * k);
  }
  EXPECT_NEAR(a.condition_ratio, smax2 * 9.0 / smin, 1e-10);
}

TEST(Theorem3, BestGapIsNonincreasingInHorizon) {
  const auto prob = benchmarks::lad_triplet();
  const auto sol = solve_consensus_oracle(prob);
  FcConfig cfg;
  cfg.variant = FcVariant::Inexact;
  cfg.hessian = HessianPolicy::schedule(1.0, 0.5);
  FcRunOptions o;
  o.y0 = v1(10.0);
  const auto t = run_fc(prob, cfg, bernoulli(0.7, 8), 600, o);
  double prev = INFINITY;
  for (int K = 2; K <= 600; K += 17) {
    const double g = theorem3_report(t, prob, sol, 0.7, K).best_gap;
    EXPECT_LE(g, prev);
    prev = g;
  }
}

TEST(Theorem3, RequiresInexactTrace) {
  const auto prob = benchmarks::two_agent_quadratic();
  const auto t = run_fc(prob, FcConfig{}, bernoulli(1.0, 0), 5);
  EXPECT_THROW(theorem3_report(t, prob, solve_consensus_oracle(prob), 1.0), ValidationError);
}
