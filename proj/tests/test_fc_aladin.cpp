#include <cmath>

#include <gtest/gtest.h>

#include "flexaladin/benchmarks.hpp"
#include "flexaladin/fc_aladin.hpp"
#include "flexaladin/full_participation.hpp"

using namespace flexaladin;

namespace {

VectorXd v1(double a) { return VectorXd::Constant(1, a); }
MatrixXd m1(double a) { return MatrixXd::Constant(1, 1, a); }

FcSlate slate(double x, double g, double B, double lambda = 0.0) { return {v1(x), v1(g), m1(B), v1(lambda), false}; }

FcConfig fixed_identity() {
  FcConfig c;
  c.hessian = HessianPolicy::fixed(MatrixXd::Identity(1, 1));
  return c;
}

PollingConfig bernoulli(double p, std::uint64_t seed) {
  PollingConfig c;
  c.p = p;
  c.seed = seed;
  return c;
}

}  // namespace

TEST(FcInit, LambdaIsRecentered) {
  const auto prob = benchmarks::two_agent_quadratic();
  auto s = fc_init(prob, v1(0), {v1(1), v1(1)}, fixed_identity());
  EXPECT_DOUBLE_EQ(s.slates[0].lambda[0], 0.0);
  EXPECT_DOUBLE_EQ(s.slates[1].lambda[0], 0.0);
  s = fc_init(prob, v1(0), {v1(-1), v1(1)}, fixed_identity());
  EXPECT_DOUBLE_EQ(s.slates[0].lambda[0], -1.0);
  EXPECT_DOUBLE_EQ(s.slates[1].lambda[0], 1.0);
}

TEST(FcInit, Placeholders) {
  const auto s = fc_init(benchmarks::two_agent_quadratic(), v1(0), {}, fixed_identity());
  for (const auto& sl : s.slates) {
    EXPECT_DOUBLE_EQ(sl.x[0], 0.0);
    EXPECT_DOUBLE_EQ(sl.g[0], 0.0);
    EXPECT_DOUBLE_EQ(sl.B(0, 0), 1.0);
  }
  EXPECT_THROW(fc_init(benchmarks::two_agent_quadratic(), VectorXd::Zero(2), {}, fixed_identity()), DimensionError);
  EXPECT_THROW(fc_init(benchmarks::two_agent_quadratic(), v1(0), {v1(0)}, fixed_identity()), DimensionError);
}

TEST(FcAgentStep, Examples) {
  const auto prob = benchmarks::two_agent_quadratic();
  const FcConfig cfg = fixed_identity();
  const auto s = fc_init(prob, v1(0), {}, cfg);
  const auto a = fc_agent_step(prob, s, 0, cfg, 1);
  const auto b = fc_agent_step(prob, s, 1, cfg, 1);
  EXPECT_NEAR(a.x[0], 0.0, 1e-14);
  EXPECT_NEAR(a.g[0], 0.0, 1e-14);
  EXPECT_NEAR(b.x[0], 1.0, 1e-14);
  EXPECT_NEAR(b.g[0], -1.0, 1e-14);
}

TEST(FcAgentStep, FixedPoint) {
  const auto prob = benchmarks::two_agent_quadratic();
  const auto sol = solve_consensus_oracle(prob);
  FcConfig cfg;
  const auto s = fc_init(prob, sol.y_star, sol.lambda_star, cfg);
  for (int i = 0; i < 2; ++i) {
    const auto n = fc_agent_step(prob, s, i, cfg, 1);
    EXPECT_NEAR(n.x[0], 1.0, 1e-12);
    EXPECT_NEAR(n.g[0], prob.objectives[static_cast<std::size_t>(i)]->gradient(sol.y_star)[0], 1e-12);
  }
}

TEST(FcAgentStep, RhoProx) {
  ConsensusProblem prob({QuadraticObjective::scalar(1, -2, 2)});
  FcConfig cfg;
  cfg.variant = FcVariant::ExactRhoProx;
  cfg.rho = 2.0;
  const auto s = fc_init(prob, v1(0), {}, cfg);
  EXPECT_NEAR(fc_agent_step(prob, s, 0, cfg, 1).x[0], 2.0 / 3.0, 1e-14);
}

TEST(FcCoordinate, Examples) {
  FcState s;
  s.y = v1(0);
  s.slates = {slate(0, 0, 1), slate(1, -1, 1)};
  auto c = fc_coordinate(s);
  EXPECT_NEAR(c.y[0], 1.0, 1e-14);
  EXPECT_NEAR(c.lambdas[0][0], -1.0, 1e-14);
  EXPECT_NEAR(c.lambdas[1][0], 1.0, 1e-14);

  // N = 1: y+ = x - g / B, lambda+ = 0.
  s.slates = {slate(3, 2, 4)};
  c = fc_coordinate(s);
  EXPECT_NEAR(c.y[0], 3 - 0.5, 1e-14);
  EXPECT_NEAR(c.lambdas[0][0], 0.0, 1e-14);
}

TEST(FcCoordinate, FixedPointOnRandomInstance) {
  const auto prob = benchmarks::random_quadratic_consensus(4, 5, 3, 30.0);
  const auto sol = solve_consensus_oracle(prob);
  FcState s;
  s.y = VectorXd::Zero(3);
  for (std::size_t i = 0; i < 5; ++i) {
    FcSlate sl;
    sl.x = sol.y_star;
    sl.g = prob.objectives[i]->gradient(sol.y_star);
    sl.B = (1.0 + static_cast<double>(i)) * MatrixXd::Identity(3, 3);
    sl.lambda = sol.lambda_star[i];
    s.slates.push_back(sl);
  }
  const auto c = fc_coordinate(s);
  EXPECT_LE((c.y - sol.y_star).norm(), 1e-10);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_LE((c.lambdas[i] - sol.lambda_star[i]).norm(), 1e-10);
}

TEST(FcInexact, AgentStepExamples) {
  auto [x, g] = fc_inexact_agent_step(*QuadraticObjective::scalar(1, -2, 2), v1(0), v1(0), m1(2));
  EXPECT_DOUBLE_EQ(x[0], 1.0);
  EXPECT_DOUBLE_EQ(g[0], -1.0);
  std::tie(x, g) = fc_inexact_agent_step(*QuadraticObjective::scalar(1, 0), v1(0), v1(0), m1(7));
  EXPECT_DOUBLE_EQ(x[0], 0.0);
  EXPECT_DOUBLE_EQ(g[0], 0.0);
  std::tie(x, g) = fc_inexact_agent_step(*AbsDeviationObjective::scalar(5), v1(1), v1(0), m1(1));
  EXPECT_DOUBLE_EQ(x[0], 2.0);
  EXPECT_DOUBLE_EQ(g[0], -1.0);
}

TEST(FcInexact, CoordinateMixing) {
  FcConfig cfg;
  cfg.variant = FcVariant::Inexact;
  cfg.hessian = HessianPolicy::fixed(m1(1));
  FcState s;
  s.y = v1(0);
  s.slates = {slate(0, 0, 1), slate(1, -1, 1)};
  const ActiveSet both{1, {0, 1}};
  for (Mixing m : {Mixing::Realized, Mixing::MeanField}) {
    cfg.mixing = m;
    EXPECT_NEAR(fc_inexact_coordinate(s, s.slates, both, cfg, 1.0).y[0], 1.0, 1e-14);
  }

  // Mean field, p = 0.5, one agent moving from x = 0 to x = 2 with g = 0.
  cfg.mixing = Mixing::MeanField;
  FcState one;
  one.y = v1(0);
  one.slates = {slate(2, 0, 1)};
  const std::vector<FcSlate> previous = {slate(0, 0, 1)};
  const auto c = fc_inexact_coordinate(one, previous, ActiveSet{2, {0}}, cfg, 0.5);
  EXPECT_NEAR(c.y[0], 1.0, 1e-14);
  EXPECT_NEAR(c.lambdas[0][0], 1.0 * (2.0 - 1.0) - 0.0, 1e-14);
}

TEST(FcIterate, EmptyActiveSetIsIdempotent) {
  const auto prob = benchmarks::random_quadratic_consensus(8, 3, 2, 10.0);
  FcConfig cfg;
  auto s = fc_init(prob, VectorXd::Zero(2), {}, cfg);
  fc_iterate(prob, cfg, s, ActiveSet{1, {0, 1, 2}}, 1.0);
  fc_iterate(prob, cfg, s, ActiveSet{2, {1}}, 1.0);
  const auto before = s;
  fc_iterate(prob, cfg, s, ActiveSet{3, {}}, 1.0);
  EXPECT_LE((s.y - before.y).norm(), 1e-14);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_LE((s.slates[i].lambda - before.slates[i].lambda).norm(), 1e-14);
}

TEST(FcIterate, FixedPointAnyActiveSet) {
  const auto prob = benchmarks::random_quadratic_consensus(12, 4, 2, 20.0);
  const auto sol = solve_consensus_oracle(prob);
  for (FcVariant v : {FcVariant::ExactBProx, FcVariant::ExactRhoProx}) {
    FcConfig cfg;
    cfg.variant = v;
    auto s = fc_init(prob, sol.y_star, sol.lambda_star, cfg);
    fc_iterate(prob, cfg, s, ActiveSet{1, {0, 2}}, 0.5);
    EXPECT_LE((s.y - sol.y_star).norm(), 1e-10);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_LE((s.slates[i].lambda - sol.lambda_star[i]).norm(), 1e-10);
  }
}

TEST(RunFc, OneIterationExactness) {
  FcConfig cfg;
  const auto t = run_fc(benchmarks::two_agent_quadratic(), cfg, bernoulli(1.0, 0), 1);
  ASSERT_EQ(t.records.size(), 2u);
  EXPECT_NEAR(t.final().y[0], 1.0, 1e-10);
  EXPECT_NEAR(t.final().lambdas[0][0], -1.0, 1e-10);
  EXPECT_NEAR(t.final().lambdas[1][0], 1.0, 1e-10);
}

TEST(RunFc, OneStepSolveOnRandomQuadratics) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto prob = benchmarks::random_quadratic_consensus(seed, 4, 3, 100.0);
    const auto sol = solve_consensus_oracle(prob);
    const auto t = run_fc(prob, FcConfig{}, bernoulli(1.0, 0), 1);
    EXPECT_LE((t.final().y - sol.y_star).norm(), 1e-10);
  }
}

TEST(RunFc, RejectsBadInput) {
  EXPECT_THROW(run_fc(benchmarks::two_agent_quadratic(), FcConfig{}, bernoulli(1.0, 0), 0), ValidationError);
  FcConfig cfg;
  cfg.variant = FcVariant::Inexact;  // exact policy is not allowed here
  EXPECT_THROW(run_fc(benchmarks::lad_triplet(), cfg, bernoulli(1.0, 0), 3), ValidationError);
  FcConfig mf;
  mf.mixing = Mixing::MeanField;
  EXPECT_THROW(run_fc(benchmarks::two_agent_quadratic(), mf, bernoulli(1.0, 0), 3), ValidationError);
  EXPECT_THROW(run_fc(benchmarks::lad_triplet(), FcConfig{}, bernoulli(1.0, 0), 3), CapabilityError);
}

TEST(RunFc, RecordsAndMetadata) {
  const auto t = run_fc(benchmarks::two_agent_quadratic(), FcConfig{}, bernoulli(0.5, 3), 7);
  ASSERT_EQ(t.records.size(), 8u);
  for (std::size_t k = 0; k < t.records.size(); ++k) EXPECT_EQ(t.records[k].k, static_cast<int>(k));
  EXPECT_TRUE(t.records[0].active.empty());
  EXPECT_EQ(t.records[1].active, (std::vector<int>{0, 1}));
  EXPECT_EQ(t.meta.engine, "fc");
  EXPECT_EQ(t.meta.variant, "exact_B_prox");
  EXPECT_EQ(t.meta.seed, 3u);
}

TEST(RunFc, MeanFieldAtFullParticipationEqualsRealized) {
  FcConfig cfg;
  cfg.variant = FcVariant::Inexact;
  cfg.hessian = HessianPolicy::schedule(1.0, 0.5);
  FcRunOptions o;
  o.y0 = v1(3.3);
  const auto a = run_fc(benchmarks::lad_triplet(), cfg, bernoulli(1.0, 1), 40, o);
  cfg.mixing = Mixing::MeanField;
  const auto b = run_fc(benchmarks::lad_triplet(), cfg, bernoulli(1.0, 1), 40, o);
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_LE((a.records[k].y - b.records[k].y).norm(), 1e-12);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_LE((a.records[k].lambdas[i] - b.records[k].lambdas[i]).norm(), 1e-12);
  }
}

TEST(RunFc, DualConservationAcrossVariantsAndP) {
  const auto prob = benchmarks::random_quadratic_consensus(21, 6, 2, 20.0);
  std::vector<FcConfig> cfgs(5);
  cfgs[1].variant = FcVariant::ExactRhoProx;
  cfgs[2].hessian = HessianPolicy::bfgs(MatrixXd::Identity(2, 2));
  cfgs[3].variant = FcVariant::Inexact;
  cfgs[3].hessian = HessianPolicy::schedule(20.0, 0.5);
  cfgs[4].hessian = HessianPolicy::fixed_scaled(3.0);
  for (const auto& cfg : cfgs) {
    for (double p : {0.2, 0.5, 0.8, 1.0}) {
      const auto t = run_fc(prob, cfg, bernoulli(p, 99), 40);
      for (const auto& r : t.records) EXPECT_LE(r.dual_sum, 1e-10);
    }
  }
}

TEST(RunFc, HessiansStaySpd) {
  const auto prob = benchmarks::trig_pair();
  FcRunOptions o;
  o.y0 = v1(1.0);
  for (HessianPolicy h : {HessianPolicy::exact(), HessianPolicy::bfgs(m1(1.0))}) {
    FcConfig cfg;
    cfg.hessian = h;
    cfg.variant = FcVariant::ExactRhoProx;
    cfg.rho = 3.0;
    const auto t = run_fc(prob, cfg, bernoulli(0.6, 4), 30, o);
    for (const auto& r : t.records)
      for (const auto& B : r.B) EXPECT_GE(B(0, 0), h.floor);
  }
}

TEST(RunFc, GradientIdentityOnSmoothProblem) {
  const auto prob = benchmarks::trig_pair();
  FcConfig cfg;
  FcRunOptions o;
  o.y0 = v1(2.3);
  const auto t = run_fc(prob, cfg, bernoulli(0.5, 6), 30, o);
  for (const auto& r : t.records) {
    if (r.k == 0) continue;
    for (int i : r.active) {
      const auto ui = static_cast<std::size_t>(i);
      EXPECT_LE((r.g[ui] - prob.objectives[ui]->gradient(r.x[ui])).norm(), 10 * cfg.local_tolerance);
    }
  }
}

TEST(RunFc, EngineErrorCarriesLocation) {
  FcConfig cfg;
  cfg.local_tolerance = 1e-300;
  FcRunOptions o;
  o.y0 = v1(2.3);
  try {
    run_fc(benchmarks::trig_pair(), cfg, bernoulli(1.0, 0), 3, o);
    FAIL() << "expected EngineError";
  } catch (const EngineError& e) {
    EXPECT_EQ(e.iteration(), 1);
    ASSERT_TRUE(e.agent().has_value());
    EXPECT_EQ(*e.agent(), 0);
  }
}

TEST(RunFc, ReducesToSynchronousRun) {
  const auto prob = benchmarks::random_quadratic_consensus(31, 3, 2, 10.0);
  FcConfig cfg;
  cfg.hessian = HessianPolicy::bfgs(MatrixXd::Identity(2, 2));
  const auto a = run_fc(prob, cfg, bernoulli(1.0, 8), 8);
  const auto b = run_c_aladin(prob, cfg, 8, VectorXd(), {});
  for (std::size_t k = 0; k < a.records.size(); ++k) {
    EXPECT_LE((a.records[k].y - b.records[k].y).cwiseAbs().maxCoeff(), 1e-12);
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_LE((a.records[k].lambdas[i] - b.records[k].lambdas[i]).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(RunFc, PerAgentPolicies) {
  const auto prob = benchmarks::two_agent_quadratic();
  FcConfig cfg;
  cfg.agent_hessian = {HessianPolicy::fixed(m1(2.0)), HessianPolicy::fixed(m1(5.0))};
  const auto t = run_fc(prob, cfg, bernoulli(1.0, 0), 2);
  EXPECT_DOUBLE_EQ(t.final().B[0](0, 0), 2.0);
  EXPECT_DOUBLE_EQ(t.final().B[1](0, 0), 5.0);
  cfg.agent_hessian.pop_back();
  EXPECT_THROW(run_fc(prob, cfg, bernoulli(1.0, 0), 2), ValidationError);
}
