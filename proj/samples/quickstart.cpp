// Runs flexible consensus ALADIN on a small nonsmooth problem and prints
// the iterate every 500 rounds.

#include <cstdio>

#include "flexaladin/benchmarks.hpp"
#include "flexaladin/fc_aladin.hpp"

int main() {
  using namespace flexaladin;
  const ConsensusProblem problem = benchmarks::lad_triplet();

  FcConfig cfg;
  cfg.variant = FcVariant::Inexact;
  cfg.hessian = HessianPolicy::schedule(1.0, 0.5);

  PollingConfig polling;
  polling.p = 0.7;
  polling.seed = 7;

  FcRunOptions opts;
  opts.y0 = VectorXd::Constant(1, 4.0);

  const ConsensusTrace trace = run_fc(problem, cfg, polling, 3000, opts);
  for (const auto& r : trace.records) {
    if (r.k % 500 == 0) std::printf("k=%5d  y=%+.6f  F(y)=%.6f\n", r.k, r.y[0], problem.value(r.y));
  }
}
