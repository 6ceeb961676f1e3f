#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "flexaladin/linalg.hpp"
#include "flexaladin/polling.hpp"

namespace flexaladin {

/// Run description carried alongside the per-iteration records.
struct TraceMeta {
  std::string engine;   // "fc" or "ft"
  std::string variant;  // exact_B_prox, exact_rho_prox, inexact, T
  std::string mixing = "realized";
  std::string policy;
  double p = 1.0;
  double rho = 0.0;
  std::uint64_t seed = 0;
  double local_tolerance = 0.0;
};

/// One row of an FC-ALADIN trace. Row 0 is the initial state.
struct ConsensusRecord {
  int k = 0;
  std::vector<int> active;
  VectorXd y;
  std::vector<VectorXd> lambdas;
  std::vector<VectorXd> x;
  std::vector<VectorXd> g;
  std::vector<MatrixXd> B;
  /// Agents whose Hessian approximation hit the eigenvalue floor this round.
  std::vector<int> clamped;
  double primal_residual = 0.0;  // max_i ||x_i - y||
  double dual_sum = 0.0;         // ||sum_i lambda_i||
  std::optional<double> energy;
};

/// One row of an FT-ALADIN trace.
struct ResourceRecord {
  int k = 0;
  std::vector<int> active;
  VectorXd lambda;
  std::vector<VectorXd> ys;
  std::vector<VectorXd> x;
  std::vector<VectorXd> g;
  std::vector<MatrixXd> B;
  std::vector<int> clamped;
  double feasibility = 0.0;   // ||sum_i A_i y_i - b||
  double stationarity = 0.0;  // max_i ||g_i + A_i' lambda||
};

template <typename Record>
struct IterationTrace {
  TraceMeta meta;
  std::vector<Record> records;

  /// Active sets of iterations 1..K.
  std::vector<ActiveSet> active_sets() const {
    std::vector<ActiveSet> sets;
    for (const auto& r : records) {
      if (r.k >= 1) sets.push_back(ActiveSet{r.k, r.active});
    }
    return sets;
  }
  const Record& final() const { return records.back(); }
};

using ConsensusTrace = IterationTrace<ConsensusRecord>;
using ResourceTrace = IterationTrace<ResourceRecord>;

}  // namespace flexaladin
