#pragma once

// Small named problem instances and seeded random generators.

#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "flexaladin/objectives.hpp"

namespace flexaladin::benchmarks {

/// {1/2 x^2, 1/2 (x-2)^2}: y* = 1, lambda* = (-1, 1).
inline ConsensusProblem two_agent_quadratic() {
  return ConsensusProblem({QuadraticObjective::scalar(1.0, 0.0), QuadraticObjective::scalar(1.0, -2.0, 2.0)});
}

/// f_i = 1/2 x_i^2, x_1 + x_2 = 2: x* = (1, 1), lambda* = -1.
inline ResourceProblem scalar_resource() {
  return ResourceProblem({QuadraticObjective::scalar(1.0, 0.0), QuadraticObjective::scalar(1.0, 0.0)},
                         {MatrixXd::Ones(1, 1), MatrixXd::Ones(1, 1)}, VectorXd::Constant(1, 2.0));
}

/// Non-convex scalar pair 1/2 (x - c)^2 + 1.5 cos x with c in {0, 2}.
inline ConsensusProblem trig_pair() {
  return ConsensusProblem({std::make_shared<TrigQuadraticObjective>(1.0, 1.5, 0.0),
                           std::make_shared<TrigQuadraticObjective>(1.0, 1.5, 2.0)},
                          std::make_pair(0.0, 4.0));
}

/// {|x|, |x-1|, |x-5|}: y* = 1, F* = 5.
inline ConsensusProblem lad_triplet() {
  return ConsensusProblem({AbsDeviationObjective::scalar(0.0), AbsDeviationObjective::scalar(1.0),
                           AbsDeviationObjective::scalar(5.0)});
}

/// Symmetric matrix with eigenvalues drawn uniformly from [lo, hi] and a
/// random orthogonal basis.
inline MatrixXd random_spd(std::mt19937_64& rng, Eigen::Index n, double lo, double hi) {
  std::normal_distribution<double> gauss;
  std::uniform_real_distribution<double> eig(lo, hi);
  MatrixXd G(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) G(r, c) = gauss(rng);
  const MatrixXd Qo = Eigen::HouseholderQR<MatrixXd>(G).householderQ();
  VectorXd d(n);
  for (Eigen::Index j = 0; j < n; ++j) d[j] = eig(rng);
  if (n >= 2) {
    d[0] = lo;
    d[1] = hi;
  }
  return linalg::symmetrize(Qo * d.asDiagonal() * Qo.transpose());
}

inline VectorXd random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  VectorXd v(n);
  for (Eigen::Index j = 0; j < n; ++j) v[j] = gauss(rng);
  return v;
}

/// N quadratic agents in R^n whose Hessians have eigenvalues in [1, max_condition].
inline ConsensusProblem random_quadratic_consensus(std::uint64_t seed, int N, Eigen::Index n,
                                                   double max_condition = 100.0) {
  std::mt19937_64 rng(seed);
  std::vector<ObjectivePtr> objs;
  for (int i = 0; i < N; ++i) {
    MatrixXd Q = random_spd(rng, n, 1.0, max_condition);
    VectorXd q = random_vector(rng, n, 2.0);
    objs.push_back(std::make_shared<QuadraticObjective>(std::move(Q), std::move(q)));
  }
  return ConsensusProblem(std::move(objs));
}

/// N quadratic agents with dimensions in [1, 3] coupled by m <= N random rows.
/// The first agent has at least m columns, so the stacked coupling has full row rank.
inline ResourceProblem random_quadratic_resource(std::uint64_t seed, int N, Eigen::Index m) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim(1, 3);
  std::vector<ObjectivePtr> objs;
  std::vector<MatrixXd> A;
  for (int i = 0; i < N; ++i) {
    const Eigen::Index n = i == 0 ? std::max<Eigen::Index>(m, dim(rng)) : dim(rng);
    objs.push_back(std::make_shared<QuadraticObjective>(random_spd(rng, n, 0.5, 20.0), random_vector(rng, n)));
    MatrixXd Ai(m, n);
    for (Eigen::Index r = 0; r < m; ++r)
      for (Eigen::Index c = 0; c < n; ++c) Ai(r, c) = random_vector(rng, 1)[0];
    A.push_back(std::move(Ai));
  }
  VectorXd b = random_vector(rng, m, 3.0);
  ResourceProblem p(std::move(objs), std::move(A), std::move(b));
  p.validate();
  return p;
}

}  // namespace flexaladin::benchmarks
