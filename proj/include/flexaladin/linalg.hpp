#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "flexaladin/errors.hpp"

namespace flexaladin {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace linalg {

inline void require_size(const VectorXd& v, Eigen::Index n, const char* what) {
  if (v.size() != n) {
    throw DimensionError(std::string(what) + ": expected size " + std::to_string(n) + ", got " +
                         std::to_string(v.size()));
  }
}

inline void require_square(const MatrixXd& m, Eigen::Index n, const char* what) {
  if (m.rows() != n || m.cols() != n) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(n) + "x" +
                         std::to_string(n) + " matrix, got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
}

inline MatrixXd symmetrize(const MatrixXd& m) { return 0.5 * (m + m.transpose()); }

inline double min_eigenvalue(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_eigenvalue(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
inline double spectral_norm_sym(const MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(symmetrize(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

/// Lift every eigenvalue below `floor` to `floor`. Returns an exactly
/// symmetric matrix. Matrices already above the floor pass through unchanged
/// (apart from symmetrization) so constant inputs stay bit-stable.
inline MatrixXd clamp_spd(const MatrixXd& m, double floor, bool* clamped = nullptr) {
  MatrixXd s = symmetrize(m);
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(s);
  const VectorXd& ev = es.eigenvalues();
  if (clamped) *clamped = false;
  if (ev.minCoeff() >= floor) return s;
  if (clamped) *clamped = true;
  VectorXd lifted = ev.cwiseMax(floor);
  MatrixXd out = es.eigenvectors() * lifted.asDiagonal() * es.eigenvectors().transpose();
  return symmetrize(out);
}

}  // namespace linalg
}  // namespace flexaladin
