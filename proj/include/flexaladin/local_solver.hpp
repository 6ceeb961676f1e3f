#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <type_traits>
#include <variant>

#include <Eigen/Dense>

#include "flexaladin/errors.hpp"
#include "flexaladin/linalg.hpp"
#include "flexaladin/objectives.hpp"

namespace flexaladin {

/// How an agent produces its Hessian approximation B_i. Every produced
/// matrix is symmetric with smallest eigenvalue >= floor.
struct HessianPolicy {
  /// B = exact Hessian at x+, eigenvalues below the floor lifted to it.
  struct Exact {};
  /// B = the given constant matrix, or scale * I when no matrix is set.
  struct FixedMatrix {
    MatrixXd B;
    double scale = 1.0;
  };
  /// B^k = beta0 * k^exponent * I.
  struct ScalarSchedule {
    double beta0 = 1.0;
    double exponent = 0.5;
  };
  /// Powell-damped BFGS started from B0.
  struct DampedBFGS {
    MatrixXd B0;
  };

  std::variant<Exact, FixedMatrix, ScalarSchedule, DampedBFGS> kind = Exact{};
  double floor = 1e-4;

  static HessianPolicy exact(double floor = 1e-4) { return {Exact{}, floor}; }
  static HessianPolicy fixed(MatrixXd B, double floor = 1e-4) { return {FixedMatrix{std::move(B), 1.0}, floor}; }
  static HessianPolicy fixed_scaled(double scale, double floor = 1e-4) {
    return {FixedMatrix{MatrixXd(), scale}, floor};
  }
  static HessianPolicy schedule(double beta0, double exponent, double floor = 1e-4) {
    return {ScalarSchedule{beta0, exponent}, floor};
  }
  static HessianPolicy bfgs(MatrixXd B0, double floor = 1e-4) { return {DampedBFGS{std::move(B0)}, floor}; }

  bool is_exact() const { return std::holds_alternative<Exact>(kind); }
  bool is_fixed() const { return std::holds_alternative<FixedMatrix>(kind); }
  bool is_schedule() const { return std::holds_alternative<ScalarSchedule>(kind); }
  bool is_bfgs() const { return std::holds_alternative<DampedBFGS>(kind); }

  /// True when the produced matrix depends on the iteration index only.
  bool state_independent() const { return is_fixed() || is_schedule(); }

  std::string name() const {
    return std::visit(
        [](const auto& v) -> std::string {
          using T = std::decay_t<decltype(v)>;
          if constexpr (std::is_same_v<T, Exact>) return "exact";
          else if constexpr (std::is_same_v<T, FixedMatrix>) return "fixed";
          else if constexpr (std::is_same_v<T, ScalarSchedule>) return "schedule";
          else return "bfgs";
        },
        kind);
  }
};

/// Minimum curvature s'y below which a BFGS update is skipped.
inline constexpr double kBfgsCurvatureSkip = 1e-10;

namespace detail {

inline MatrixXd damped_bfgs(const MatrixXd& B, const VectorXd& s, const VectorXd& yk) {
  const double sy = s.dot(yk);
  if (sy <= kBfgsCurvatureSkip) return B;
  const VectorXd Bs = B * s;
  const double sBs = s.dot(Bs);
  if (sBs <= 0.0) return B;
  double theta = 1.0;
  if (sy < 0.2 * sBs) theta = 0.8 * sBs / (sBs - sy);
  const VectorXd r = theta * yk + (1.0 - theta) * Bs;
  const double sr = s.dot(r);
  if (sr <= 0.0) return B;
  return B - Bs * Bs.transpose() / sBs + r * r.transpose() / sr;
}

}  // namespace detail

/// Produces B_i^+ for an agent whose local solve returned x_plus at
/// iteration k. `x_prev` is the agent's previous local iterate (used by the
/// BFGS variant only). Sets *clamped when the eigenvalue floor was applied.
inline MatrixXd update_hessian(const HessianPolicy& policy, const Objective& f,
                               const VectorXd& x_plus, const MatrixXd& B_prev, int k,
                               const std::optional<VectorXd>& x_prev = std::nullopt,
                               bool* clamped = nullptr) {
  const Eigen::Index n = f.dimension();
  linalg::require_size(x_plus, n, "update_hessian x_plus");
  if (!x_plus.allFinite()) throw NumericError("update_hessian: non-finite iterate");
  if (!(policy.floor > 0.0)) throw ValidationError("hessian.floor", "must be positive");

  MatrixXd raw = std::visit(
      [&](const auto& v) -> MatrixXd {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, HessianPolicy::Exact>) {
          return f.hessian(x_plus);
        } else if constexpr (std::is_same_v<T, HessianPolicy::FixedMatrix>) {
          if (v.B.size() == 0) return v.scale * MatrixXd::Identity(n, n);
          linalg::require_square(v.B, n, "fixed Hessian");
          return v.B;
        } else if constexpr (std::is_same_v<T, HessianPolicy::ScalarSchedule>) {
          if (k < 1) throw ValidationError("k", "schedule index must be >= 1");
          return v.beta0 * std::pow(static_cast<double>(k), v.exponent) * MatrixXd::Identity(n, n);
        } else {
          linalg::require_square(v.B0, n, "BFGS initial matrix");
          if (!x_prev || B_prev.rows() != n) return v.B0;
          linalg::require_square(B_prev, n, "previous Hessian");
          const VectorXd s = x_plus - *x_prev;
          const VectorXd yk = f.subgradient(x_plus) - f.subgradient(*x_prev);
          return detail::damped_bfgs(B_prev, s, yk);
        }
      },
      policy.kind);
  return linalg::clamp_spd(raw, policy.floor, clamped);
}

/// Hessian approximation an agent starts with before its first local step.
inline MatrixXd initial_hessian(const HessianPolicy& policy, const Objective& f, const VectorXd& x0) {
  if (const auto* b = std::get_if<HessianPolicy::DampedBFGS>(&policy.kind)) {
    linalg::require_square(b->B0, f.dimension(), "BFGS initial matrix");
    return linalg::clamp_spd(b->B0, policy.floor);
  }
  return update_hessian(policy, f, x0, MatrixXd(), 1);
}

struct LocalSolveReport {
  VectorXd x_plus;
  double stationarity_residual = 0.0;
  int newton_iters = 0;
};

enum class LocalMethod { Auto, Newton };

inline constexpr int kLocalNewtonCap = 100;

/// argmin_x f(x) + linear'x + 1/2 (x - center)' B (x - center).
///
/// Quadratic objectives are solved in closed form; other smooth objectives
/// by damped Newton on r(x) = grad f(x) + linear + B(x - center), started
/// at the prox center.
inline LocalSolveReport solve_prox_subproblem(const Objective& f, const VectorXd& linear,
                                              const VectorXd& center, const MatrixXd& B, double tol,
                                              LocalMethod method = LocalMethod::Auto) {
  const Eigen::Index n = f.dimension();
  linalg::require_size(linear, n, "local linear term");
  linalg::require_size(center, n, "local prox center");
  linalg::require_square(B, n, "local prox matrix");
  if (!f.capabilities().is_smooth) {
    throw CapabilityError("exact local solve requires a smooth objective (use the inexact variant)");
  }

  auto residual = [&](const VectorXd& x) -> VectorXd {
    return f.gradient(x) + linear + B * (x - center);
  };

  LocalSolveReport rep;
  const auto* quad = dynamic_cast<const QuadraticObjective*>(&f);
  if (quad && method == LocalMethod::Auto) {
    const MatrixXd H = quad->Q() + B;
    rep.x_plus = H.ldlt().solve(B * center - linear - quad->q());
    rep.stationarity_residual = residual(rep.x_plus).norm();
    if (!rep.x_plus.allFinite()) throw LocalSolveError("singular quadratic subproblem", center, INFINITY);
    return rep;
  }

  VectorXd x = center;
  VectorXd r = residual(x);
  double rn = r.norm();
  VectorXd best = x;
  double best_rn = rn;
  for (int it = 0; it < kLocalNewtonCap; ++it) {
    if (rn <= tol) {
      rep.x_plus = x;
      rep.stationarity_residual = rn;
      rep.newton_iters = it;
      return rep;
    }
    const MatrixXd J = linalg::symmetrize(f.hessian(x) + B);
    VectorXd d = J.ldlt().solve(-r);
    if (!d.allFinite()) d = -r;
    double t = 1.0;
    VectorXd trial = x + d;
    VectorXd rt = residual(trial);
    while (!(rt.norm() < (1.0 - 1e-4 * t) * rn) && t > 1e-10) {
      t *= 0.5;
      trial = x + t * d;
      rt = residual(trial);
    }
    if (t <= 1e-10) break;
    x = trial;
    r = rt;
    rn = r.norm();
    if (rn < best_rn) {
      best = x;
      best_rn = rn;
    }
  }
  if (rn <= tol) {
    rep.x_plus = x;
    rep.stationarity_residual = rn;
    rep.newton_iters = kLocalNewtonCap;
    return rep;
  }
  throw LocalSolveError("local Newton did not reach tolerance (residual " + std::to_string(best_rn) + ")",
                        best, best_rn);
}

/// x+ = argmin f(x) + lambda_i'x + 1/2 ||x - y||_B^2
inline LocalSolveReport solve_local_consensus(const Objective& f, const VectorXd& lambda_i,
                                              const VectorXd& y, const MatrixXd& B_i, double tol,
                                              LocalMethod method = LocalMethod::Auto) {
  return solve_prox_subproblem(f, lambda_i, y, B_i, tol, method);
}

/// x+ = argmin f(x) + lambda'A_i x + 1/2 ||x - y_i||_B^2
inline LocalSolveReport solve_local_resource(const Objective& f, const VectorXd& lambda,
                                             const VectorXd& y_i, const MatrixXd& A_i,
                                             const MatrixXd& B_i, double tol,
                                             LocalMethod method = LocalMethod::Auto) {
  if (A_i.rows() != lambda.size() || A_i.cols() != f.dimension()) {
    throw DimensionError("solve_local_resource: coupling matrix shape mismatch");
  }
  return solve_prox_subproblem(f, A_i.transpose() * lambda, y_i, B_i, tol, method);
}

/// g+ = B_i (y - x+) - lambda_i. Equals grad f_i(x+) by local stationarity.
inline VectorXd evaluate_gradient_consensus(const MatrixXd& B_i, const VectorXd& y,
                                            const VectorXd& x_plus, const VectorXd& lambda_i) {
  if (y.size() != x_plus.size() || y.size() != lambda_i.size() || B_i.rows() != y.size()) {
    throw DimensionError("evaluate_gradient_consensus: size mismatch");
  }
  return B_i * (y - x_plus) - lambda_i;
}

/// g+ = B_i (y_i - x+) - A_i' lambda
inline VectorXd evaluate_gradient_resource(const MatrixXd& B_i, const VectorXd& y_i,
                                           const VectorXd& x_plus, const MatrixXd& A_i,
                                           const VectorXd& lambda) {
  if (y_i.size() != x_plus.size() || B_i.rows() != y_i.size() || A_i.cols() != y_i.size() ||
      A_i.rows() != lambda.size()) {
    throw DimensionError("evaluate_gradient_resource: size mismatch");
  }
  return B_i * (y_i - x_plus) - A_i.transpose() * lambda;
}

}  // namespace flexaladin
