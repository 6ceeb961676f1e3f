#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "flexaladin/errors.hpp"
#include "flexaladin/linalg.hpp"

namespace flexaladin {

struct Capabilities {
  bool has_gradient = false;
  bool has_hessian = false;
  bool is_smooth = false;
};

/// A local objective f: R^n -> R.
///
/// The public entry points validate the argument dimension and then dispatch
/// to the family implementation. Evaluation is pure and reentrant.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual Eigen::Index dimension() const = 0;
  virtual Capabilities capabilities() const = 0;
  virtual std::string family() const = 0;

  double eval(const VectorXd& x) const {
    linalg::require_size(x, dimension(), "objective argument");
    return value_impl(x);
  }

  /// An element of the subdifferential. Equals the gradient for smooth families.
  VectorXd subgradient(const VectorXd& x) const {
    linalg::require_size(x, dimension(), "objective argument");
    return subgradient_impl(x);
  }

  VectorXd gradient(const VectorXd& x) const {
    if (!capabilities().has_gradient) {
      throw CapabilityError(family() + " objective has no gradient");
    }
    return subgradient(x);
  }

  MatrixXd hessian(const VectorXd& x) const {
    if (!capabilities().has_hessian) {
      throw CapabilityError(family() + " objective has no Hessian");
    }
    linalg::require_size(x, dimension(), "objective argument");
    return hessian_impl(x);
  }

 protected:
  virtual double value_impl(const VectorXd& x) const = 0;
  virtual VectorXd subgradient_impl(const VectorXd& x) const = 0;
  virtual MatrixXd hessian_impl(const VectorXd&) const {
    throw CapabilityError(family() + " objective has no Hessian");
  }
};

using ObjectivePtr = std::shared_ptr<const Objective>;

/// f(x) = 1/2 x'Qx + q'x + c
class QuadraticObjective final : public Objective {
 public:
  QuadraticObjective(MatrixXd Q, VectorXd q, double c = 0.0)
      : Q_(std::move(Q)), q_(std::move(q)), c_(c) {
    linalg::require_square(Q_, q_.size(), "quadratic Q");
    if ((Q_ - Q_.transpose()).norm() > 1e-12 * std::max(1.0, Q_.norm())) {
      throw ValidationError("Q", "matrix must be symmetric");
    }
    Q_ = linalg::symmetrize(Q_);
    mu_ = Q_.size() > 0 ? linalg::min_eigenvalue(Q_) : 0.0;
  }

  /// Scalar convenience: f(x) = 1/2 a x^2 + q x + c.
  static std::shared_ptr<QuadraticObjective> scalar(double a, double q, double c = 0.0) {
    return std::make_shared<QuadraticObjective>(MatrixXd::Constant(1, 1, a),
                                                VectorXd::Constant(1, q), c);
  }

  Eigen::Index dimension() const override { return q_.size(); }
  Capabilities capabilities() const override { return {true, true, true}; }
  std::string family() const override { return "quadratic"; }

  const MatrixXd& Q() const { return Q_; }
  const VectorXd& q() const { return q_; }
  double c() const { return c_; }
  /// Smallest eigenvalue of Q (strong convexity modulus when positive).
  double mu() const { return mu_; }

 protected:
  double value_impl(const VectorXd& x) const override {
    return 0.5 * x.dot(Q_ * x) + q_.dot(x) + c_;
  }
  VectorXd subgradient_impl(const VectorXd& x) const override { return Q_ * x + q_; }
  MatrixXd hessian_impl(const VectorXd&) const override { return Q_; }

 private:
  MatrixXd Q_;
  VectorXd q_;
  double c_;
  double mu_ = 0.0;
};

/// f(x) = ||x - c||_1. The subgradient at a kink coordinate is 0.
class AbsDeviationObjective final : public Objective {
 public:
  explicit AbsDeviationObjective(VectorXd c) : c_(std::move(c)) {
    if (c_.size() == 0) throw ValidationError("c", "dimension must be positive");
  }
  static std::shared_ptr<AbsDeviationObjective> scalar(double c) {
    return std::make_shared<AbsDeviationObjective>(VectorXd::Constant(1, c));
  }

  Eigen::Index dimension() const override { return c_.size(); }
  Capabilities capabilities() const override { return {false, false, false}; }
  std::string family() const override { return "abs_deviation"; }

  const VectorXd& center() const { return c_; }

 protected:
  double value_impl(const VectorXd& x) const override { return (x - c_).cwiseAbs().sum(); }
  VectorXd subgradient_impl(const VectorXd& x) const override {
    VectorXd s(x.size());
    for (Eigen::Index j = 0; j < x.size(); ++j) {
      const double d = x[j] - c_[j];
      s[j] = d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0);
    }
    return s;
  }

 private:
  VectorXd c_;
};

/// f(x) = sum_j 1/2 a (x_j - c)^2 + b cos(x_j). Non-convex when b > a.
class TrigQuadraticObjective final : public Objective {
 public:
  TrigQuadraticObjective(double a, double b, double c, Eigen::Index n = 1)
      : a_(a), b_(b), c_(c), n_(n) {
    if (!(a > 0.0)) throw ValidationError("a", "must be positive");
    if (n <= 0) throw ValidationError("n", "dimension must be positive");
  }

  Eigen::Index dimension() const override { return n_; }
  Capabilities capabilities() const override { return {true, true, true}; }
  std::string family() const override { return "trig_quadratic"; }

  double a() const { return a_; }
  double b() const { return b_; }
  double c() const { return c_; }

 protected:
  double value_impl(const VectorXd& x) const override {
    double v = 0.0;
    for (Eigen::Index j = 0; j < n_; ++j) {
      const double d = x[j] - c_;
      v += 0.5 * a_ * d * d + b_ * std::cos(x[j]);
    }
    return v;
  }
  VectorXd subgradient_impl(const VectorXd& x) const override {
    VectorXd g(n_);
    for (Eigen::Index j = 0; j < n_; ++j) g[j] = a_ * (x[j] - c_) - b_ * std::sin(x[j]);
    return g;
  }
  MatrixXd hessian_impl(const VectorXd& x) const override {
    MatrixXd H = MatrixXd::Zero(n_, n_);
    for (Eigen::Index j = 0; j < n_; ++j) H(j, j) = a_ - b_ * std::cos(x[j]);
    return H;
  }

 private:
  double a_, b_, c_;
  Eigen::Index n_;
};

// ---------------------------------------------------------------------------
// Problem classes

/// min sum_i f_i(x_i)  s.t.  x_i = y
struct ConsensusProblem {
  Eigen::Index n = 0;
  std::vector<ObjectivePtr> objectives;
  /// Search interval for scalar instances whose sum is not globally convex.
  std::optional<std::pair<double, double>> oracle_bracket;

  ConsensusProblem() = default;
  ConsensusProblem(std::vector<ObjectivePtr> objs,
                   std::optional<std::pair<double, double>> bracket = std::nullopt)
      : objectives(std::move(objs)), oracle_bracket(bracket) {
    if (!objectives.empty() && objectives.front()) n = objectives.front()->dimension();
    validate();
  }

  int agents() const { return static_cast<int>(objectives.size()); }

  void validate() const {
    if (objectives.empty()) throw ValidationError("agents", "need at least one agent");
    for (std::size_t i = 0; i < objectives.size(); ++i) {
      if (!objectives[i]) throw ValidationError("agents[" + std::to_string(i) + "]", "null objective");
      if (objectives[i]->dimension() != n) {
        throw ValidationError("agents[" + std::to_string(i) + "]",
                              "dimension " + std::to_string(objectives[i]->dimension()) +
                                  " differs from shared dimension " + std::to_string(n));
      }
    }
    if (oracle_bracket && !(oracle_bracket->first < oracle_bracket->second)) {
      throw ValidationError("oracle_bracket", "lower end must be below upper end");
    }
  }

  bool all_smooth() const {
    return std::all_of(objectives.begin(), objectives.end(),
                       [](const ObjectivePtr& f) { return f->capabilities().is_smooth; });
  }

  /// F(y) = sum_i f_i(y)
  double value(const VectorXd& y) const {
    double v = 0.0;
    for (const auto& f : objectives) v += f->eval(y);
    return v;
  }
};

/// min sum_i f_i(x_i)  s.t.  sum_i A_i x_i = b
struct ResourceProblem {
  std::vector<ObjectivePtr> objectives;
  std::vector<MatrixXd> A;
  VectorXd b;

  ResourceProblem() = default;
  ResourceProblem(std::vector<ObjectivePtr> objs, std::vector<MatrixXd> coupling, VectorXd rhs)
      : objectives(std::move(objs)), A(std::move(coupling)), b(std::move(rhs)) {
    validate_shapes();
  }

  int agents() const { return static_cast<int>(objectives.size()); }
  Eigen::Index m() const { return b.size(); }
  Eigen::Index dim(int i) const { return objectives[static_cast<std::size_t>(i)]->dimension(); }

  MatrixXd stacked_coupling() const {
    Eigen::Index total = 0;
    for (const auto& Ai : A) total += Ai.cols();
    MatrixXd S(m(), total);
    Eigen::Index off = 0;
    for (const auto& Ai : A) {
      S.middleCols(off, Ai.cols()) = Ai;
      off += Ai.cols();
    }
    return S;
  }

  /// Shape checks plus full row rank of the stacked coupling matrix.
  void validate() const {
    validate_shapes();
    Eigen::ColPivHouseholderQR<MatrixXd> qr(stacked_coupling());
    qr.setThreshold(1e-10);
    if (qr.rank() < b.size()) {
      throw ValidationError("A", "stacked coupling matrix has rank " + std::to_string(qr.rank()) +
                                     " < m=" + std::to_string(b.size()));
    }
  }

  void validate_shapes() const {
    if (objectives.empty()) throw ValidationError("agents", "need at least one agent");
    if (A.size() != objectives.size()) {
      throw ValidationError("A", "need one coupling matrix per agent");
    }
    if (b.size() == 0) throw ValidationError("b", "resource vector must be nonempty");
    for (std::size_t i = 0; i < objectives.size(); ++i) {
      const std::string field = "agents[" + std::to_string(i) + "]";
      if (!objectives[i]) throw ValidationError(field, "null objective");
      if (A[i].rows() != b.size()) {
        throw ValidationError(field + ".A", "has " + std::to_string(A[i].rows()) +
                                                " rows, expected m=" + std::to_string(b.size()));
      }
      if (A[i].cols() != objectives[i]->dimension()) {
        throw ValidationError(field + ".A", "column count does not match objective dimension");
      }
    }
  }

  double value(const std::vector<VectorXd>& x) const {
    double v = 0.0;
    for (std::size_t i = 0; i < objectives.size(); ++i) v += objectives[i]->eval(x[i]);
    return v;
  }

  VectorXd coupling_residual(const std::vector<VectorXd>& x) const {
    VectorXd r = -b;
    for (std::size_t i = 0; i < A.size(); ++i) r += A[i] * x[i];
    return r;
  }
};

struct ConsensusSolution {
  VectorXd y_star;
  /// lambda_i* = -(sub)gradient of f_i at y*, shifted so that the sum is zero.
  std::vector<VectorXd> lambda_star;
  double f_star = 0.0;
};

struct ResourceSolution {
  std::vector<VectorXd> x_star;
  VectorXd lambda_star;
  double f_star = 0.0;
};

// ---------------------------------------------------------------------------
// Centralized oracles

namespace detail {

inline void recenter(std::vector<VectorXd>& lambdas) {
  if (lambdas.empty()) return;
  VectorXd mean = VectorXd::Zero(lambdas.front().size());
  for (const auto& l : lambdas) mean += l;
  mean /= static_cast<double>(lambdas.size());
  for (auto& l : lambdas) l -= mean;
}

inline VectorXd sum_gradient(const ConsensusProblem& p, const VectorXd& y) {
  VectorXd g = VectorXd::Zero(p.n);
  for (const auto& f : p.objectives) g += f->gradient(y);
  return g;
}

inline double gradient_scale(const ConsensusProblem& p, const VectorXd& y) {
  double s = 1.0;
  for (const auto& f : p.objectives) s = std::max(s, f->gradient(y).norm());
  return s;
}

inline VectorXd solve_median(const ConsensusProblem& p, std::vector<VectorXd>& subgrads) {
  const auto N = p.objectives.size();
  VectorXd y(p.n);
  std::vector<const AbsDeviationObjective*> fs;
  for (const auto& f : p.objectives) fs.push_back(dynamic_cast<const AbsDeviationObjective*>(f.get()));
  for (Eigen::Index j = 0; j < p.n; ++j) {
    std::vector<double> c;
    for (auto* f : fs) c.push_back(f->center()[j]);
    std::sort(c.begin(), c.end());
    y[j] = c[(N - 1) / 2];  // lower median; a kink point for every N
  }
  subgrads.clear();
  for (const auto& f : p.objectives) subgrads.push_back(f->subgradient(y));
  // Pick subgradients of the kinked agents so the sum vanishes.
  for (Eigen::Index j = 0; j < p.n; ++j) {
    double r = 0.0;
    for (const auto& s : subgrads) r += s[j];
    for (std::size_t i = 0; i < N && std::abs(r) > 0.0; ++i) {
      if (fs[i]->center()[j] != y[j]) continue;
      const double target = std::clamp(subgrads[i][j] - r, -1.0, 1.0);
      r += target - subgrads[i][j];
      subgrads[i][j] = target;
    }
  }
  return y;
}

inline VectorXd solve_bracketed_scalar(const ConsensusProblem& p, double lo, double hi) {
  auto dF = [&](double t) { return sum_gradient(p, VectorXd::Constant(1, t))[0]; };
  double flo = dF(lo), fhi = dF(hi);
  if (!(flo < 0.0 && fhi > 0.0)) {
    throw ValidationError("oracle_bracket", "derivative of the sum must change sign from - to +");
  }
  for (int it = 0; it < 200 && hi - lo > 1e-13; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = dF(mid);
    if (fm == 0.0) return VectorXd::Constant(1, mid);
    (fm < 0.0 ? lo : hi) = mid;
  }
  double t = 0.5 * (lo + hi);
  // Newton polish inside the final bracket.
  for (int it = 0; it < 5; ++it) {
    VectorXd v = VectorXd::Constant(1, t);
    double H = 0.0;
    for (const auto& f : p.objectives) H += f->hessian(v)(0, 0);
    const double g = dF(t);
    if (std::abs(g) <= 1e-15 || H <= 0.0) break;
    const double next = t - g / H;
    if (std::abs(next - t) > 1e-10) break;
    t = next;
  }
  return VectorXd::Constant(1, t);
}

inline VectorXd solve_newton(const ConsensusProblem& p) {
  VectorXd y = VectorXd::Zero(p.n);
  constexpr int kMaxIter = 200;
  for (int it = 0; it < kMaxIter; ++it) {
    VectorXd g = sum_gradient(p, y);
    if (g.norm() <= 1e-12 * gradient_scale(p, y)) return y;
    MatrixXd H = MatrixXd::Zero(p.n, p.n);
    for (const auto& f : p.objectives) H += f->hessian(y);
    H = linalg::symmetrize(H);
    const double lmin = linalg::min_eigenvalue(H);
    if (lmin <= 1e-12) H += (1e-8 - lmin + 1e-12) * MatrixXd::Identity(p.n, p.n);
    VectorXd step = H.ldlt().solve(-g);
    const double F0 = p.value(y);
    double t = 1.0;
    VectorXd trial = y + step;
    while (p.value(trial) > F0 + 1e-4 * t * g.dot(step) && t > 1e-12) {
      t *= 0.5;
      trial = y + t * step;
    }
    if (t <= 1e-12 || (trial - y).norm() <= 1e-16 * (1.0 + y.norm())) {
      // No further progress possible in floating point.
      if (sum_gradient(p, trial).norm() <= 1e-9 * gradient_scale(p, trial)) return trial;
      break;
    }
    y = trial;
  }
  throw NumericError("consensus oracle: Newton did not converge");
}

}  // namespace detail

/// Ground-truth primal/dual solution of a consensus problem by a centralized
/// solve. Supports smooth sums (damped Newton), scalar instances with a
/// bracket (bisection + Newton polish) and all-L1 instances (median).
inline ConsensusSolution solve_consensus_oracle(const ConsensusProblem& p) {
  p.validate();
  ConsensusSolution sol;
  std::vector<VectorXd> subgrads;
  const bool all_l1 = std::all_of(p.objectives.begin(), p.objectives.end(), [](const ObjectivePtr& f) {
    return dynamic_cast<const AbsDeviationObjective*>(f.get()) != nullptr;
  });
  if (all_l1) {
    sol.y_star = detail::solve_median(p, subgrads);
  } else if (!p.all_smooth()) {
    throw CapabilityError("consensus oracle: mixed smooth/nonsmooth sums are not supported");
  } else {
    if (p.oracle_bracket && p.n == 1) {
      sol.y_star = detail::solve_bracketed_scalar(p, p.oracle_bracket->first, p.oracle_bracket->second);
    } else {
      sol.y_star = detail::solve_newton(p);
    }
    for (const auto& f : p.objectives) subgrads.push_back(f->gradient(sol.y_star));
  }
  for (auto& s : subgrads) sol.lambda_star.push_back(-s);
  detail::recenter(sol.lambda_star);
  sol.f_star = p.value(sol.y_star);
  return sol;
}

/// Solves the KKT system of a quadratic resource-allocation problem:
/// [blkdiag(Q_i) A'; A 0] (x, lambda) = (-q, b).
inline ResourceSolution solve_resource_oracle(const ResourceProblem& p) {
  p.validate();
  std::vector<const QuadraticObjective*> qs;
  Eigen::Index nx = 0;
  for (const auto& f : p.objectives) {
    auto* q = dynamic_cast<const QuadraticObjective*>(f.get());
    if (!q) throw CapabilityError("resource oracle supports quadratic objectives only");
    if (q->mu() <= 0.0) throw CapabilityError("resource oracle requires positive definite Q");
    qs.push_back(q);
    nx += q->dimension();
  }
  const Eigen::Index m = p.m();
  MatrixXd K = MatrixXd::Zero(nx + m, nx + m);
  VectorXd rhs(nx + m);
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < qs.size(); ++i) {
    const Eigen::Index ni = qs[i]->dimension();
    K.block(off, off, ni, ni) = qs[i]->Q();
    K.block(off, nx, ni, m) = p.A[i].transpose();
    K.block(nx, off, m, ni) = p.A[i];
    rhs.segment(off, ni) = -qs[i]->q();
    off += ni;
  }
  rhs.tail(m) = p.b;
  Eigen::FullPivLU<MatrixXd> lu(K);
  if (!lu.isInvertible()) throw NumericError("resource oracle: singular KKT matrix");
  VectorXd z = lu.solve(rhs);
  ResourceSolution sol;
  off = 0;
  for (const auto* q : qs) {
    sol.x_star.push_back(z.segment(off, q->dimension()));
    off += q->dimension();
  }
  sol.lambda_star = z.tail(m);
  sol.f_star = p.value(sol.x_star);
  return sol;
}

}  // namespace flexaladin
