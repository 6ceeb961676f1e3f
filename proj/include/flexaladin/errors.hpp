#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

namespace flexaladin {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes do not agree with the problem definition.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An operation was requested that the objective family cannot provide
/// (e.g. a Hessian of a nonsmooth function).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// Invalid user input: configuration, problem definition, precondition.
class ValidationError : public Error {
 public:
  ValidationError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)), message_(message) {}
  explicit ValidationError(const std::string& message) : ValidationError("", message) {}

  const std::string& field() const noexcept { return field_; }
  /// The message without the field prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string field_;
  std::string message_;
};

/// A numerical procedure failed (factorization, iteration cap, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Coupling data is rank deficient, so the dual Hessian cannot be factorized.
class RankError : public NumericError {
 public:
  RankError(const std::string& message, double rcond)
      : NumericError(message), rcond_(rcond) {}
  double rcond() const noexcept { return rcond_; }

 private:
  double rcond_;
};

/// Newton iteration of a local subproblem did not reach the tolerance.
/// Carries the iterate with the smallest residual seen.
class LocalSolveError : public NumericError {
 public:
  LocalSolveError(const std::string& message, Eigen::VectorXd best, double residual)
      : NumericError(message), best_(std::move(best)), residual_(residual) {}

  const Eigen::VectorXd& best_iterate() const noexcept { return best_; }
  double residual() const noexcept { return residual_; }

 private:
  Eigen::VectorXd best_;
  double residual_;
};

/// Wraps an engine failure with the iteration and agent where it happened.
class EngineError : public NumericError {
 public:
  EngineError(int iteration, std::optional<int> agent, const std::string& what)
      : NumericError(format(iteration, agent, what)), iteration_(iteration), agent_(agent) {}

  int iteration() const noexcept { return iteration_; }
  std::optional<int> agent() const noexcept { return agent_; }

 private:
  static std::string format(int iteration, std::optional<int> agent, const std::string& what) {
    std::string s = "iteration " + std::to_string(iteration);
    if (agent) s += ", agent " + std::to_string(*agent);
    return s + ": " + what;
  }

  int iteration_;
  std::optional<int> agent_;
};

}  // namespace flexaladin
