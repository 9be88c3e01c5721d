#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace pendular {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched list lengths or a rank-deficient stacking.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Stance or state that violates the geometric preconditions
/// (height below h_min, coincident feet, wrong number of contacts).
class DegenerateStanceError : public Error {
 public:
  using Error::Error;
};

/// Requested net force lies outside the Minkowski sum of the friction cones.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, const Eigen::Vector3d& certificate, double gap)
      : Error(what), certificate_(certificate), gap_(gap) {}

  /// Unit direction separating the requested force from the reachable set.
  const Eigen::Vector3d& certificate() const { return certificate_; }
  double gap() const { return gap_; }

 private:
  Eigen::Vector3d certificate_;
  double gap_;
};

/// Iterative solver hit its iteration cap.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, int iterations, double primal_residual,
                   double dual_residual)
      : Error(what),
        iterations_(iterations),
        primal_residual_(primal_residual),
        dual_residual_(dual_residual) {}

  int iterations() const { return iterations_; }
  double primal_residual() const { return primal_residual_; }
  double dual_residual() const { return dual_residual_; }

 private:
  int iterations_;
  double primal_residual_;
  double dual_residual_;
};

/// Invalid or malformed run configuration. Carries the offending line and field.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& what, int line = 0, std::string field = {})
      : Error(what), line_(line), field_(std::move(field)) {}

  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

}  // namespace pendular
