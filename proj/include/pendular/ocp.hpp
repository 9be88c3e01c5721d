#pragma once

// Direct transcription of the balance-dominated trajectory problem:
//   min  sum_k w_k [ alpha |Hdot_k|^2 + lambda |Hdot_k - task_k|^2
//                    + beta (n . cddot_k)^2 + gamma sum_i |f_ki|^2 ]
// over knot contact forces, with the CoM integrated exactly for forces that vary
// linearly between knots, friction cones at every knot and terminal
// position/velocity conditions.

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pendular/errors.hpp"
#include "pendular/model.hpp"

namespace pendular::ocp {

struct BoundaryState {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
};

struct OcpProblem {
  StanceConfig stance;
  double horizon = 3.0;
  int knots = 60;
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  double lambda = 0.0;
  std::vector<Vec3> hdot_task;  // empty, one constant sample, or one per knot
  Vec3 normal = Vec3::UnitZ();
  BoundaryState initial;
  BoundaryState terminal;

  void validate() const;
  double dt() const { return horizon / (knots - 1); }
  std::size_t n_vars() const { return 3 * stance.size() * static_cast<std::size_t>(knots); }
  Vec3 task_at(int k) const;
};

struct OcpOptions {
  double tol = 1e-8;      // stationarity, relative to max(1, |L|)
  double bc_tol = 1e-6;   // terminal position (m) and velocity * horizon (m)
  double cone_tol = 1e-6; // friction-cone violation (N)
  int max_outer = 40;
  int max_inner = 20000;
};

/// Per-knot contact forces, knots x contacts.
using KnotForces = std::vector<std::vector<Vec3>>;

struct OcpMetrics {
  double eps_H = 0.0;      // time average of |Hdot|
  double eps_pend = 0.0;   // time average of |F/m - (g/h)(c - p)|
  double lipm_r2 = 0.0;    // NaN when cddot_xy has no variance
  double zmp_pivot_mean = 0.0;
  double zmp_pivot_max = 0.0;
  double zmp_inside_fraction = 0.0;
  double normal_acc_sq = 0.0;  // time average of (n . cddot)^2
};

struct OcpSolution {
  KnotForces knot_forces;
  std::vector<CentroidalStateD> com_traj;
  std::vector<Vec3> hdot;
  double dt = 0.0;
  double objective = 0.0;
  double eps_H = 0.0;
  double eps_pend = 0.0;
  double lipm_r2 = 0.0;
  OcpMetrics full_metrics;
  int outer_iterations = 0;
  int inner_iterations = 0;
  double stationarity = 0.0;
  double bc_residual = 0.0;
  double cone_violation = 0.0;
};

/// Outer loop ran out of iterations; carries the last iterate.
class OcpConvergenceError : public ConvergenceError {
 public:
  OcpConvergenceError(const std::string& what, OcpSolution last)
      : ConvergenceError(what, last.outer_iterations, last.bc_residual, last.stationarity),
        last_(std::move(last)) {}

  const OcpSolution& last_iterate() const { return last_; }

 private:
  OcpSolution last_;
};

OcpSolution solve_ocp(const OcpProblem& problem, const OcpOptions& opts = {});

/// Rolls the CoM forward from the initial state under the given knot forces.
/// Pivot is the centre of pressure of each knot's forces.
std::vector<CentroidalStateD> integrate(const OcpProblem& problem, const KnotForces& forces);

/// Metrics of a force trajectory over states sampled every dt. The pivot of
/// each state is the centre of pressure of its forces.
OcpMetrics metrics(const StanceConfig& stance, const KnotForces& forces,
                   std::span<const CentroidalStateD> traj, double dt);

OcpMetrics metrics(const OcpSolution& sol, const StanceConfig& stance);

/// Least-squares slope and intercept of log(eps) against log(alpha).
std::pair<double, double> collapse_rate_fit(std::span<const std::pair<double, double>> sweep);

/// Transcribed running cost and its gradient, with x stacked knot-major as
/// x[3 (k N + i) + j].
double transcribed_cost(const OcpProblem& problem, const Eigen::VectorXd& x,
                        Eigen::VectorXd* grad = nullptr);

Eigen::VectorXd pack(const KnotForces& forces);
KnotForces unpack(const OcpProblem& problem, const Eigen::VectorXd& x);

namespace detail {

struct Multipliers {
  Vec3 position = Vec3::Zero();
  Vec3 velocity = Vec3::Zero();
  Eigen::VectorXd cone;  // same layout as x
  double rho_bc = 1e4;
  double rho_cone = 1.0;
};

/// Augmented Lagrangian of the transcribed problem.
double augmented_lagrangian(const OcpProblem& problem, const Eigen::VectorXd& x,
                            const Multipliers& mult, Eigen::VectorXd* grad = nullptr);

}  // namespace detail

}  // namespace pendular::ocp
