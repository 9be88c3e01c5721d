#pragma once

// Per-step contact-force QP:
//
//   min  alpha |Hdot|^2 + lambda |Hdot - Hdot_task|^2 + gamma sum_i |f_i|^2
//   s.t. sum_i f_i = F_net,  f_i in K_i
//
// The equality is eliminated by writing f = f0 + N z, where f0 is the equal
// split and N an orthonormal basis of {df : sum_i df_i = 0}. The reduced
// problem is solved by ADMM with an exact projection onto each friction cone.

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pendular/model.hpp"

namespace pendular::forceqp {

enum class ConeModel {
  soc,       // exact second-order cones
  pyramid8,  // inscribed 8-facet pyramids, active-set path (cross-check only)
  none,      // no friction constraint
};

std::string to_string(ConeModel model);
ConeModel cone_model_from_string(const std::string& name);

struct QpWeights {
  double alpha = 0.0;
  double gamma = 1.0;
  double lambda = 0.0;
  Vec3 hdot_task = Vec3::Zero();

  /// Throws std::invalid_argument when alpha < 0, lambda < 0, gamma <= 0 or
  /// the task is not finite.
  void validate() const;
};

struct SolverOptions {
  double tol = 1e-10;
  int max_iter = 100000;
  ConeModel cone_model = ConeModel::soc;
};

struct ForceSolution {
  std::vector<Vec3> forces;
  Vec3 hdot = Vec3::Zero();
  double objective = 0.0;
  int iterations = 0;
  double primal_residual = 0.0;
  double dual_residual = 0.0;
  std::vector<bool> cone_active;
};

/// Orthonormal basis (3N x 3(N-1)) of the null space of the force-sum map,
/// from a Householder factorisation of the stacked constraint.
Eigen::MatrixXd sum_constraint_nullspace(std::size_t n_contacts);

/// The 3 x 3N map from stacked contact forces to sum_i (r_i - c) x f_i.
Eigen::MatrixXd moment_map(const StanceConfig& stance, const Vec3& com);

/// Unscaled QP objective of a force distribution.
double objective_value(const StanceConfig& stance, const Vec3& com,
                       const std::vector<Vec3>& forces, const QpWeights& w);

ForceSolution solve(const StanceConfig& stance, const Vec3& com, const Vec3& f_net,
                    const QpWeights& w, const SolverOptions& opts = {});

/// Closed-form minimiser with the friction cones dropped. Serves as an oracle
/// for solve() when no cone is active.
ForceSolution solve_unconstrained(const StanceConfig& stance, const Vec3& com, const Vec3& f_net,
                                  const QpWeights& w);

struct ReachabilityResult {
  double gap = 0.0;                  // distance from F_net to the sum of cones
  Vec3 direction = Vec3::Zero();     // unit separating direction when gap > 0
  std::vector<Vec3> closest;         // per-contact forces achieving the projection
  int iterations = 0;
};

/// Projects F_net onto the Minkowski sum of the stance's friction cones.
ReachabilityResult reachability(const StanceConfig& stance, const Vec3& f_net,
                                ConeModel model = ConeModel::soc);

/// Exact Euclidean projection onto one second-order friction cone.
Vec3 project_soc(const ContactD& contact, const Vec3& v);

/// Facet normals (outward, a . f <= 0 inside) of the 8-facet pyramid inscribed in
/// the friction cone.
std::vector<Vec3> pyramid_facets(const ContactD& contact);

/// Exact Euclidean projection onto the inscribed 8-facet pyramid.
Vec3 project_pyramid(const ContactD& contact, const Vec3& v);

bool pyramid_contains(const ContactD& contact, const Vec3& f, double tol = 1e-9);

namespace detail {

// Reduced problem in the null-space coordinates z:
//   min 0.5 z' P z + q' z  (scaled by 1/(1 + alpha + lambda)),   f = f0 + N z
struct ReducedProblem {
  Eigen::MatrixXd basis;     // N
  Eigen::VectorXd f0;        // equal split, stacked
  Eigen::MatrixXd jacobian;  // J = S N
  Vec3 h0 = Vec3::Zero();    // moment of the equal split
  Eigen::MatrixXd P;
  Eigen::VectorXd q;
  double scale = 1.0;
};

ReducedProblem reduce(const StanceConfig& stance, const Vec3& com, const Vec3& f_net,
                      const QpWeights& w);

ForceSolution finish(const StanceConfig& stance, const Vec3& com, const QpWeights& w,
                     const Eigen::VectorXd& stacked_forces);

ForceSolution solve_pyramid(const StanceConfig& stance, const Vec3& com, const Vec3& f_net,
                            const QpWeights& w, const SolverOptions& opts);

}  // namespace detail

}  // namespace pendular::forceqp
