#pragma once

// Closed-form predictions for the force QP: moment-Jacobian spectrum, the
// scaling constant, the two-contact geometric floor and its min-norm
// canceller, the friction kink, the task prefactor and the pointwise
// pendular certificate.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pendular/forceqp.hpp"
#include "pendular/model.hpp"

namespace pendular::analysis {

struct MomentJacobian {
  Eigen::MatrixXd matrix;          // 3 x 3(N-1)
  Eigen::MatrixXd basis;           // orthonormal null-space basis, 3N x 3(N-1)
  Vec3 singular_values = Vec3::Zero();  // descending, zero padded
  Eigen::Matrix3d left_vectors = Eigen::Matrix3d::Identity();
};

MomentJacobian moment_jacobian(const StanceConfig& stance, const Vec3& com);

/// Same, but with a caller-supplied orthonormal null-space basis.
MomentJacobian moment_jacobian(const StanceConfig& stance, const Vec3& com,
                               const Eigen::MatrixXd& basis);

/// Singular values of the moment Jacobian of a four-foot rectangle with
/// half-spans (lx, ly): the diagonal and the two side spans.
template <typename Scalar>
Vector3<Scalar> rect_stance_sigmas(Scalar lx, Scalar ly) {
  if (!(lx > Scalar(0)) || !(ly > Scalar(0)))
    throw DegenerateStanceError("rect_stance_sigmas: spans must be positive");
  Vector3<Scalar> s(Scalar(2) * std::sqrt(lx * lx + ly * ly), Scalar(2) * lx, Scalar(2) * ly);
  std::sort(s.data(), s.data() + 3, std::greater<Scalar>());
  return s;
}

/// K = sqrt(sum_k <h_k^2> / sigma_k^4), h_k = (U' Hdot_0)_k averaged over the
/// samples. Pass per-unit-mass excitation to get K in the units of |Hdot|/m * alpha.
double scaling_constant(const MomentJacobian& jac, std::span<const Vec3> excitation_samples);

/// Weight that brings the residual down to eps_target for a calibrated K.
template <typename Scalar>
Scalar alpha_for_residual(Scalar k, Scalar eps_target) {
  if (!(eps_target > Scalar(0)))
    throw std::invalid_argument("alpha_for_residual: eps_target must be positive");
  return k / (eps_target * eps_target);
}

template <typename Scalar>
Scalar task_prefactor(Scalar alpha, Scalar lambda) {
  if (!(alpha + lambda > Scalar(0)))
    throw std::invalid_argument("task_prefactor: alpha + lambda must be positive");
  return lambda / (alpha + lambda);
}

struct FloorReport {
  Vec3 d_hat = Vec3::UnitX();        // foot axis, sign-normalised to x >= 0
  double geometric_floor = 0.0;      // |(r x F) . d_hat| / m
  std::optional<double> floor_fraction;
  Vec3 canceller = Vec3::Zero();     // delta*, applied as f1 = F/2 + delta, f2 = F/2 - delta
  bool canceller_feasible = true;
  Vec3 h0 = Vec3::Zero();            // r x F
  Vec3 h0_perp = Vec3::Zero();
};

/// Two-contact floor on |Hdot|/m for the contact force f_net.
FloorReport geometric_floor(const StanceConfig& stance2, const Vec3& com, const Vec3& f_net);

/// Fraction of the equal-split excitation along the foot axis for a set of
/// horizontal acceleration headings. Empty where the excitation vanishes.
std::vector<std::optional<double>> floor_fraction_sweep(const StanceConfig& stance2,
                                                        const Vec3& com,
                                                        std::span<const Vec2> directions,
                                                        double accel_mag);

/// kappa = |(D x (r x x_hat))_z| / |D|^2 for fore-aft excitation.
double kink_kappa(const StanceConfig& stance2, const Vec3& com);

/// a* = mu g / (1 + 2 mu kappa).
double critical_acceleration(double mu, double gravity, double kappa);

struct KinkOptions {
  double alpha = 1e6;
  double gamma = 1.0;
  forceqp::SolverOptions solver{};
};

struct KinkPoint {
  double accel = 0.0;
  double floor = 0.0;
  double qp_inf = 0.0;
  int iterations = 0;
};

struct KinkReport {
  double kappa = 0.0;
  double a_star = 0.0;
  std::vector<KinkPoint> curve;
  double left_slope = 0.0;
  double right_slope = 0.0;
};

/// Copy of the stance with every contact's mu replaced.
StanceConfig with_friction(StanceConfig stance, double mu);

/// |Hdot|/m of the force QP at large alpha for the fore-aft contact force
/// m (a, 0, g), next to the geometric floor for the same force.
KinkPoint kink_point(const StanceConfig& stance2, const Vec3& com, double mu, double accel,
                     const KinkOptions& opts = {});

KinkReport kink_analysis(const StanceConfig& stance2, const Vec3& com, double mu,
                         std::span<const double> accel_grid, const KinkOptions& opts = {});

/// Slopes of a sampled curve on either side of a point, from the two grid
/// samples nearest to it on each side. Throws if the grid does not straddle.
std::pair<double, double> one_sided_slopes(std::span<const double> x, std::span<const double> y,
                                           double at);

struct MuSweepPoint {
  double mu = 0.0;
  double qp_inf = 0.0;
  double floor = 0.0;
};

struct MuSweep {
  std::vector<MuSweepPoint> curve;
  double max_slope_jump = 0.0;
  bool smooth = true;
};

inline constexpr double kSlopeJumpTol = 1e-3;

MuSweep mu_sweep_no_kink(const StanceConfig& stance2, const Vec3& com, double accel_fixed,
                         std::span<const double> mu_grid, const KinkOptions& opts = {});

struct CertificateReport {
  Vec3 pivot = Vec3::Zero();
  Vec3 pendular_force = Vec3::Zero();
  double pendular_hdot = 0.0;
  double best_sample_hdot = 0.0;
  double best_sample_fz = 0.0;
  std::size_t samples = 0;
  std::size_t beaten = 0;          // samples with strictly smaller |Hdot|
  double identity_error = 0.0;     // max relative error of |Hdot|^2 = |c-p|^2 |F_perp|^2
  bool pivot_in_support = false;
};

/// Brute-force check that, among net forces producing a given horizontal
/// acceleration, the pendular force has the smallest |Hdot|.
CertificateReport pointwise_certificate(const StanceConfig& stance, const Vec3& com,
                                        const Vec2& accel_xy, std::size_t n_samples,
                                        std::uint64_t seed = 1);

/// Flat summary of the closed-form quantities for one robot.
struct AnalysisReport {
  Vec3 singular_values = Vec3::Zero();
  double scaling_constant = 0.0;
  double geometric_floor = 0.0;
  Vec3 canceller = Vec3::Zero();
  double kappa = 0.0;
  double a_star = 0.0;
  double prefactor = 0.0;

  /// `key=value` lines, one per scalar.
  std::string to_text() const;
  static AnalysisReport from_text(const std::string& text);
};

}  // namespace pendular::analysis
