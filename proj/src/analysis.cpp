#include "pendular/analysis.hpp"

#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace pendular::analysis {

namespace {

void require_two_contacts(const StanceConfig& stance) {
  if (stance.size() != 2)
    throw DegenerateStanceError("two-contact analysis needs exactly 2 contacts, got " +
                                std::to_string(stance.size()));
}

Vec3 foot_axis(const StanceConfig& stance2) {
  const Vec3 d = stance2.contacts[0].position - stance2.contacts[1].position;
  if (d.norm() < 1e-12) throw DegenerateStanceError("two-contact analysis: coincident feet");
  return d;
}

Vec3 sign_normalised(Vec3 d_hat) {
  if (d_hat.x() < 0.0 || (d_hat.x() == 0.0 && d_hat.y() < 0.0)) d_hat = -d_hat;
  return d_hat;
}

}  // namespace

MomentJacobian moment_jacobian(const StanceConfig& stance, const Vec3& com) {
  if (stance.size() < 2) throw DimensionError("moment_jacobian: needs at least 2 contacts");
  return moment_jacobian(stance, com, forceqp::sum_constraint_nullspace(stance.size()));
}

MomentJacobian moment_jacobian(const StanceConfig& stance, const Vec3& com,
                               const Eigen::MatrixXd& basis) {
  if (stance.size() < 2) throw DimensionError("moment_jacobian: needs at least 2 contacts");
  const Eigen::Index m = 3 * static_cast<Eigen::Index>(stance.size());
  if (basis.rows() != m || basis.cols() != m - 3)
    throw DimensionError("moment_jacobian: basis has the wrong shape");
  MomentJacobian jac;
  jac.basis = basis;
  jac.matrix = forceqp::moment_map(stance, com) * basis;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac.matrix, Eigen::ComputeFullU);
  const auto& sv = svd.singularValues();
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(3, sv.size()); ++k) jac.singular_values(k) = sv(k);
  jac.left_vectors = svd.matrixU();
  return jac;
}

double scaling_constant(const MomentJacobian& jac, std::span<const Vec3> excitation_samples) {
  const Vec3& s = jac.singular_values;
  if (!(s(2) > 1e-12 * std::max(1.0, s(0))))
    throw DimensionError("scaling_constant: rank-deficient moment Jacobian (use the floor analysis)");
  if (excitation_samples.empty()) return 0.0;
  Vec3 mean_sq = Vec3::Zero();
  for (const auto& h : excitation_samples) {
    const Vec3 hk = jac.left_vectors.transpose() * h;
    mean_sq += hk.cwiseAbs2();
  }
  mean_sq /= double(excitation_samples.size());
  double sum = 0.0;
  for (int k = 0; k < 3; ++k) sum += mean_sq(k) / std::pow(s(k), 4);
  return std::sqrt(sum);
}

FloorReport geometric_floor(const StanceConfig& stance2, const Vec3& com, const Vec3& f_net) {
  require_two_contacts(stance2);
  const Vec3 d = foot_axis(stance2);
  const Vec3 midpoint = 0.5 * (stance2.contacts[0].position + stance2.contacts[1].position);
  const Vec3 r = midpoint - com;

  FloorReport rep;
  rep.d_hat = sign_normalised(d.normalized());
  rep.h0 = r.cross(f_net);
  const double along = rep.h0.dot(rep.d_hat);
  rep.geometric_floor = std::abs(along) / stance2.mass;
  rep.h0_perp = rep.h0 - along * rep.d_hat;
  const double h0_norm = rep.h0.norm();
  if (h0_norm > 1e-12 * std::max(1.0, f_net.norm()))
    rep.floor_fraction = std::abs(along) / h0_norm;
  rep.canceller = d.cross(rep.h0_perp) / d.squaredNorm();
  rep.canceller_feasible = friction_contains(stance2.contacts[0], Vec3(0.5 * f_net + rep.canceller)) &&
                           friction_contains(stance2.contacts[1], Vec3(0.5 * f_net - rep.canceller));
  return rep;
}

std::vector<std::optional<double>> floor_fraction_sweep(const StanceConfig& stance2,
                                                        const Vec3& com,
                                                        std::span<const Vec2> directions,
                                                        double accel_mag) {
  require_two_contacts(stance2);
  std::vector<std::optional<double>> out;
  out.reserve(directions.size());
  for (const auto& dir : directions) {
    const Vec3 acc(accel_mag * dir.x(), accel_mag * dir.y(), 0.0);
    out.push_back(geometric_floor(stance2, com, required_contact_force(stance2, acc)).floor_fraction);
  }
  return out;
}

double kink_kappa(const StanceConfig& stance2, const Vec3& com) {
  require_two_contacts(stance2);
  const Vec3 d = foot_axis(stance2);
  const Vec3 midpoint = 0.5 * (stance2.contacts[0].position + stance2.contacts[1].position);
  const Vec3 r = midpoint - com;
  return std::abs(d.cross(r.cross(Vec3::UnitX())).z()) / d.squaredNorm();
}

double critical_acceleration(double mu, double gravity, double kappa) {
  return mu * gravity / (1.0 + 2.0 * mu * kappa);
}

StanceConfig with_friction(StanceConfig stance, double mu) {
  for (auto& c : stance.contacts) c.mu = mu;
  return stance;
}

KinkPoint kink_point(const StanceConfig& stance2, const Vec3& com, double mu, double accel,
                     const KinkOptions& opts) {
  const StanceConfig s = with_friction(stance2, mu);
  const Vec3 f_net = required_contact_force(s, Vec3(accel, 0.0, 0.0));
  forceqp::QpWeights w;
  w.alpha = opts.alpha;
  w.gamma = opts.gamma;
  const auto sol = forceqp::solve(s, com, f_net, w, opts.solver);
  KinkPoint p;
  p.accel = accel;
  p.floor = geometric_floor(s, com, f_net).geometric_floor;
  p.qp_inf = sol.hdot.norm() / s.mass;
  p.iterations = sol.iterations;
  return p;
}

std::pair<double, double> one_sided_slopes(std::span<const double> x, std::span<const double> y,
                                           double at) {
  if (x.size() != y.size()) throw DimensionError("one_sided_slopes: size mismatch");
  std::ptrdiff_t left = -1, right = -1;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < at) left = static_cast<std::ptrdiff_t>(i);
    if (x[i] > at && right < 0) right = static_cast<std::ptrdiff_t>(i);
  }
  if (left < 1 || right < 0 || right + 1 >= static_cast<std::ptrdiff_t>(x.size()))
    throw std::invalid_argument("one_sided_slopes: grid does not straddle the point");
  const double sl = (y[left] - y[left - 1]) / (x[left] - x[left - 1]);
  const double sr = (y[right + 1] - y[right]) / (x[right + 1] - x[right]);
  return {sl, sr};
}

KinkReport kink_analysis(const StanceConfig& stance2, const Vec3& com, double mu,
                         std::span<const double> accel_grid, const KinkOptions& opts) {
  require_two_contacts(stance2);
  KinkReport rep;
  rep.kappa = kink_kappa(stance2, com);
  rep.a_star = critical_acceleration(mu, stance2.gravity, rep.kappa);
  std::vector<double> xs(accel_grid.begin(), accel_grid.end());
  std::sort(xs.begin(), xs.end());
  std::vector<double> ys;
  for (double a : xs) {
    rep.curve.push_back(kink_point(stance2, com, mu, a, opts));
    ys.push_back(rep.curve.back().qp_inf);
  }
  std::tie(rep.left_slope, rep.right_slope) = one_sided_slopes(xs, ys, rep.a_star);
  return rep;
}

MuSweep mu_sweep_no_kink(const StanceConfig& stance2, const Vec3& com, double accel_fixed,
                         std::span<const double> mu_grid, const KinkOptions& opts) {
  require_two_contacts(stance2);
  MuSweep out;
  std::vector<double> mus(mu_grid.begin(), mu_grid.end());
  std::sort(mus.begin(), mus.end());
  for (double mu : mus) {
    const auto p = kink_point(stance2, com, mu, accel_fixed, opts);
    out.curve.push_back({mu, p.qp_inf, p.floor});
  }
  std::vector<double> slopes;
  for (std::size_t i = 1; i < out.curve.size(); ++i)
    slopes.push_back((out.curve[i].qp_inf - out.curve[i - 1].qp_inf) /
                     (out.curve[i].mu - out.curve[i - 1].mu));
  for (std::size_t i = 1; i < slopes.size(); ++i)
    out.max_slope_jump = std::max(out.max_slope_jump, std::abs(slopes[i] - slopes[i - 1]));
  out.smooth = out.max_slope_jump <= kSlopeJumpTol;
  return out;
}

CertificateReport pointwise_certificate(const StanceConfig& stance, const Vec3& com,
                                        const Vec2& accel_xy, std::size_t n_samples,
                                        std::uint64_t seed) {
  const Vec3 n = stance_normal(stance);
  const double plane = n.dot(centroid(stance));
  const double height = n.dot(com) - plane;
  if (!(height >= stance.h_min)) throw DegenerateStanceError("pointwise_certificate: CoM too low");
  const double m = stance.mass;
  const double g = stance.gravity;

  CertificateReport rep;
  // LIPM pivot for the prescribed acceleration, on the contact plane.
  rep.pivot = com - height * n;
  rep.pivot.head<2>() -= (height / g) * accel_xy;
  rep.pivot_in_support =
      polygon_contains<double>(stance.support_region, plane_coordinates(n, rep.pivot), 1e-9);
  const Vec3 lever = com - rep.pivot;
  rep.pendular_force = (m * g / height) * lever;
  rep.pendular_hdot = (rep.pivot - com).cross(rep.pendular_force).norm();

  const double fz_pend = rep.pendular_force.z();
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.05 * fz_pend, 3.0 * fz_pend);
  const std::size_t n_grid = n_samples / 2;
  rep.best_sample_hdot = std::numeric_limits<double>::infinity();
  const Vec3 u = lever.normalized();
  for (std::size_t k = 0; k < n_samples; ++k) {
    const double fz = k < n_grid
                          ? 0.05 * fz_pend + (2.95 * fz_pend) * double(k) / double(std::max<std::size_t>(1, n_grid - 1))
                          : unif(rng);
    const Vec3 f(m * accel_xy.x(), m * accel_xy.y(), fz);
    const double hd = (rep.pivot - com).cross(f).norm();
    const Vec3 f_perp = f - f.dot(u) * u;
    const double lhs = hd * hd;
    const double rhs = lever.squaredNorm() * f_perp.squaredNorm();
    rep.identity_error = std::max(rep.identity_error,
                                  std::abs(lhs - rhs) / std::max(1e-300, lever.squaredNorm() * f.squaredNorm()));
    if (hd < rep.best_sample_hdot) {
      rep.best_sample_hdot = hd;
      rep.best_sample_fz = fz;
    }
    if (hd < rep.pendular_hdot - 1e-12 * f.norm()) ++rep.beaten;
  }
  rep.samples = n_samples;
  return rep;
}

std::string AnalysisReport::to_text() const {
  std::ostringstream os;
  os.precision(17);
  os << "sigma1=" << singular_values(0) << '\n'
     << "sigma2=" << singular_values(1) << '\n'
     << "sigma3=" << singular_values(2) << '\n'
     << "scaling_constant=" << scaling_constant << '\n'
     << "geometric_floor=" << geometric_floor << '\n'
     << "canceller_x=" << canceller.x() << '\n'
     << "canceller_y=" << canceller.y() << '\n'
     << "canceller_z=" << canceller.z() << '\n'
     << "kappa=" << kappa << '\n'
     << "a_star=" << a_star << '\n'
     << "prefactor=" << prefactor << '\n';
  return os.str();
}

AnalysisReport AnalysisReport::from_text(const std::string& text) {
  std::map<std::string, double> kv;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = std::stod(line.substr(eq + 1));
  }
  auto get = [&](const char* k) {
    const auto it = kv.find(k);
    if (it == kv.end()) throw std::invalid_argument(std::string("AnalysisReport: missing ") + k);
    return it->second;
  };
  AnalysisReport r;
  r.singular_values = {get("sigma1"), get("sigma2"), get("sigma3")};
  r.scaling_constant = get("scaling_constant");
  r.geometric_floor = get("geometric_floor");
  r.canceller = {get("canceller_x"), get("canceller_y"), get("canceller_z")};
  r.kappa = get("kappa");
  r.a_star = get("a_star");
  r.prefactor = get("prefactor");
  return r;
}

}  // namespace pendular::analysis
