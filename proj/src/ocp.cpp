#include "pendular/ocp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pendular/forceqp.hpp"
#include "pendular/lbfgs.hpp"

namespace pendular::ocp {

namespace {

bool finite(const Vec3& v) { return v.allFinite(); }

double knot_weight(int k, int knots, double dt) {
  return (k == 0 || k == knots - 1) ? 0.5 * dt : dt;
}

struct Rollout {
  std::vector<Vec3> c, v, a, force, hdot;
};

Rollout rollout(const OcpProblem& pb, const Eigen::VectorXd& x) {
  const int K = pb.knots;
  const std::size_t N = pb.stance.size();
  const double dt = pb.dt();
  const double m = pb.stance.mass;
  const Vec3 g = gravity_vector(pb.stance.gravity);
  Rollout r;
  r.c.resize(K);
  r.v.resize(K);
  r.a.resize(K);
  r.force.resize(K);
  r.hdot.resize(K);
  for (int k = 0; k < K; ++k) {
    Vec3 F = Vec3::Zero();
    for (std::size_t i = 0; i < N; ++i) F += x.segment<3>(3 * (k * N + i));
    r.force[k] = F;
    r.a[k] = F / m + g;
  }
  // Exact integration of the linearly interpolated force.
  r.c[0] = pb.initial.position;
  r.v[0] = pb.initial.velocity;
  for (int k = 0; k + 1 < K; ++k) {
    r.v[k + 1] = r.v[k] + 0.5 * dt * (r.a[k] + r.a[k + 1]);
    r.c[k + 1] = r.c[k] + dt * r.v[k] + dt * dt / 6.0 * (2.0 * r.a[k] + r.a[k + 1]);
  }
  for (int k = 0; k < K; ++k) {
    Vec3 H = Vec3::Zero();
    for (std::size_t i = 0; i < N; ++i)
      H += (pb.stance.contacts[i].position - r.c[k]).cross(Vec3(x.segment<3>(3 * (k * N + i))));
    r.hdot[k] = H;
  }
  return r;
}

double running_cost(const OcpProblem& pb, const Eigen::VectorXd& x, const Rollout& r) {
  const int K = pb.knots;
  const double dt = pb.dt();
  double J = 0.0;
  for (int k = 0; k < K; ++k) {
    const double na = pb.normal.dot(r.a[k]);
    const double fsq = x.segment(3 * k * pb.stance.size(), 3 * pb.stance.size()).squaredNorm();
    const double l = pb.alpha * r.hdot[k].squaredNorm() +
                     pb.lambda * (r.hdot[k] - pb.task_at(k)).squaredNorm() +
                     pb.beta * na * na + pb.gamma * fsq;
    J += knot_weight(k, K, dt) * l;
  }
  return J;
}

// Adjoint pass. seed_c / seed_v are extra gradients on the terminal state.
void backprop(const OcpProblem& pb, const Eigen::VectorXd& x, const Rollout& r,
              const Vec3& seed_c, const Vec3& seed_v, Eigen::VectorXd& grad) {
  const int K = pb.knots;
  const std::size_t N = pb.stance.size();
  const double dt = pb.dt();
  const double m = pb.stance.mass;
  grad.resize(x.size());
  // lc, lv: adjoints of c_k, v_k; la_next: dynamics adjoint of a_k owed by
  // the transition k -> k+1.
  Vec3 lc = seed_c;
  Vec3 lv = seed_v;
  Vec3 la_next = Vec3::Zero();
  for (int k = K - 1; k >= 0; --k) {
    if (k < K - 1) {
      la_next = 0.5 * dt * lv + dt * dt / 3.0 * lc;
      lv += dt * lc;
    }
    const double w = knot_weight(k, K, dt);
    const Vec3 W = w * (2.0 * pb.alpha * r.hdot[k] + 2.0 * pb.lambda * (r.hdot[k] - pb.task_at(k)));
    lc += W.cross(r.force[k]);
    Vec3 la = (k < K - 1 ? la_next : Vec3::Zero()) + w * 2.0 * pb.beta * pb.normal.dot(r.a[k]) * pb.normal;
    // a_k also enters the transition k-1 -> k.
    if (k > 0) la += 0.5 * dt * lv + dt * dt / 6.0 * lc;
    for (std::size_t i = 0; i < N; ++i) {
      const Eigen::Index off = 3 * (k * N + i);
      const Vec3 f = x.segment<3>(off);
      grad.segment<3>(off) = W.cross(pb.stance.contacts[i].position - r.c[k]) +
                             w * 2.0 * pb.gamma * f + la / m;
    }
  }
}

double max_cone_violation(const OcpProblem& pb, const Eigen::VectorXd& x) {
  const std::size_t N = pb.stance.size();
  double worst = 0.0;
  for (int k = 0; k < pb.knots; ++k)
    for (std::size_t i = 0; i < N; ++i)
      worst = std::max(worst, friction_violation(pb.stance.contacts[i],
                                                 Vec3(x.segment<3>(3 * (k * N + i)))));
  return worst;
}

Vec3 lift_to_plane(const StanceConfig& stance, const Vec3& n, const Vec2& q) {
  const double offset = n.dot(centroid(stance));
  if ((n - Vec3::UnitZ()).norm() < 1e-12) return {q.x(), q.y(), offset};
  const auto [t1, t2] = tangent_basis(n);
  return q.x() * t1 + q.y() * t2 + offset * n;
}

}  // namespace

void OcpProblem::validate() const {
  if (stance.contacts.empty()) throw DegenerateStanceError("ocp: stance has no contacts");
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw std::invalid_argument("ocp: horizon must be positive");
  if (knots < 2) throw std::invalid_argument("ocp: need at least two knots");
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(lambda >= 0.0))
    throw std::invalid_argument("ocp: weights must be non-negative");
  if (!(gamma > 0.0)) throw std::invalid_argument("ocp: gamma must be positive");
  if (std::abs(normal.norm() - 1.0) > 1e-9) throw std::invalid_argument("ocp: normal must be unit");
  if (!finite(initial.position) || !finite(initial.velocity) || !finite(terminal.position) ||
      !finite(terminal.velocity))
    throw std::invalid_argument("ocp: boundary states must be finite");
  if (!hdot_task.empty() && hdot_task.size() != 1 &&
      hdot_task.size() != static_cast<std::size_t>(knots))
    throw DimensionError("ocp: hdot_task must be empty, constant or one sample per knot");
}

Vec3 OcpProblem::task_at(int k) const {
  if (hdot_task.empty()) return Vec3::Zero();
  if (hdot_task.size() == 1) return hdot_task.front();
  return hdot_task[static_cast<std::size_t>(k)];
}

Eigen::VectorXd pack(const KnotForces& forces) {
  std::size_t total = 0;
  for (const auto& row : forces) total += row.size();
  Eigen::VectorXd x(3 * static_cast<Eigen::Index>(total));
  Eigen::Index off = 0;
  for (const auto& row : forces)
    for (const auto& f : row) {
      x.segment<3>(off) = f;
      off += 3;
    }
  return x;
}

KnotForces unpack(const OcpProblem& problem, const Eigen::VectorXd& x) {
  if (static_cast<std::size_t>(x.size()) != problem.n_vars())
    throw DimensionError("ocp: decision vector has the wrong length");
  const std::size_t N = problem.stance.size();
  KnotForces out(problem.knots, std::vector<Vec3>(N));
  for (int k = 0; k < problem.knots; ++k)
    for (std::size_t i = 0; i < N; ++i) out[k][i] = x.segment<3>(3 * (k * N + i));
  return out;
}

double transcribed_cost(const OcpProblem& problem, const Eigen::VectorXd& x,
                        Eigen::VectorXd* grad) {
  if (static_cast<std::size_t>(x.size()) != problem.n_vars())
    throw DimensionError("ocp: decision vector has the wrong length");
  const Rollout r = rollout(problem, x);
  if (grad) backprop(problem, x, r, Vec3::Zero(), Vec3::Zero(), *grad);
  return running_cost(problem, x, r);
}

namespace detail {

double augmented_lagrangian(const OcpProblem& pb, const Eigen::VectorXd& x,
                            const Multipliers& mult, Eigen::VectorXd* grad) {
  const Rollout r = rollout(pb, x);
  const int K = pb.knots;
  const std::size_t N = pb.stance.size();
  const double T = pb.horizon;
  const Vec3 ec = r.c[K - 1] - pb.terminal.position;
  const Vec3 ev = T * (r.v[K - 1] - pb.terminal.velocity);
  double L = running_cost(pb, x, r);
  L += mult.position.dot(ec) + 0.5 * mult.rho_bc * ec.squaredNorm();
  L += mult.velocity.dot(ev) + 0.5 * mult.rho_bc * ev.squaredNorm();
  if (grad) {
    const Vec3 seed_c = mult.position + mult.rho_bc * ec;
    const Vec3 seed_v = T * (mult.velocity + mult.rho_bc * ev);
    backprop(pb, x, r, seed_c, seed_v, *grad);
  }
  const double rho = mult.rho_cone;
  for (int k = 0; k < K; ++k)
    for (std::size_t i = 0; i < N; ++i) {
      const Eigen::Index off = 3 * (k * N + i);
      const Vec3 y = mult.cone.size() ? Vec3(mult.cone.segment<3>(off)) : Vec3::Zero();
      const Vec3 s = Vec3(x.segment<3>(off)) + y / rho;
      const Vec3 d = s - forceqp::project_soc(pb.stance.contacts[i], s);
      L += 0.5 * rho * d.squaredNorm() - y.squaredNorm() / (2.0 * rho);
      if (grad) grad->segment<3>(off) += rho * d;
    }
  return L;
}

}  // namespace detail

std::vector<CentroidalStateD> integrate(const OcpProblem& problem, const KnotForces& forces) {
  if (forces.size() != static_cast<std::size_t>(problem.knots))
    throw DimensionError("ocp: force trajectory has the wrong number of knots");
  const Rollout r = rollout(problem, pack(forces));
  std::vector<CentroidalStateD> traj(problem.knots);
  const Vec3 n = stance_normal(problem.stance);
  for (int k = 0; k < problem.knots; ++k) {
    Vec3 pivot = r.c[k] - n.dot(r.c[k] - centroid(problem.stance)) * n;
    try {
      pivot = lift_to_plane(problem.stance, n,
                            center_of_pressure(problem.stance, std::span<const Vec3>(forces[k])));
    } catch (const DegenerateStanceError&) {
      // No normal load: keep the vertical projection of the CoM.
    }
    traj[k] = make_state(r.c[k], pivot, r.v[k], r.a[k], n);
  }
  return traj;
}

OcpMetrics metrics(const StanceConfig& stance, const KnotForces& forces,
                   std::span<const CentroidalStateD> traj, double dt) {
  const std::size_t K = traj.size();
  if (K < 2 || forces.size() != K) throw DimensionError("metrics: need matching knots, K >= 2");
  if (!(dt > 0.0)) throw std::invalid_argument("metrics: dt must be positive");
  const double T = dt * static_cast<double>(K - 1);
  const double m = stance.mass;
  const double g = stance.gravity;
  const Vec3 n = stance_normal(stance);

  OcpMetrics out;
  std::vector<Vec2> y(K), yhat(K);
  std::size_t inside = 0;
  for (std::size_t k = 0; k < K; ++k) {
    const auto& st = traj[k];
    const auto& fk = forces[k];
    if (fk.size() != stance.size()) throw DimensionError("metrics: contact count mismatch");
    Vec3 F = Vec3::Zero();
    Vec3 H = Vec3::Zero();
    for (std::size_t i = 0; i < fk.size(); ++i) {
      F += fk[i];
      H += (stance.contacts[i].position - st.com).cross(fk[i]);
    }
    const Vec2 cop = center_of_pressure(stance, std::span<const Vec3>(fk));
    const Vec3 p = lift_to_plane(stance, n, cop);
    const double h = n.dot(st.com - p);
    if (!(h >= stance.h_min)) throw DegenerateStanceError("metrics: CoM height below h_min");
    const double w = knot_weight(static_cast<int>(k), static_cast<int>(K), dt) / T;
    out.eps_H += w * H.norm();
    out.eps_pend += w * (F / m - (g / h) * (st.com - p)).norm();
    const double na = n.dot(st.com_acc);
    out.normal_acc_sq += w * na * na;

    const Vec2 c_xy = plane_coordinates(n, st.com);
    const Vec2 a_xy = plane_coordinates(n, st.com_acc);
    const Vec2 zmp_xy = c_xy - (h / g) * a_xy;
    const double dev = (zmp_xy - cop).norm();
    out.zmp_pivot_mean += w * dev;
    out.zmp_pivot_max = std::max(out.zmp_pivot_max, dev);
    if (polygon_contains(std::span<const Vec2>(stance.support_region), zmp_xy, 1e-9)) ++inside;
    y[k] = a_xy;
    yhat[k] = (g / h) * (c_xy - cop);
  }
  out.zmp_inside_fraction = static_cast<double>(inside) / static_cast<double>(K);

  Vec2 mean = Vec2::Zero();
  for (const auto& v : y) mean += v;
  mean /= static_cast<double>(K);
  double ss_tot = 0.0, ss_res = 0.0, scale = 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    ss_tot += (y[k] - mean).squaredNorm();
    ss_res += (y[k] - yhat[k]).squaredNorm();
    scale += y[k].squaredNorm();
  }
  out.lipm_r2 = ss_tot <= 1e-24 * std::max(1.0, scale) ? std::numeric_limits<double>::quiet_NaN()
                                                       : 1.0 - ss_res / ss_tot;
  return out;
}

OcpMetrics metrics(const OcpSolution& sol, const StanceConfig& stance) {
  return metrics(stance, sol.knot_forces, std::span<const CentroidalStateD>(sol.com_traj), sol.dt);
}

std::pair<double, double> collapse_rate_fit(std::span<const std::pair<double, double>> sweep) {
  if (sweep.size() < 4) throw std::invalid_argument("collapse_rate_fit: need at least 4 points");
  Eigen::MatrixXd A(sweep.size(), 2);
  Eigen::VectorXd b(sweep.size());
  for (std::size_t i = 0; i < sweep.size(); ++i) {
    const auto [alpha, eps] = sweep[i];
    if (!(alpha > 0.0) || !(eps > 0.0))
      throw std::invalid_argument("collapse_rate_fit: points must be positive");
    A(i, 0) = std::log(alpha);
    A(i, 1) = 1.0;
    b(i) = std::log(eps);
  }
  if (A.col(0).maxCoeff() - A.col(0).minCoeff() <= 0.0)
    throw std::invalid_argument("collapse_rate_fit: alphas must differ");
  const Eigen::Vector2d sol = A.colPivHouseholderQr().solve(b);
  return {sol(0), sol(1)};
}

OcpSolution solve_ocp(const OcpProblem& pb, const OcpOptions& opts) {
  pb.validate();
  const int K = pb.knots;
  const std::size_t N = pb.stance.size();
  const double dt = pb.dt();
  const double g = pb.stance.gravity;

  // With unilateral contacts on a common normal the CoM cannot fall faster
  // than gravity along it.
  bool common_normal = true;
  for (const auto& c : pb.stance.contacts) common_normal = common_normal && (c.normal - pb.normal).norm() < 1e-12;
  if (common_normal) {
    const Vec3 gv = gravity_vector(g);
    const double a_min = pb.normal.dot(gv);
    const double T = pb.horizon;
    const double v_min = pb.normal.dot(pb.initial.velocity) + T * a_min;
    const double c_min = pb.normal.dot(pb.initial.position) + T * pb.normal.dot(pb.initial.velocity) +
                         0.5 * T * T * a_min;
    const double need_v = pb.normal.dot(pb.terminal.velocity);
    const double need_c = pb.normal.dot(pb.terminal.position);
    if (need_v < v_min - opts.bc_tol || need_c < c_min - opts.bc_tol)
      throw InfeasibleError("ocp: terminal state unreachable with unilateral contacts", -pb.normal,
                            std::max(v_min - need_v, c_min - need_c));
  }

  KnotForces guess(K, equal_split(pb.stance, required_contact_force(pb.stance, Vec3::Zero().eval())));
  Eigen::VectorXd x = pack(guess);
  detail::Multipliers mult;
  mult.cone = Eigen::VectorXd::Zero(x.size());

  optim::LbfgsOptions lopts;
  lopts.grad_tol = opts.tol;
  lopts.max_iter = opts.max_inner;

  OcpSolution sol;
  sol.dt = dt;
  double prev_bc = std::numeric_limits<double>::infinity();
  double prev_cone = std::numeric_limits<double>::infinity();
  bool done = false;
  int outer = 0;
  for (; outer < opts.max_outer && !done; ++outer) {
    const auto res = optim::minimize_lbfgs(
        [&](const Eigen::VectorXd& z, Eigen::VectorXd& gz) {
          return detail::augmented_lagrangian(pb, z, mult, &gz);
        },
        x, lopts);
    x = res.x;
    sol.inner_iterations += res.iterations;
    sol.stationarity = res.grad_norm / std::max(1.0, std::abs(res.f));

    const Rollout r = rollout(pb, x);
    const Vec3 ec = r.c[K - 1] - pb.terminal.position;
    const Vec3 ev = pb.horizon * (r.v[K - 1] - pb.terminal.velocity);
    sol.bc_residual = std::max(ec.lpNorm<Eigen::Infinity>(), ev.lpNorm<Eigen::Infinity>());
    sol.cone_violation = max_cone_violation(pb, x);
    done = sol.bc_residual <= opts.bc_tol && sol.cone_violation <= opts.cone_tol &&
           sol.stationarity <= opts.tol;
    if (done) break;

    mult.position += mult.rho_bc * ec;
    mult.velocity += mult.rho_bc * ev;
    for (int k = 0; k < K; ++k)
      for (std::size_t i = 0; i < N; ++i) {
        const Eigen::Index off = 3 * (k * N + i);
        const Vec3 s = Vec3(x.segment<3>(off)) + Vec3(mult.cone.segment<3>(off)) / mult.rho_cone;
        mult.cone.segment<3>(off) =
            mult.rho_cone * (s - forceqp::project_soc(pb.stance.contacts[i], s));
      }
    if (sol.bc_residual > 0.25 * prev_bc && sol.bc_residual > opts.bc_tol)
      mult.rho_bc = std::min(mult.rho_bc * 10.0, 1e14);
    if (sol.cone_violation > 0.25 * prev_cone && sol.cone_violation > opts.cone_tol)
      mult.rho_cone = std::min(mult.rho_cone * 10.0, 1e12);
    prev_bc = sol.bc_residual;
    prev_cone = sol.cone_violation;
  }
  sol.outer_iterations = outer + (done ? 1 : 0);

  sol.knot_forces = unpack(pb, x);
  sol.com_traj = integrate(pb, sol.knot_forces);
  const Rollout r = rollout(pb, x);
  sol.hdot = r.hdot;
  sol.objective = running_cost(pb, x, r);
  try {
    sol.full_metrics = metrics(sol, pb.stance);
    sol.eps_H = sol.full_metrics.eps_H;
    sol.eps_pend = sol.full_metrics.eps_pend;
    sol.lipm_r2 = sol.full_metrics.lipm_r2;
  } catch (const Error&) {
    if (done) throw;
  }
  if (!done) {
    if (sol.bc_residual > 1e3 * opts.bc_tol && mult.rho_bc >= 1e14)
      throw InfeasibleError("ocp: terminal conditions not reachable under the cone limits",
                            Vec3::Zero(), sol.bc_residual);
    throw OcpConvergenceError("ocp: augmented Lagrangian did not converge", std::move(sol));
  }
  return sol;
}

}  // namespace pendular::ocp
