#include "pendular/forceqp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace pendular::forceqp {

namespace {

Eigen::Matrix3d skew(const Vec3& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

std::vector<Vec3> unstack(const Eigen::VectorXd& v) {
  std::vector<Vec3> out(v.size() / 3);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = v.segment<3>(3 * i);
  return out;
}

Vec3 project(const ContactD& c, const Vec3& v, ConeModel model) {
  switch (model) {
    case ConeModel::soc:
      return project_soc(c, v);
    case ConeModel::pyramid8:
      return project_pyramid(c, v);
    case ConeModel::none:
      return v;
  }
  return v;
}

bool inside(const ContactD& c, const Vec3& f, ConeModel model, double tol) {
  switch (model) {
    case ConeModel::soc:
      return friction_contains(c, f, tol);
    case ConeModel::pyramid8:
      return pyramid_contains(c, f, tol);
    case ConeModel::none:
      return true;
  }
  return true;
}

}  // namespace

std::string to_string(ConeModel model) {
  switch (model) {
    case ConeModel::soc:
      return "soc";
    case ConeModel::pyramid8:
      return "pyramid8";
    case ConeModel::none:
      return "none";
  }
  return "soc";
}

ConeModel cone_model_from_string(const std::string& name) {
  if (name == "soc") return ConeModel::soc;
  if (name == "pyramid8") return ConeModel::pyramid8;
  if (name == "none") return ConeModel::none;
  throw std::invalid_argument("unknown cone model '" + name + "' (expected soc or pyramid8)");
}

void QpWeights::validate() const {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("alpha must be >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("lambda must be >= 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw std::invalid_argument("gamma must be > 0");
  if (!hdot_task.allFinite()) throw std::invalid_argument("hdot_task must be finite");
}

Eigen::MatrixXd sum_constraint_nullspace(std::size_t n_contacts) {
  const Eigen::Index m = 3 * static_cast<Eigen::Index>(n_contacts);
  if (n_contacts < 2) return Eigen::MatrixXd(m, 0);
  Eigen::MatrixXd at(m, 3);
  for (std::size_t i = 0; i < n_contacts; ++i) at.block<3, 3>(3 * i, 0).setIdentity();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(at);
  const Eigen::MatrixXd q = qr.householderQ();
  return q.rightCols(m - 3);
}

Eigen::MatrixXd moment_map(const StanceConfig& stance, const Vec3& com) {
  Eigen::MatrixXd s(3, 3 * stance.size());
  for (std::size_t i = 0; i < stance.size(); ++i)
    s.block<3, 3>(0, 3 * i) = skew(stance.contacts[i].position - com);
  return s;
}

double objective_value(const StanceConfig& stance, const Vec3& com,
                       const std::vector<Vec3>& forces, const QpWeights& w) {
  const Vec3 h = net_wrench(stance, com, forces).hdot;
  double reg = 0.0;
  for (const auto& f : forces) reg += f.squaredNorm();
  return w.alpha * h.squaredNorm() + w.lambda * (h - w.hdot_task).squaredNorm() + w.gamma * reg;
}

Vec3 project_soc(const ContactD& c, const Vec3& v) {
  const double fn = c.normal.dot(v);
  const Vec3 vt = v - fn * c.normal;
  const double t = vt.norm();
  if (t <= c.mu * fn) return v;
  if (c.mu * t <= -fn) return Vec3::Zero();
  const double pn = (fn + c.mu * t) / (1.0 + c.mu * c.mu);
  return pn * c.normal + (c.mu * pn / t) * vt;
}

std::vector<Vec3> pyramid_facets(const ContactD& c) {
  const auto [t1, t2] = tangent_basis(c.normal);
  constexpr int kEdges = 8;
  std::vector<Vec3> edges(kEdges);
  for (int j = 0; j < kEdges; ++j) {
    const double th = 2.0 * std::numbers::pi * j / kEdges;
    edges[j] = c.normal + c.mu * (std::cos(th) * t1 + std::sin(th) * t2);
  }
  std::vector<Vec3> facets(kEdges);
  for (int j = 0; j < kEdges; ++j) {
    Vec3 a = edges[j].cross(edges[(j + 1) % kEdges]).normalized();
    if (a.dot(c.normal) > 0.0) a = -a;
    facets[j] = a;
  }
  return facets;
}

bool pyramid_contains(const ContactD& c, const Vec3& f, double tol) {
  const double scale = std::max(1.0, f.norm());
  for (const auto& a : pyramid_facets(c))
    if (a.dot(f) > tol * scale) return false;
  return true;
}

Vec3 project_pyramid(const ContactD& c, const Vec3& v) {
  const auto facets = pyramid_facets(c);
  auto feasible = [&](const Vec3& p) {
    const double scale = std::max(1.0, p.norm());
    for (const auto& a : facets)
      if (a.dot(p) > 1e-12 * scale) return false;
    return true;
  };
  if (feasible(v)) return v;
  // The projection lies on a facet, on an edge ray or at the apex.
  Vec3 best = Vec3::Zero();
  double best_d = v.squaredNorm();
  const std::size_t k = facets.size();
  for (std::size_t j = 0; j < k; ++j) {
    const Vec3 p = v - facets[j].dot(v) * facets[j];
    if (feasible(p) && (p - v).squaredNorm() < best_d) {
      best = p;
      best_d = (p - v).squaredNorm();
    }
    const Vec3 e = facets[j].cross(facets[(j + 1) % k]);
    Vec3 dir = e.dot(c.normal) > 0.0 ? e : Vec3(-e);
    dir.normalize();
    const Vec3 r = std::max(0.0, v.dot(dir)) * dir;
    if ((r - v).squaredNorm() < best_d) {
      best = r;
      best_d = (r - v).squaredNorm();
    }
  }
  return best;
}

ReachabilityResult reachability(const StanceConfig& stance, const Vec3& f_net, ConeModel model) {
  ReachabilityResult out;
  const std::size_t n = stance.size();
  std::vector<Vec3> y(n), prev(n), w(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = project(stance.contacts[i], f_net / double(n), model);
  prev = y;
  w = y;
  auto residual = [&](const std::vector<Vec3>& v) {
    Vec3 s = -f_net;
    for (const auto& vi : v) s += vi;
    return s;
  };
  const double target = 1e-7 * std::max(1.0, f_net.norm());
  double t = 1.0;
  double last_gap = residual(y).norm();
  int stall = 0;
  const double step = 1.0 / double(n);
  int it = 0;
  for (; it < 200000 && last_gap > target; ++it) {
    const Vec3 g = residual(w);
    for (std::size_t i = 0; i < n; ++i) {
      prev[i] = y[i];
      y[i] = project(stance.contacts[i], w[i] - step * g, model);
    }
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    for (std::size_t i = 0; i < n; ++i) w[i] = y[i] + ((t - 1.0) / t_next) * (y[i] - prev[i]);
    t = t_next;
    const double gap = residual(y).norm();
    if (last_gap - gap <= 1e-13 * std::max(1.0, f_net.norm())) {
      if (++stall > 2000) break;
    } else {
      stall = 0;
    }
    // Restart momentum whenever the objective goes up.
    if (gap > last_gap) {
      t = 1.0;
      w = y;
    }
    last_gap = std::min(last_gap, gap);
  }
  const Vec3 r = residual(y);
  out.gap = r.norm();
  out.direction = out.gap > 0.0 ? Vec3(-r / out.gap) : Vec3::Zero();
  out.closest = y;
  out.iterations = it;
  return out;
}

namespace detail {

ReducedProblem reduce(const StanceConfig& stance, const Vec3& com, const Vec3& f_net,
                      const QpWeights& w) {
  ReducedProblem rp;
  const std::size_t n = stance.size();
  rp.basis = sum_constraint_nullspace(n);
  rp.f0 = Eigen::VectorXd(3 * n);
  for (std::size_t i = 0; i < n; ++i) rp.f0.segment<3>(3 * i) = f_net / double(n);
  const Eigen::MatrixXd s = moment_map(stance, com);
  rp.jacobian = s * rp.basis;
  rp.h0 = s * rp.f0;
  rp.scale = 1.0 / (1.0 + w.alpha + w.lambda);
  const Eigen::Index dim = rp.basis.cols();
  rp.P = rp.scale * (2.0 * (w.alpha + w.lambda) * rp.jacobian.transpose() * rp.jacobian +
                     2.0 * w.gamma * Eigen::MatrixXd::Identity(dim, dim));
  rp.q = rp.scale * (2.0 * w.alpha * rp.jacobian.transpose() * rp.h0 +
                     2.0 * w.lambda * rp.jacobian.transpose() * (rp.h0 - w.hdot_task));
  return rp;
}

ForceSolution finish(const StanceConfig& stance, const Vec3& com, const QpWeights& w,
                     const Eigen::VectorXd& stacked_forces) {
  ForceSolution sol;
  sol.forces = unstack(stacked_forces);
  sol.hdot = net_wrench(stance, com, sol.forces).hdot;
  sol.objective = objective_value(stance, com, sol.forces, w);
  sol.cone_active.resize(stance.size());
  for (std::size_t i = 0; i < stance.size(); ++i) {
    const auto& c = stance.contacts[i];
    const Vec3& f = sol.forces[i];
    const double fn = c.normal.dot(f);
    const double ft = (f - fn * c.normal).norm();
    sol.cone_active[i] = ft - c.mu * fn >= -1e-7 * (1.0 + f.norm());
  }
  return sol;
}

}  // namespace detail

ForceSolution solve_unconstrained(const StanceConfig& stance, const Vec3& com, const Vec3& f_net,
                                  const QpWeights& w) {
  w.validate();
  const auto rp = detail::reduce(stance, com, f_net, w);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(rp.basis.cols());
  if (z.size() > 0) {
    Eigen::LDLT<Eigen::MatrixXd> ldlt(rp.P);
    if (ldlt.info() != Eigen::Success) throw DimensionError("solve_unconstrained: singular system");
    z = ldlt.solve(-rp.q);
  }
  auto sol = detail::finish(stance, com, w, rp.f0 + rp.basis * z);
  sol.cone_active.assign(stance.size(), false);
  return sol;
}

ForceSolution solve(const StanceConfig& stance, const Vec3& com, const Vec3& f_net,
                    const QpWeights& w, const SolverOptions& opts) {
  w.validate();
  if (stance.size() == 0) throw DimensionError("solve: empty stance");
  if (!f_net.allFinite()) throw std::invalid_argument("solve: F_net must be finite");
  const ConeModel model = opts.cone_model;

  // Feasibility: the equal split is a certificate; otherwise project F_net onto
  // the Minkowski sum of the cones.
  if (model != ConeModel::none) {
    bool split_ok = true;
    for (const auto& c : stance.contacts)
      split_ok = split_ok && inside(c, f_net / double(stance.size()), model, 1e-12);
    if (!split_ok) {
      const auto reach = reachability(stance, f_net, model);
      if (reach.gap > 1e-6 * std::max(1.0, f_net.norm()))
        throw InfeasibleError("solve: F_net outside the sum of friction cones", reach.direction,
                              reach.gap);
    }
  }

  if (model == ConeModel::pyramid8) return detail::solve_pyramid(stance, com, f_net, w, opts);

  const auto rp = detail::reduce(stance, com, f_net, w);
  const Eigen::Index n = rp.basis.cols();
  const Eigen::Index m = rp.f0.size();

  if (n == 0) {
    auto sol = detail::finish(stance, com, w, rp.f0);
    return sol;
  }

  auto project_all = [&](const Eigen::VectorXd& v) {
    Eigen::VectorXd out(v.size());
    for (std::size_t i = 0; i < stance.size(); ++i)
      out.segment<3>(3 * i) = project(stance.contacts[i], v.segment<3>(3 * i), model);
    return out;
  };

  double rho = std::max(1e-6, rp.P.diagonal().mean());
  constexpr double kRelax = 1.6;
  Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
  Eigen::LLT<Eigen::MatrixXd> llt(rp.P + rho * eye);

  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = project_all(rp.f0);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd fz(m), y_prev(m);

  double r_prim = 0.0, r_dual = 0.0;
  int it = 0;
  bool converged = false;
  for (; it < opts.max_iter; ++it) {
    const Eigen::VectorXd rhs = -rp.q + rho * rp.basis.transpose() * (y - u - rp.f0);
    z = llt.solve(rhs);
    fz = rp.f0 + rp.basis * z;
    const Eigen::VectorXd fr = kRelax * fz + (1.0 - kRelax) * y;
    y_prev = y;
    y = project_all(fr + u);
    u += fr - y;

    r_prim = (fz - y).lpNorm<Eigen::Infinity>();
    const Eigen::VectorXd dual_vec = rho * rp.basis.transpose() * (y - y_prev);
    r_dual = dual_vec.lpNorm<Eigen::Infinity>();

    const double prim_scale = std::max({1.0, fz.lpNorm<Eigen::Infinity>(), y.lpNorm<Eigen::Infinity>()});
    const Eigen::VectorXd pz = rp.P * z;
    const Eigen::VectorXd nu = rho * rp.basis.transpose() * u;
    const double dual_scale = std::max({1e-3, pz.lpNorm<Eigen::Infinity>(),
                                        rp.q.lpNorm<Eigen::Infinity>(),
                                        nu.lpNorm<Eigen::Infinity>()});
    if (r_prim <= opts.tol * prim_scale && r_dual <= opts.tol * dual_scale) {
      converged = true;
      ++it;
      break;
    }
    if (it % 50 == 49) {
      const double ratio = std::sqrt((r_prim / prim_scale) / std::max(r_dual / dual_scale, 1e-300));
      if (ratio > 5.0 || ratio < 0.2) {
        const double new_rho = std::clamp(rho * ratio, 1e-8, 1e8);
        u *= rho / new_rho;
        rho = new_rho;
        llt.compute(rp.P + rho * eye);
      }
    }
  }
  if (!converged)
    throw ConvergenceError("forceqp::solve did not converge", it, r_prim, r_dual);

  auto sol = detail::finish(stance, com, w, fz);
  sol.iterations = it;
  sol.primal_residual = r_prim;
  sol.dual_residual = r_dual;
  if (model == ConeModel::none) sol.cone_active.assign(stance.size(), false);
  return sol;
}

}  // namespace pendular::forceqp
