// Primal active-set solver for the force QP with 8-facet pyramid cones.
// Used only as an independent cross-check of the SOC splitting solver.

#include <algorithm>
#include <cmath>

#include "pendular/forceqp.hpp"

namespace pendular::forceqp::detail {

namespace {

struct Polyhedron {
  Eigen::MatrixXd G;
  Eigen::VectorXd h;
};

Polyhedron pyramid_constraints(const StanceConfig& stance, const ReducedProblem& rp) {
  const std::size_t n = stance.size();
  Polyhedron poly;
  poly.G.resize(8 * static_cast<Eigen::Index>(n), rp.basis.cols());
  poly.h.resize(8 * static_cast<Eigen::Index>(n));
  Eigen::Index row = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto facets = pyramid_facets(stance.contacts[i]);
    const auto block = rp.basis.middleRows(3 * i, 3);
    const Vec3 f0 = rp.f0.segment<3>(3 * i);
    for (const auto& a : facets) {
      poly.G.row(row) = a.transpose() * block;
      poly.h(row) = -a.dot(f0);
      ++row;
    }
  }
  return poly;
}

// Alternating projections between the force-sum affine set and the product of
// pyramids. Returns stacked forces in both sets up to round-off.
Eigen::VectorXd feasible_start(const StanceConfig& stance, const Vec3& f_net) {
  const std::size_t n = stance.size();
  std::vector<Vec3> f(n, f_net / double(n));
  for (int it = 0; it < 100000; ++it) {
    for (std::size_t i = 0; i < n; ++i) f[i] = project_pyramid(stance.contacts[i], f[i]);
    Vec3 err = -f_net;
    for (const auto& fi : f) err += fi;
    if (err.norm() <= 1e-11 * std::max(1.0, f_net.norm())) break;
    for (auto& fi : f) fi -= err / double(n);
  }
  Eigen::VectorXd out(3 * n);
  for (std::size_t i = 0; i < n; ++i) out.segment<3>(3 * i) = f[i];
  return out;
}

}  // namespace

ForceSolution solve_pyramid(const StanceConfig& stance, const Vec3& com, const Vec3& f_net,
                            const QpWeights& w, const SolverOptions& opts) {
  const auto rp = reduce(stance, com, f_net, w);
  const Eigen::Index n = rp.basis.cols();
  if (n == 0) return finish(stance, com, w, rp.f0);

  const auto poly = pyramid_constraints(stance, rp);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  if (((poly.G * z - poly.h).array() > 1e-12).any())
    z = rp.basis.transpose() * (feasible_start(stance, f_net) - rp.f0);

  std::vector<Eigen::Index> working;
  const double scale = std::max(1.0, rp.q.lpNorm<Eigen::Infinity>());
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    const Eigen::VectorXd g = rp.P * z + rp.q;
    const Eigen::Index k = static_cast<Eigen::Index>(working.size());
    Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(n + k, n + k);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n + k);
    kkt.topLeftCorner(n, n) = rp.P;
    for (Eigen::Index j = 0; j < k; ++j) {
      kkt.block(n + j, 0, 1, n) = poly.G.row(working[j]);
      kkt.block(0, n + j, n, 1) = poly.G.row(working[j]).transpose();
    }
    rhs.head(n) = -g;
    const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);
    const Eigen::VectorXd p = sol.head(n);

    if (p.lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + z.lpNorm<Eigen::Infinity>())) {
      if (k == 0) break;
      const Eigen::VectorXd mult = sol.tail(k);
      Eigen::Index worst = 0;
      const double most_negative = mult.minCoeff(&worst);
      if (most_negative >= -1e-11 * scale) break;
      working.erase(working.begin() + worst);
      continue;
    }

    double step = 1.0;
    Eigen::Index blocking = -1;
    for (Eigen::Index i = 0; i < poly.G.rows(); ++i) {
      if (std::find(working.begin(), working.end(), i) != working.end()) continue;
      const double gp = poly.G.row(i).dot(p);
      if (gp <= 1e-14 * p.norm()) continue;
      const double slack = std::max(0.0, poly.h(i) - poly.G.row(i).dot(z));
      const double t = slack / gp;
      if (t < step) {
        step = t;
        blocking = i;
      }
    }
    z += step * p;
    if (blocking >= 0) working.push_back(blocking);
  }
  if (it >= opts.max_iter)
    throw ConvergenceError("pyramid active-set did not converge", it, 0.0, 0.0);

  auto out = finish(stance, com, w, rp.f0 + rp.basis * z);
  out.iterations = it;
  out.primal_residual = std::max(0.0, (poly.G * z - poly.h).maxCoeff());
  for (std::size_t i = 0; i < stance.size(); ++i) {
    bool active = false;
    for (auto j : working) active = active || (j / 8 == static_cast<Eigen::Index>(i));
    out.cone_active[i] = active;
  }
  return out;
}

}  // namespace pendular::forceqp::detail
