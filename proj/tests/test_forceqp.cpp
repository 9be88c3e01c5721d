#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "pendular/forceqp.hpp"

namespace pendular::forceqp {
namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

StanceConfig go1_rectangle(double mu = 0.6) { return rectangle_stance(0.188, 0.127, mu, 12.0); }

Eigen::Matrix3d skew(const Vec3& v) {
  Eigen::Matrix3d s;
  s << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return s;
}

// Equality-constrained least squares through the full KKT system, cones ignored.
std::vector<Vec3> kkt_oracle(const StanceConfig& s, const Vec3& com, const Vec3& f_net,
                             const QpWeights& w) {
  const int n = static_cast<int>(s.size());
  MatrixXd A(3, 3 * n), E(3, 3 * n);
  for (int i = 0; i < n; ++i) {
    A.block<3, 3>(0, 3 * i) = skew(s.contacts[i].position - com);
    E.block<3, 3>(0, 3 * i).setIdentity();
  }
  MatrixXd K = MatrixXd::Zero(3 * n + 3, 3 * n + 3);
  K.topLeftCorner(3 * n, 3 * n) =
      2 * (w.alpha + w.lambda) * A.transpose() * A + 2 * w.gamma * MatrixXd::Identity(3 * n, 3 * n);
  K.topRightCorner(3 * n, 3) = E.transpose();
  K.bottomLeftCorner(3, 3 * n) = E;
  VectorXd rhs = VectorXd::Zero(3 * n + 3);
  rhs.head(3 * n) = 2 * w.lambda * A.transpose() * w.hdot_task;
  rhs.tail(3) = f_net;
  const VectorXd sol = K.fullPivLu().solve(rhs);
  std::vector<Vec3> f(n);
  for (int i = 0; i < n; ++i) f[i] = sol.segment<3>(3 * i);
  return f;
}

double max_force_error(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
  double e = 0;
  for (std::size_t i = 0; i < a.size(); ++i) e = std::max(e, (a[i] - b[i]).norm());
  return e;
}

TEST(ForceQp, NullspaceIsOrthonormalAndSumFree) {
  for (std::size_t n : {2u, 3u, 4u}) {
    const MatrixXd N = sum_constraint_nullspace(n);
    ASSERT_EQ(N.rows(), static_cast<long>(3 * n));
    ASSERT_EQ(N.cols(), static_cast<long>(3 * (n - 1)));
    EXPECT_LT((N.transpose() * N - MatrixXd::Identity(N.cols(), N.cols())).norm(), 1e-12);
    MatrixXd sum = MatrixXd::Zero(3, N.cols());
    for (std::size_t i = 0; i < n; ++i) sum += N.middleRows(3 * i, 3);
    EXPECT_LT(sum.norm(), 1e-12);
  }
}

TEST(ForceQp, MomentMapMatchesNetWrench) {
  const auto s = go1_rectangle();
  const Vec3 com(0.01, 0.02, 0.28);
  std::vector<Vec3> f{{1, 2, 30}, {-1, 0.5, 25}, {0.3, -2, 40}, {0, 0, 20}};
  VectorXd x(12);
  for (int i = 0; i < 4; ++i) x.segment<3>(3 * i) = f[i];
  EXPECT_LT((moment_map(s, com) * x - net_wrench(s, com, f).hdot).norm(), 1e-12);
}

TEST(ForceQp, UnconstrainedMatchesKktOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto s = go1_rectangle();
  for (int trial = 0; trial < 20; ++trial) {
    QpWeights w;
    w.alpha = std::pow(10.0, 3 * (u(rng) + 1));
    w.lambda = trial % 2 ? std::pow(10.0, 2 * u(rng)) : 0.0;
    w.gamma = std::pow(10.0, u(rng));
    w.hdot_task = Vec3(u(rng), u(rng), u(rng));
    const Vec3 com(0.05 * u(rng), 0.05 * u(rng), 0.27 + 0.03 * u(rng));
    const Vec3 f_net(12 * u(rng), 12 * u(rng), 12 * 9.81 * (1 + 0.2 * u(rng)));
    const auto oracle = kkt_oracle(s, com, f_net, w);
    const auto closed = solve_unconstrained(s, com, f_net, w);
    EXPECT_LT(max_force_error(closed.forces, oracle), 1e-8 * f_net.norm()) << "trial " << trial;
  }
}

TEST(ForceQp, AdmmMatchesOracleWhenConesInactive) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto s = go1_rectangle(1.5);
  int checked = 0;
  for (int trial = 0; trial < 20; ++trial) {
    QpWeights w;
    w.alpha = std::pow(10.0, 1.5 * (u(rng) + 1));
    w.gamma = 1.0;
    const Vec3 com(0.03 * u(rng), 0.03 * u(rng), 0.27);
    const Vec3 f_net(6 * u(rng), 6 * u(rng), 12 * 9.81);
    const auto oracle = kkt_oracle(s, com, f_net, w);
    bool inactive = true;
    for (std::size_t i = 0; i < 4; ++i)
      inactive = inactive && oracle[i].head<2>().norm() < 0.9 * s.contacts[i].mu * oracle[i].z();
    if (!inactive) continue;
    ++checked;
    const auto sol = solve(s, com, f_net, w);
    EXPECT_LT(max_force_error(sol.forces, oracle), 1e-8 * f_net.norm()) << "trial " << trial;
  }
  EXPECT_GE(checked, 10);
}

TEST(ForceQp, SolutionIsFeasible) {
  const auto s = go1_rectangle(0.4);
  const Vec3 com(0.0, 0.0, 0.27);
  QpWeights w;
  w.alpha = 1e4;
  const Vec3 f_net(30, -10, 12 * 9.81);
  const auto sol = solve(s, com, f_net, w);
  Vec3 sum = Vec3::Zero();
  for (std::size_t i = 0; i < 4; ++i) {
    sum += sol.forces[i];
    EXPECT_LT(friction_violation(s.contacts[i], sol.forces[i]), 1e-7);
  }
  EXPECT_LT((sum - f_net).norm(), 1e-8 * f_net.norm());
  EXPECT_NEAR(sol.objective, objective_value(s, com, sol.forces, w), 1e-9 * std::abs(sol.objective));
}

TEST(ForceQp, ArgminIsScaleInvariant) {
  const auto s = go1_rectangle();
  const Vec3 com(0.01, -0.02, 0.27), f_net(20, -5, 12 * 9.81);
  QpWeights w;
  w.alpha = 30;
  w.lambda = 2;
  w.hdot_task = Vec3(0.1, 0.2, -0.1);
  const auto a = solve(s, com, f_net, w);
  for (double k : {1e-3, 7.0, 1e3}) {
    QpWeights ws = w;
    ws.alpha *= k;
    ws.lambda *= k;
    ws.gamma *= k;
    const auto b = solve(s, com, f_net, ws);
    EXPECT_LT(max_force_error(a.forces, b.forces), 1e-6 * f_net.norm()) << "scale " << k;
    EXPECT_NEAR(b.objective, k * a.objective, 1e-6 * k * a.objective);
  }
}

TEST(ForceQp, ResidualShrinksWithAlpha) {
  const auto s = go1_rectangle();
  const Vec3 com(0.0, 0.0, 0.27), f_net(25, 15, 12 * 9.81);
  double prev = std::numeric_limits<double>::infinity();
  for (double alpha : {0.0, 1.0, 10.0, 100.0, 1e3, 1e4, 1e5}) {
    QpWeights w;
    w.alpha = alpha;
    const double h = solve(s, com, f_net, w).hdot.norm();
    EXPECT_LE(h, prev + 1e-9) << "alpha " << alpha;
    prev = h;
  }
}

TEST(ForceQp, FrictionTestIsScaleInvariant) {
  ContactD c;
  c.mu = 0.6;
  for (const Vec3& f : {Vec3(0.5, 0.2, 1.0), Vec3(0.7, 0.0, 1.0), Vec3(0.1, 0.1, -1.0)})
    for (double k : {1e-3, 1.0, 1e4}) EXPECT_EQ(friction_contains(c, Vec3(k * f)), friction_contains(c, f));
}

TEST(ForceQp, SocProjectionIsMoreau) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> nd;
  ContactD c;
  c.mu = 0.7;
  for (int k = 0; k < 200; ++k) {
    const Vec3 v(nd(rng), nd(rng), nd(rng));
    const Vec3 p = project_soc(c, v);
    EXPECT_TRUE(friction_contains(c, p, 1e-12));
    EXPECT_NEAR((v - p).dot(p), 0.0, 1e-12);
    // v - p lies in the polar cone: non-positive inner product with cone members.
    for (int j = 0; j < 5; ++j) {
      const double fz = std::abs(nd(rng));
      const double th = nd(rng);
      const Vec3 q(c.mu * fz * std::cos(th), c.mu * fz * std::sin(th), fz);
      EXPECT_LE((v - p).dot(q), 1e-12);
    }
  }
  const Vec3 inside(0.1, 0.2, 1.0);
  EXPECT_LT((project_soc(c, inside) - inside).norm(), 1e-15);
  EXPECT_LT(project_soc(c, Vec3(0, 0, -1)).norm(), 1e-15);
}

TEST(ForceQp, PyramidIsInscribed) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> nd;
  ContactD c;
  c.mu = 0.6;
  EXPECT_EQ(pyramid_facets(c).size(), 8u);
  for (int k = 0; k < 500; ++k) {
    const Vec3 v(nd(rng), nd(rng), std::abs(nd(rng)));
    if (pyramid_contains(c, v)) {
      EXPECT_TRUE(friction_contains(c, v));
    }
    const Vec3 p = project_pyramid(c, v);
    EXPECT_TRUE(pyramid_contains(c, p, 1e-9));
    EXPECT_GE((v - p).norm(), (v - project_soc(c, v)).norm() - 1e-12);
  }
}

TEST(ForceQp, SocAndPyramidAgreeWhenInactive) {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1, 1);
  const auto s = go1_rectangle();
  SolverOptions soc, pyr;
  pyr.cone_model = ConeModel::pyramid8;
  for (int trial = 0; trial < 10; ++trial) {
    QpWeights w;
    w.alpha = std::pow(10.0, 2 * (u(rng) + 1));
    const Vec3 com(0.02 * u(rng), 0.02 * u(rng), 0.27);
    const Vec3 f_net(3 * u(rng), 3 * u(rng), 12 * 9.81);
    const auto a = solve(s, com, f_net, w, soc);
    const auto b = solve(s, com, f_net, w, pyr);
    EXPECT_LE(std::abs(a.objective - b.objective), 1e-4 * std::max(1.0, a.objective));
  }
}

TEST(ForceQp, PyramidNeverBeatsSoc) {
  const auto s = go1_rectangle(0.3);
  const Vec3 com(0.0, 0.0, 0.27);
  QpWeights w;
  w.alpha = 100;
  SolverOptions pyr;
  pyr.cone_model = ConeModel::pyramid8;
  const Vec3 f_net(25, 10, 12 * 9.81);
  const auto a = solve(s, com, f_net, w);
  const auto b = solve(s, com, f_net, w, pyr);
  EXPECT_GE(b.objective, a.objective - 1e-6 * a.objective);
}

TEST(ForceQp, InfeasibleForceHasCertificate) {
  const auto s = go1_rectangle();
  const Vec3 f_net(200, 0, 12 * 9.81);
  QpWeights w;
  w.alpha = 1;
  try {
    solve(s, Vec3(0, 0, 0.27), f_net, w);
    FAIL() << "expected InfeasibleError";
  } catch (const InfeasibleError& e) {
    const Vec3 d = e.certificate();
    EXPECT_GT(e.gap(), 0.0);
    EXPECT_GT(d.dot(f_net), 0.0);
    // d separates: every cone member has d . f <= 0.
    for (int k = 0; k < 64; ++k) {
      const double th = 2 * M_PI * k / 64;
      EXPECT_LE(d.dot(Vec3(0.6 * std::cos(th), 0.6 * std::sin(th), 1.0)), 1e-9);
    }
  }
  const auto rep = reachability(s, Vec3(0, 0, 10));
  EXPECT_LE(rep.gap, 1e-9);
}

TEST(ForceQp, WeightValidation) {
  QpWeights w;
  w.alpha = -1;
  EXPECT_THROW(w.validate(), std::invalid_argument);
  w.alpha = 1;
  w.gamma = 0;
  EXPECT_THROW(w.validate(), std::invalid_argument);
  w.gamma = 1;
  w.hdot_task.x() = std::nan("");
  EXPECT_THROW(w.validate(), std::invalid_argument);
  EXPECT_EQ(cone_model_from_string(to_string(ConeModel::pyramid8)), ConeModel::pyramid8);
  EXPECT_THROW(cone_model_from_string("cube"), std::invalid_argument);
}

}  // namespace
}  // namespace pendular::forceqp
