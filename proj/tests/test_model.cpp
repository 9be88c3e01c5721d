#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "pendular/model.hpp"

namespace pendular {
namespace {

StanceConfig go1_rectangle() { return rectangle_stance(0.188, 0.127, 0.6, 12.0); }

TEST(Model, StaticEqualSplitHasNoMoment) {
  const auto s = go1_rectangle();
  const Vec3 com(0, 0, 0.27);
  const auto forces = equal_split(s, required_contact_force(s, Vec3::Zero().eval()));
  const auto w = net_wrench(s, com, forces);
  EXPECT_LT(w.force.norm(), 1e-12);
  EXPECT_LT(w.hdot.norm(), 1e-12);
}

TEST(Model, NetWrenchMatchesHandSum) {
  const auto s = go1_rectangle();
  const Vec3 com(0.02, -0.01, 0.3);
  std::vector<Vec3> f{{1, 2, 30}, {-1, 0.5, 25}, {0.3, -2, 40}, {0, 0, 20}};
  Vec3 hdot = Vec3::Zero(), force = Vec3::Zero();
  for (int i = 0; i < 4; ++i) {
    const Vec3 r = s.contacts[i].position - com;
    hdot += Vec3(r.y() * f[i].z() - r.z() * f[i].y(), r.z() * f[i].x() - r.x() * f[i].z(),
                 r.x() * f[i].y() - r.y() * f[i].x());
    force += f[i];
  }
  force.z() -= 12.0 * 9.81;
  const auto w = net_wrench(s, com, f);
  EXPECT_LT((w.hdot - hdot).norm(), 1e-12);
  EXPECT_LT((w.force - force).norm(), 1e-12);
}

TEST(Model, NetWrenchRejectsWrongCount) {
  const auto s = go1_rectangle();
  std::vector<Vec3> f(3, Vec3::UnitZ());
  EXPECT_THROW(net_wrench(s, Vec3(0, 0, 0.3), f), DimensionError);
}

TEST(Model, PendularForceThroughPivotHasNoMoment) {
  const Vec3 c(0.03, -0.02, 0.3), p(-0.01, 0.04, 0.0);
  const auto st = make_state(c, p);
  const Vec3 f = pendular_force(st, 12.0, 9.81);
  EXPECT_LT((p - c).cross(f).norm(), 1e-12);
  EXPECT_NEAR(f.z(), 12.0 * 9.81, 1e-12);
}

TEST(Model, ZmpEqualsPivotOnPendularManifold) {
  const double m = 15.0, g = 9.81;
  const Vec3 c(0.05, 0.02, 0.3), p(0.01, -0.03, 0.0);
  auto st = make_state(c, p);
  st.com_acc = pendular_force(st, m, g) / m + gravity_vector(g);
  EXPECT_LT((zmp(st, g) - p.head<2>()).norm(), 1e-12);
}

TEST(Model, DcmFollowsOrbitalEquation) {
  // LIPM solution c(t) = p + A e^{wt} + B e^{-wt} along x.
  const double g = 9.81, h = 0.3, w = std::sqrt(g / h), A = 0.01, B = -0.02, px = 0.05;
  auto state_at = [&](double t) {
    const Vec3 c(px + A * std::exp(w * t) + B * std::exp(-w * t), 0, h);
    const Vec3 v(w * (A * std::exp(w * t) - B * std::exp(-w * t)), 0, 0);
    return make_state(c, Vec3(px, 0, 0), v);
  };
  const double t = 0.4, dt = 1e-6;
  const Vec2 xi = dcm(state_at(t), g);
  const Vec2 xi_dot = (dcm(state_at(t + dt), g) - dcm(state_at(t - dt), g)) / (2 * dt);
  const Vec2 pred = dcm_rate(xi, Vec2(px, 0), lipm_frequency(h, g));
  EXPECT_NEAR(xi_dot.x(), pred.x(), 1e-6);
  EXPECT_NEAR(xi.x(), px + 2 * A * std::exp(w * t), 1e-12);
}

TEST(Model, PendularForceRejectsLowHeight) {
  const auto st = make_state(Vec3(0, 0, 0.01), Vec3::Zero().eval());
  EXPECT_THROW(pendular_force(st, 1.0, 9.81), DegenerateStanceError);
}

TEST(Model, FrictionCone) {
  ContactD c;
  c.mu = 0.6;
  EXPECT_TRUE(friction_contains(c, Vec3(0.59, 0, 1)));
  EXPECT_FALSE(friction_contains(c, Vec3(0.61, 0, 1)));
  EXPECT_FALSE(friction_contains(c, Vec3(0, 0, -1)));
  EXPECT_DOUBLE_EQ(friction_violation(c, Vec3(0.7, 0, 1)), 0.7 - 0.6);
  EXPECT_DOUBLE_EQ(friction_violation(c, Vec3(0.3, 0.4, 1)), 0.0);
  EXPECT_NEAR(cone_half_angle(0.6), 30.963756532073525, 1e-12);
  EXPECT_THROW(cone_half_angle(0.0), DegenerateStanceError);
}

TEST(Model, StanceValidation) {
  EXPECT_THROW(make_stance<double>({}, 1.0), DegenerateStanceError);
  std::vector<ContactD> c(2);
  c[1].position = Vec3(0.1, 0, 0);
  EXPECT_THROW(make_stance(c, 0.0), DegenerateStanceError);
  c[0].normal = Vec3(0, 0, 2);
  EXPECT_THROW(make_stance(c, 1.0), DegenerateStanceError);
  c[0].normal = Vec3::UnitZ();
  c[0].mu = -0.1;
  EXPECT_THROW(make_stance(c, 1.0), DegenerateStanceError);
}

TEST(Model, SupportRegionOfRectangle) {
  const auto s = go1_rectangle();
  ASSERT_EQ(s.support_region.size(), 4u);
  const std::span<const Vec2> poly(s.support_region);
  EXPECT_TRUE(polygon_contains(poly, Vec2(0.18, 0.12)));
  EXPECT_FALSE(polygon_contains(poly, Vec2(0.19, 0.0)));
  EXPECT_LT((polygon_project(poly, Vec2(0.3, 0.0)) - Vec2(0.188, 0.0)).norm(), 1e-12);
  EXPECT_LT((polygon_project(poly, Vec2(0.3, 0.3)) - Vec2(0.188, 0.127)).norm(), 1e-12);
}

TEST(Model, ConvexHullDropsInteriorAndCollinear) {
  std::vector<Vec2> pts{{0, 0}, {1, 0}, {0.5, 0}, {1, 1}, {0, 1}, {0.5, 0.5}};
  const auto hull = convex_hull(pts);
  EXPECT_EQ(hull.size(), 4u);
}

TEST(Model, CenterOfPressure) {
  const auto s = go1_rectangle();
  std::vector<Vec3> f{{0, 0, 30}, {0, 0, 10}, {0, 0, 10}, {0, 0, 10}};
  const Vec2 cop = center_of_pressure(s, std::span<const Vec3>(f));
  EXPECT_NEAR(cop.x(), 0.188 * (40 - 20) / 60.0, 1e-12);
  EXPECT_NEAR(cop.y(), 0.127 * (40 - 20) / 60.0, 1e-12);
  std::vector<Vec3> none(4, Vec3::Zero());
  EXPECT_THROW(center_of_pressure(s, std::span<const Vec3>(none)), DegenerateStanceError);
}

TEST(Model, TrotStanceIsDiagonal) {
  const auto s = trot_stance(0.188, 0.127, 0.6, 12.0);
  ASSERT_EQ(s.size(), 2u);
  EXPECT_LT((s.contacts[0].position + s.contacts[1].position).norm(), 1e-15);
}

TEST(Model, LongDoubleInstantiation) {
  const auto s = rectangle_stance<long double>(0.188L, 0.127L, 0.6L, 12.0L);
  const Vector3<long double> com(0, 0, 0.27L);
  const auto f = equal_split(s, required_contact_force(s, Vector3<long double>(1, 0, 0)));
  const auto w = net_wrench(s, com, f);
  EXPECT_NEAR(static_cast<double>(w.hdot.y()), 12.0 * 1.0 * -0.27, 1e-15);
  const auto base = excitation_baseline(s, com, Vector3<long double>(1, 0, 0));
  EXPECT_LT(static_cast<double>((base - w.hdot).norm()), 1e-18);
}

}  // namespace
}  // namespace pendular
