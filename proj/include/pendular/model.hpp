#pragma once

// Centroidal dynamics layer: contacts, stances, the net contact wrench, the
// pendular force, friction cones, ZMP and DCM.
//
// Everything here is a free function on value types templated on the scalar,
// so the same code runs on double in the solvers and on long double in tests.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "pendular/errors.hpp"

namespace pendular {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;

using Vec2 = Vector2<double>;
using Vec3 = Vector3<double>;

inline constexpr double kDefaultGravity = 9.81;
inline constexpr double kDefaultHeightMin = 0.05;
inline constexpr double kDefaultConeTol = 1e-9;

/// Point contact with a circular (second-order) friction cone.
template <typename Scalar>
struct Contact {
  Vector3<Scalar> position = Vector3<Scalar>::Zero();
  Scalar mu = Scalar(0.6);
  Vector3<Scalar> normal = Vector3<Scalar>::UnitZ();
};

template <typename Scalar>
struct Stance {
  std::vector<Contact<Scalar>> contacts;
  Scalar mass = Scalar(1);
  Scalar gravity = Scalar(kDefaultGravity);
  Scalar h_min = Scalar(kDefaultHeightMin);
  // Convex hull of the contacts in the contact plane, counter-clockwise,
  // in the coordinates returned by plane_coordinates().
  std::vector<Vector2<Scalar>> support_region;

  std::size_t size() const { return contacts.size(); }
};

template <typename Scalar>
struct CentroidalState {
  Vector3<Scalar> com = Vector3<Scalar>::Zero();
  Vector3<Scalar> com_vel = Vector3<Scalar>::Zero();
  Vector3<Scalar> com_acc = Vector3<Scalar>::Zero();
  Vector3<Scalar> pivot = Vector3<Scalar>::Zero();
  Vector3<Scalar> normal = Vector3<Scalar>::UnitZ();
  Scalar height = Scalar(0);  // n . (c - p)
};

template <typename Scalar>
struct NetWrench {
  Vector3<Scalar> force = Vector3<Scalar>::Zero();
  Vector3<Scalar> hdot = Vector3<Scalar>::Zero();
};

using ContactD = Contact<double>;
using StanceConfig = Stance<double>;
using CentroidalStateD = CentroidalState<double>;
using NetWrenchD = NetWrench<double>;

/// Orthonormal tangent pair (t1, t2) with t1 x t2 = n.
template <typename Scalar>
std::pair<Vector3<Scalar>, Vector3<Scalar>> tangent_basis(const Vector3<Scalar>& n) {
  const Vector3<Scalar> seed = std::abs(n.x()) < Scalar(0.9) ? Vector3<Scalar>::UnitX()
                                                             : Vector3<Scalar>::UnitY();
  Vector3<Scalar> t1 = (seed - seed.dot(n) * n).normalized();
  Vector3<Scalar> t2 = n.cross(t1);
  return {t1, t2};
}

/// Average contact normal; the plane of the support region.
template <typename Scalar>
Vector3<Scalar> stance_normal(const Stance<Scalar>& stance) {
  Vector3<Scalar> n = Vector3<Scalar>::Zero();
  for (const auto& c : stance.contacts) n += c.normal;
  if (n.norm() == Scalar(0)) return Vector3<Scalar>::UnitZ();
  return n.normalized();
}

/// 2D coordinates of a point in the contact plane. For a flat stance this is
/// just (x, y).
template <typename Scalar>
Vector2<Scalar> plane_coordinates(const Vector3<Scalar>& n, const Vector3<Scalar>& p) {
  if ((n - Vector3<Scalar>::UnitZ()).norm() < Scalar(1e-12)) return p.template head<2>();
  const auto [t1, t2] = tangent_basis(n);
  return {t1.dot(p), t2.dot(p)};
}

/// Counter-clockwise convex hull (Andrew's monotone chain). Collinear points
/// are dropped; fewer than three distinct points return a degenerate hull.
template <typename Scalar>
std::vector<Vector2<Scalar>> convex_hull(std::vector<Vector2<Scalar>> pts) {
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.x() < b.x() || (a.x() == b.x() && a.y() < b.y());
  });
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](const auto& a, const auto& b) { return (a - b).norm() == Scalar(0); }),
            pts.end());
  if (pts.size() < 3) return pts;
  auto cross = [](const Vector2<Scalar>& o, const Vector2<Scalar>& a, const Vector2<Scalar>& b) {
    return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
  };
  std::vector<Vector2<Scalar>> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], pts[i]) <= Scalar(0)) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i - 1]) <= Scalar(0)) --k;
    hull[k++] = pts[i - 1];
  }
  hull.resize(k - 1);
  return hull;
}

/// Builds a validated stance and fills in its support region.
template <typename Scalar>
Stance<Scalar> make_stance(std::vector<Contact<Scalar>> contacts, Scalar mass,
                           Scalar gravity = Scalar(kDefaultGravity),
                           Scalar h_min = Scalar(kDefaultHeightMin)) {
  if (contacts.empty()) throw DegenerateStanceError("stance needs at least one contact");
  if (!(mass > Scalar(0))) throw DegenerateStanceError("mass must be positive");
  for (const auto& c : contacts) {
    if (!(c.mu > Scalar(0))) throw DegenerateStanceError("friction coefficient must be positive");
    if (std::abs(c.normal.norm() - Scalar(1)) > Scalar(1e-12))
      throw DegenerateStanceError("contact normal must be unit length");
    if (!c.position.allFinite()) throw DegenerateStanceError("contact position must be finite");
  }
  Stance<Scalar> s;
  s.contacts = std::move(contacts);
  s.mass = mass;
  s.gravity = gravity;
  s.h_min = h_min;
  const Vector3<Scalar> n = stance_normal(s);
  std::vector<Vector2<Scalar>> pts;
  for (const auto& c : s.contacts) pts.push_back(plane_coordinates(n, c.position));
  s.support_region = convex_hull(std::move(pts));
  return s;
}

/// Rectangle of four flat contacts with half-spans (lx, ly) centred on the origin,
/// ordered FL, FR, RL, RR.
template <typename Scalar>
Stance<Scalar> rectangle_stance(Scalar lx, Scalar ly, Scalar mu, Scalar mass,
                                Scalar gravity = Scalar(kDefaultGravity)) {
  std::vector<Contact<Scalar>> c(4);
  c[0].position = {lx, ly, Scalar(0)};
  c[1].position = {lx, -ly, Scalar(0)};
  c[2].position = {-lx, ly, Scalar(0)};
  c[3].position = {-lx, -ly, Scalar(0)};
  for (auto& ci : c) ci.mu = mu;
  return make_stance(std::move(c), mass, gravity);
}

/// Diagonal trot pair FR + RL of the same rectangle.
template <typename Scalar>
Stance<Scalar> trot_stance(Scalar lx, Scalar ly, Scalar mu, Scalar mass,
                           Scalar gravity = Scalar(kDefaultGravity)) {
  std::vector<Contact<Scalar>> c(2);
  c[0].position = {lx, -ly, Scalar(0)};
  c[1].position = {-lx, ly, Scalar(0)};
  for (auto& ci : c) ci.mu = mu;
  return make_stance(std::move(c), mass, gravity);
}

template <typename Scalar>
Vector3<Scalar> gravity_vector(Scalar g) {
  return {Scalar(0), Scalar(0), -g};
}

template <typename Scalar>
Vector3<Scalar> centroid(const Stance<Scalar>& stance) {
  Vector3<Scalar> sum = Vector3<Scalar>::Zero();
  for (const auto& c : stance.contacts) sum += c.position;
  return sum / Scalar(stance.size());
}

/// Net force (contacts plus gravity) and rate of angular momentum about the CoM.
template <typename Scalar>
NetWrench<Scalar> net_wrench(const Stance<Scalar>& stance, const Vector3<Scalar>& com,
                             std::span<const Vector3<Scalar>> forces) {
  if (forces.size() != stance.size())
    throw DimensionError("net_wrench: expected " + std::to_string(stance.size()) +
                         " forces, got " + std::to_string(forces.size()));
  NetWrench<Scalar> w;
  for (std::size_t i = 0; i < forces.size(); ++i) {
    w.force += forces[i];
    w.hdot += (stance.contacts[i].position - com).cross(forces[i]);
  }
  w.force += stance.mass * gravity_vector(stance.gravity);
  return w;
}

template <typename Scalar>
NetWrench<Scalar> net_wrench(const Stance<Scalar>& stance, const Vector3<Scalar>& com,
                             const std::vector<Vector3<Scalar>>& forces) {
  return net_wrench(stance, com, std::span<const Vector3<Scalar>>(forces));
}

/// Only the angular part: sum_i (r_i - c) x f_i.
template <typename Scalar>
Vector3<Scalar> contact_moment(const Stance<Scalar>& stance, const Vector3<Scalar>& com,
                               std::span<const Vector3<Scalar>> forces) {
  return net_wrench(stance, com, forces).hdot;
}

/// State on the contact plane below the CoM along n, with h = n . (c - p).
template <typename Scalar>
CentroidalState<Scalar> make_state(const Vector3<Scalar>& com, const Vector3<Scalar>& pivot,
                                   const Vector3<Scalar>& com_vel = Vector3<Scalar>::Zero(),
                                   const Vector3<Scalar>& com_acc = Vector3<Scalar>::Zero(),
                                   const Vector3<Scalar>& normal = Vector3<Scalar>::UnitZ()) {
  CentroidalState<Scalar> s;
  s.com = com;
  s.com_vel = com_vel;
  s.com_acc = com_acc;
  s.pivot = pivot;
  s.normal = normal;
  s.height = normal.dot(com - pivot);
  return s;
}

/// (m g / h) (c - p): the unique net force through the pivot that also
/// supports gravity along n.
template <typename Scalar>
Vector3<Scalar> pendular_force(const CentroidalState<Scalar>& state, Scalar mass, Scalar gravity,
                               Scalar h_min = Scalar(kDefaultHeightMin)) {
  if (!(state.height >= h_min))
    throw DegenerateStanceError("pendular_force: height below h_min");
  return (mass * gravity / state.height) * (state.com - state.pivot);
}

template <typename Scalar>
bool friction_contains(const Contact<Scalar>& contact, const Vector3<Scalar>& f,
                       Scalar tol = Scalar(kDefaultConeTol)) {
  const Scalar fn = contact.normal.dot(f);
  const Scalar ft = (f - fn * contact.normal).norm();
  return fn >= -tol && ft <= contact.mu * fn + tol * std::max(Scalar(1), f.norm());
}

/// How far a force sits outside the cone (0 when inside).
template <typename Scalar>
Scalar friction_violation(const Contact<Scalar>& contact, const Vector3<Scalar>& f) {
  const Scalar fn = contact.normal.dot(f);
  const Scalar ft = (f - fn * contact.normal).norm();
  return std::max({Scalar(0), -fn, ft - contact.mu * fn});
}

template <typename Scalar>
Scalar cone_half_angle(Scalar mu) {
  if (!(mu > Scalar(0))) throw DegenerateStanceError("cone_half_angle: mu must be positive");
  return std::atan(mu) * Scalar(180) / std::numbers::pi_v<Scalar>;
}

template <typename Scalar>
Vector2<Scalar> zmp(const CentroidalState<Scalar>& state, Scalar gravity) {
  return state.com.template head<2>() - (state.height / gravity) * state.com_acc.template head<2>();
}

template <typename Scalar>
Scalar lipm_frequency(Scalar height, Scalar gravity) {
  return std::sqrt(gravity / height);
}

/// Divergent component of motion xi = c + cdot / omega.
template <typename Scalar>
Vector2<Scalar> dcm(const CentroidalState<Scalar>& state, Scalar gravity) {
  const Scalar omega = lipm_frequency(state.height, gravity);
  return state.com.template head<2>() + state.com_vel.template head<2>() / omega;
}

template <typename Scalar>
Vector2<Scalar> dcm_rate(const Vector2<Scalar>& xi, const Vector2<Scalar>& pivot_xy, Scalar omega) {
  return omega * (xi - pivot_xy);
}

/// Equal-split contact forces for a net contact force.
template <typename Scalar>
std::vector<Vector3<Scalar>> equal_split(const Stance<Scalar>& stance,
                                         const Vector3<Scalar>& contact_force) {
  return std::vector<Vector3<Scalar>>(stance.size(), contact_force / Scalar(stance.size()));
}

/// Contact force required by Newton's law for a CoM acceleration.
template <typename Scalar>
Vector3<Scalar> required_contact_force(const Stance<Scalar>& stance,
                                       const Vector3<Scalar>& com_acc) {
  return stance.mass * (com_acc - gravity_vector(stance.gravity));
}

/// Angular-momentum rate produced when the required contact force is split
/// equally among the contacts. This is the excitation the force QP has to cancel.
template <typename Scalar>
Vector3<Scalar> excitation_baseline(const Stance<Scalar>& stance, const Vector3<Scalar>& com,
                                    const Vector3<Scalar>& com_acc) {
  const auto forces = equal_split(stance, required_contact_force(stance, com_acc));
  return net_wrench(stance, com, forces).hdot;
}

/// Centre of pressure of the contact forces projected on the support plane.
/// Requires a positive total normal force.
template <typename Scalar>
Vector2<Scalar> center_of_pressure(const Stance<Scalar>& stance,
                                   std::span<const Vector3<Scalar>> forces) {
  if (forces.size() != stance.size()) throw DimensionError("center_of_pressure: size mismatch");
  const Vector3<Scalar> n = stance_normal(stance);
  Scalar total = 0;
  Vector2<Scalar> acc = Vector2<Scalar>::Zero();
  for (std::size_t i = 0; i < forces.size(); ++i) {
    const Scalar fn = n.dot(forces[i]);
    total += fn;
    acc += fn * plane_coordinates(n, stance.contacts[i].position);
  }
  if (!(total > Scalar(0))) throw DegenerateStanceError("center_of_pressure: no normal load");
  return acc / total;
}

/// Point-in-convex-polygon test (counter-clockwise vertices) with tolerance.
template <typename Scalar>
bool polygon_contains(std::span<const Vector2<Scalar>> poly, const Vector2<Scalar>& p,
                      Scalar tol = Scalar(1e-12)) {
  if (poly.size() < 3) return false;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    const Vector2<Scalar> e = b - a;
    const Scalar cross = e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x());
    if (cross < -tol * e.norm()) return false;
  }
  return true;
}

/// Euclidean projection onto a convex polygon.
template <typename Scalar>
Vector2<Scalar> polygon_project(std::span<const Vector2<Scalar>> poly, const Vector2<Scalar>& p) {
  if (poly.empty()) return p;
  if (poly.size() == 1) return poly[0];
  if (poly.size() >= 3 && polygon_contains(poly, p, Scalar(0))) return p;
  Vector2<Scalar> best = poly[0];
  Scalar best_d = std::numeric_limits<Scalar>::infinity();
  const std::size_t edges = poly.size() == 2 ? 1 : poly.size();
  for (std::size_t i = 0; i < edges; ++i) {
    const auto& a = poly[i];
    const auto& b = poly[(i + 1) % poly.size()];
    const Vector2<Scalar> e = b - a;
    const Scalar t = std::clamp((p - a).dot(e) / e.squaredNorm(), Scalar(0), Scalar(1));
    const Vector2<Scalar> q = a + t * e;
    const Scalar d = (p - q).squaredNorm();
    if (d < best_d) {
      best_d = d;
      best = q;
    }
  }
  return best;
}

}  // namespace pendular
