#include "pendular/lbfgs.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

namespace pendular::optim {

namespace {

constexpr double kC1 = 1e-4;
constexpr double kC2 = 0.9;

struct Trial {
  double step = 0.0;
  double f = 0.0;
  double slope = 0.0;
};

// Safeguarded cubic interpolation of the minimiser between two trials.
double interpolate(const Trial& lo, const Trial& hi) {
  const double d1 = lo.slope + hi.slope - 3.0 * (lo.f - hi.f) / (lo.step - hi.step);
  const double disc = d1 * d1 - lo.slope * hi.slope;
  const double a = std::min(lo.step, hi.step);
  const double b = std::max(lo.step, hi.step);
  if (disc >= 0.0) {
    const double d2 = std::copysign(std::sqrt(disc), hi.step - lo.step);
    const double t =
        hi.step - (hi.step - lo.step) * (hi.slope + d2 - d1) / (hi.slope - lo.slope + 2.0 * d2);
    if (std::isfinite(t) && t > a + 0.1 * (b - a) && t < b - 0.1 * (b - a)) return t;
  }
  return 0.5 * (a + b);
}

}  // namespace

LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0,
                           const LbfgsOptions& opts) {
  LbfgsResult res;
  const Eigen::Index n = x0.size();
  Eigen::VectorXd g(n), g_new(n), x_new(n), d(n);
  double f = objective(x0, g);
  res.evaluations = 1;
  std::deque<Eigen::VectorXd> s_hist, y_hist;
  std::deque<double> rho_hist;

  auto converged = [&](double fv, const Eigen::VectorXd& gv) {
    return gv.lpNorm<Eigen::Infinity>() <= opts.grad_tol * std::max(1.0, std::abs(fv));
  };

  Eigen::VectorXd x = std::move(x0);
  int it = 0;
  for (; it < opts.max_iter; ++it) {
    if (converged(f, g)) {
      res.converged = true;
      res.message = "gradient tolerance reached";
      break;
    }
    // Two-loop recursion.
    d = -g;
    std::vector<double> alpha_hist(s_hist.size());
    for (std::size_t j = s_hist.size(); j-- > 0;) {
      alpha_hist[j] = rho_hist[j] * s_hist[j].dot(d);
      d -= alpha_hist[j] * y_hist[j];
    }
    if (!s_hist.empty()) d *= s_hist.back().dot(y_hist.back()) / y_hist.back().squaredNorm();
    for (std::size_t j = 0; j < s_hist.size(); ++j) {
      const double beta = rho_hist[j] * y_hist[j].dot(d);
      d += (alpha_hist[j] - beta) * s_hist[j];
    }
    double slope0 = g.dot(d);
    if (!(slope0 < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      d = -g;
      slope0 = g.dot(d);
    }

    // Strong-Wolfe line search (bracketing + zoom).
    const Trial start{0.0, f, slope0};
    Trial prev = start;
    double step = s_hist.empty() ? std::min(1.0, 1.0 / std::max(1e-300, g.lpNorm<Eigen::Infinity>())) : 1.0;
    bool found = false;
    Trial accepted;
    for (int ls = 0; ls < 60 && !found; ++ls) {
      x_new = x + step * d;
      const double fn = objective(x_new, g_new);
      ++res.evaluations;
      const Trial cur{step, fn, g_new.dot(d)};
      auto zoom = [&](Trial lo, Trial hi) {
        for (int z = 0; z < 60; ++z) {
          const double t = interpolate(lo, hi);
          x_new = x + t * d;
          const double fz = objective(x_new, g_new);
          ++res.evaluations;
          const Trial tz{t, fz, g_new.dot(d)};
          if (fz > f + kC1 * t * slope0 || fz >= lo.f) {
            hi = tz;
          } else {
            if (std::abs(tz.slope) <= -kC2 * slope0) {
              accepted = tz;
              return true;
            }
            if (tz.slope * (hi.step - lo.step) >= 0.0) hi = lo;
            lo = tz;
          }
          if (std::abs(hi.step - lo.step) < 1e-16 * std::max(1.0, lo.step)) break;
        }
        // Accept the best sufficient-decrease point found so far.
        if (lo.step > 0.0) {
          x_new = x + lo.step * d;
          objective(x_new, g_new);
          ++res.evaluations;
          accepted = lo;
          return true;
        }
        return false;
      };
      if (!std::isfinite(fn) || fn > f + kC1 * step * slope0 || (ls > 0 && fn >= prev.f)) {
        found = zoom(prev, cur);
        break;
      }
      if (std::abs(cur.slope) <= -kC2 * slope0) {
        accepted = cur;
        found = true;
        break;
      }
      if (cur.slope >= 0.0) {
        found = zoom(cur, prev);
        break;
      }
      prev = cur;
      step *= 2.0;
    }
    if (!found) {
      res.message = "line search failed";
      break;
    }

    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    const double f_old = f;
    const double step_norm = s.lpNorm<Eigen::Infinity>();
    x = x_new;
    g = g_new;
    f = accepted.f;
    if (sy > 1e-12 * s.norm() * y.norm()) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opts.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    if (std::abs(f_old - f) <= 1e-15 * std::max(1.0, std::abs(f)) &&
        step_norm <= 1e-15 * std::max(1.0, x.lpNorm<Eigen::Infinity>())) {
      res.message = "no progress";
      break;
    }
  }
  if (it >= opts.max_iter) res.message = "iteration limit";
  res.x = std::move(x);
  res.f = f;
  res.grad_norm = g.lpNorm<Eigen::Infinity>();
  res.iterations = it;
  if (!res.converged) res.converged = converged(f, g);
  return res;
}

}  // namespace pendular::optim
