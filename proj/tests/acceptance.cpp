// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [config_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "pendular/analysis.hpp"
#include "pendular/config.hpp"
#include "pendular/forceqp.hpp"
#include "pendular/harness.hpp"
#include "pendular/ocp.hpp"

namespace {

using namespace pendular;

// Criterion 1
constexpr double kFloorRelTol = 5e-4;
constexpr double kTestCSeconds = 60;
// Criterion 2
constexpr double kTestBSlopeLo = -1.1, kTestBSlopeHi = -0.9;
constexpr double kKeLo = 7.0, kKeHi = 10.0;
constexpr double kTestBSeconds = 300;
// Criterion 3
constexpr double kSigmaTol = 1e-10;
constexpr double kReferenceSigmas[3] = {0.4537, 0.3762, 0.2536};
constexpr double kReferenceSigmaTol = 5e-3;  // two decimals
// Criterion 4
constexpr double kTestASlopeLo = -1.15, kTestASlopeHi = -0.85;
constexpr double kTestAReduction = 100.0;
constexpr double kTestAR2 = 0.9;
constexpr double kTestASeconds = 900;
// Criterion 5
constexpr double kAStarLo = 3.6, kAStarHi = 3.8;
constexpr double kFloorGapBelow = 1e-4;
constexpr double kStrictMargin = 1e-6;  // above solver noise
// Criterion 6
constexpr int kPrefactorInstances = 20;
constexpr double kPrefactorTol = 1e-6;
// Criterion 7
constexpr double kTestESlopeLo = -1.5, kTestESlopeHi = -0.5;
// Criterion 8
constexpr double kGradientTol = 1e-5;
constexpr double kOracleTol = 1e-8;
constexpr double kConeGapTol = 1e-4;
constexpr double kFloorSlack = 1e-9;
constexpr std::size_t kCertificateSamples = 10000;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [fail: " << what << "]";
    }
  }
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double fitted(const harness::SweepResult& r, const std::string& key) {
  const auto it = r.fitted.find(key);
  return it == r.fitted.end() ? std::nan("") : it->second;
}

bool in(double v, double lo, double hi) { return v >= lo && v <= hi; }

void criterion_1(const config::RunConfig& go1, Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = harness::run_test_c(go1);
  const double secs = seconds_since(t0);
  const double err = fitted(r, "relative_error");
  o.detail << "QP " << fitted(r, "qp_at_alpha_max") << " vs floor " << fitted(r, "floor")
           << ", rel err " << err << ", " << secs << " s";
  o.check(r.failures() == 0, "solver failures");
  o.check(err <= kFloorRelTol, "relative error");
  o.check(secs < kTestCSeconds, "runtime");
}

void criterion_2(const config::RunConfig& go1, Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = harness::run_test_b(go1);
  const double secs = seconds_since(t0);
  const double slope = fitted(r, "slope"), ke = fitted(r, "K_e");
  o.detail << "slope " << slope << ", K_e " << ke << " (K_a " << fitted(r, "K_a") << "), " << secs
           << " s";
  o.check(r.failures() == 0, "solver failures");
  o.check(in(slope, kTestBSlopeLo, kTestBSlopeHi), "slope");
  o.check(in(ke, kKeLo, kKeHi), "K_e");
  o.check(secs < kTestBSeconds, "runtime");
}

void criterion_3(const config::RunConfig& go1, Outcome& o) {
  const auto stance = go1.stance();
  const auto jac = analysis::moment_jacobian(stance, go1.nominal_com());
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(jac.matrix);
  const Vec3 closed = analysis::rect_stance_sigmas(go1.robot.lx, go1.robot.ly);
  double worst = 0, worst_ref = 0;
  for (int k = 0; k < 3; ++k) {
    worst = std::max(worst, std::abs(svd.singularValues()(k) - closed(k)));
    worst_ref = std::max(worst_ref, std::abs(closed(k) - kReferenceSigmas[k]));
  }
  o.detail << "sigma (" << closed(0) << ", " << closed(1) << ", " << closed(2) << "), svd err "
           << worst << ", vs reference " << worst_ref;
  o.check(worst <= kSigmaTol, "svd identity");
  o.check(worst_ref <= kReferenceSigmaTol, "reference values");
}

void criterion_4(const config::RunConfig& pm, Outcome& o) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = harness::run_test_a(pm);
  const double secs = seconds_since(t0);
  const double slope = fitted(r, "slope"), red = fitted(r, "reduction"),
               r2 = fitted(r, "lipm_r2_at_100");
  o.detail << "slope " << slope << ", reduction " << red << "x, R2(100) " << r2 << ", " << secs
           << " s";
  o.check(r.failures() == 0, "solver failures");
  o.check(in(slope, kTestASlopeLo, kTestASlopeHi), "slope");
  o.check(red >= kTestAReduction, "reduction");
  o.check(r2 >= kTestAR2, "lipm R2");
  o.check(secs < kTestASeconds, "runtime");
}

void criterion_5(const config::RunConfig& go1, Outcome& o) {
  const auto r = harness::run_kink(go1);
  const double a_star = fitted(r, "a_star"), below = fitted(r, "max_gap_below"),
               above = fitted(r, "min_excess_above"), left = fitted(r, "left_slope"),
               right = fitted(r, "right_slope");
  const auto& mu = r.companions.at(0);
  o.detail << "a* " << a_star << ", gap below " << below << ", excess above " << above
           << ", slopes " << left << " / " << right << ", departs at "
           << fitted(r, "observed_departure") << ", mu-sweep jump " << fitted(mu, "max_slope_jump");
  o.check(r.failures() == 0 && mu.failures() == 0, "solver failures");
  o.check(in(a_star, kAStarLo, kAStarHi), "a*");
  o.check(below <= kFloorGapBelow, "floor match below a*");
  o.check(above > kStrictMargin, "strict excess above a*");
  o.check(right > left + kStrictMargin, "slope increase at a*");
  o.check(fitted(mu, "smooth") == 1.0, "mu-sweep smoothness");
}

void criterion_6(const config::RunConfig& go1, Outcome& o) {
  const auto stance = go1.stance();
  const Vec3 com = go1.nominal_com();
  const Vec3 f_net = required_contact_force(stance, Vec3::Zero().eval());
  std::mt19937_64 rng(go1.seed);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0;
  bool cones_inactive = true;
  for (int i = 0; i < kPrefactorInstances; ++i) {
    forceqp::QpWeights w;
    w.alpha = std::pow(10.0, 2 * u(rng));
    w.lambda = std::pow(10.0, 2 * u(rng));
    w.gamma = 1e-10;
    w.hdot_task = Vec3(u(rng), u(rng), u(rng));
    const auto sol = forceqp::solve(stance, com, f_net, w);
    for (std::size_t c = 0; c < stance.size(); ++c)
      cones_inactive = cones_inactive && !sol.cone_active[c];
    const double pf = analysis::task_prefactor(w.alpha, w.lambda);
    worst = std::max(worst, (sol.hdot - pf * w.hdot_task).norm() / w.hdot_task.norm());
  }
  o.detail << kPrefactorInstances << " instances, max relative deviation " << worst;
  o.check(cones_inactive, "cones inactive");
  o.check(worst <= kPrefactorTol, "prefactor");
}

void criterion_7(const config::RunConfig& pm, Outcome& o) {
  const auto r = harness::run_test_e(pm);
  const double slope = fitted(r, "slope_to_100");
  o.detail << "deviation " << fitted(r, "deviation_at_alpha_min_mm") << " mm at alpha 5, slope to 100 "
           << slope << ", inside " << fitted(r, "inside_fraction_min") << ", plateau "
           << fitted(r, "plateau_mm") << " mm";
  o.check(r.failures() == 0, "solver failures");
  o.check(fitted(r, "monotone_to_100") == 1.0, "monotone");
  o.check(in(slope, kTestESlopeLo, kTestESlopeHi), "1/alpha trend");
  o.check(fitted(r, "inside_fraction_min") == 1.0, "inside support");
}

double gradient_error(const ocp::OcpProblem& pb, const Eigen::VectorXd& x) {
  Eigen::VectorXd g;
  ocp::transcribed_cost(pb, x, &g);
  Eigen::VectorXd fd(x.size());
  for (long i = 0; i < x.size(); ++i) {
    const double h = 1e-6 * std::max(1.0, std::abs(x(i)));
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += h;
    xm(i) -= h;
    fd(i) = (ocp::transcribed_cost(pb, xp) - ocp::transcribed_cost(pb, xm)) / (2 * h);
  }
  return (g - fd).norm() / std::max(1.0, fd.norm());
}

void criterion_8(const config::RunConfig& go1, const config::RunConfig& pm, Outcome& o) {
  std::mt19937_64 rng(go1.seed);
  std::uniform_real_distribution<double> u(-1, 1);

  ocp::OcpProblem pb;
  pb.stance = pm.stance();
  pb.knots = 5;
  pb.alpha = 10;
  pb.beta = 3;
  pb.lambda = 0.5;
  pb.hdot_task = {Vec3(0.2, -0.1, 0.05)};
  pb.initial.position = pm.nominal_com();
  pb.terminal.position = pm.nominal_com() + pm.scenario.offset;
  Eigen::VectorXd x(pb.n_vars());
  for (long i = 0; i < x.size(); ++i) x(i) = (i % 3 == 2 ? 35.0 : 0.0) + 5 * u(rng);
  const double grad_err = gradient_error(pb, x);

  const auto stance4 = go1.stance();
  const auto wide = analysis::with_friction(stance4, 1.5);
  double oracle_err = 0, cone_gap = 0;
  for (int i = 0; i < 20; ++i) {
    forceqp::QpWeights w;
    w.alpha = std::pow(10.0, 1.5 * (u(rng) + 1));
    const Vec3 com(0.02 * u(rng), 0.02 * u(rng), go1.robot.height);
    const Vec3 f_net(3 * u(rng), 3 * u(rng), go1.robot.mass * go1.robot.gravity);
    const auto ref = forceqp::solve_unconstrained(wide, com, f_net, w);
    const auto soc = forceqp::solve(wide, com, f_net, w);
    for (std::size_t c = 0; c < 4; ++c)
      oracle_err = std::max(oracle_err, (soc.forces[c] - ref.forces[c]).norm() / f_net.norm());
    forceqp::SolverOptions pyr;
    pyr.cone_model = forceqp::ConeModel::pyramid8;
    const auto a = forceqp::solve(stance4, com, f_net, w);
    const auto b = forceqp::solve(stance4, com, f_net, w, pyr);
    cone_gap = std::max(cone_gap, std::abs(a.objective - b.objective) / std::max(1.0, a.objective));
  }

  config::RunConfig trot_cfg = go1;
  trot_cfg.robot.stance = "trot";
  const auto stance2 = trot_cfg.stance();
  double floor_violation = 0;
  for (int i = 0; i < 200; ++i) {
    forceqp::QpWeights w;
    w.alpha = std::pow(10.0, 2.5 * (u(rng) + 1));
    const Vec3 com(0.04 * u(rng), 0.04 * u(rng), go1.robot.height);
    const Vec3 f_net(go1.robot.mass * 3 * u(rng), go1.robot.mass * 3 * u(rng),
                     go1.robot.mass * go1.robot.gravity);
    const auto sol = forceqp::solve(stance2, com, f_net, w);
    const double fl = analysis::geometric_floor(stance2, com, f_net).geometric_floor;
    floor_violation = std::max(floor_violation, fl - sol.hdot.norm() / go1.robot.mass);
  }

  const auto cert = analysis::pointwise_certificate(stance4, go1.nominal_com(), Vec2(0.8, -0.5),
                                                    kCertificateSamples, go1.seed);

  o.detail << "grad err " << grad_err << ", oracle err " << oracle_err << ", soc/pyramid gap "
           << cone_gap << ", floor violation " << std::max(0.0, floor_violation)
           << ", certificate beaten " << cert.beaten << "/" << cert.samples;
  o.check(grad_err <= kGradientTol, "gradient");
  o.check(oracle_err <= kOracleTol, "unconstrained oracle");
  o.check(cone_gap <= kConeGapTol, "soc vs pyramid");
  o.check(floor_violation <= kFloorSlack, "floor lower bound");
  o.check(cert.beaten == 0 && cert.samples == kCertificateSamples, "pointwise certificate");
}

}  // namespace

int main(int argc, char** argv) {
  const std::string dir = argc > 1 ? argv[1] : "configs";
  const auto go1 = config::load_run_config(dir + "/go1.toml");
  const auto pm = config::load_run_config(dir + "/pointmass.toml");

  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria{
      {"test C floor match", [&](Outcome& o) { criterion_1(go1, o); }},
      {"test B slope and constant", [&](Outcome& o) { criterion_2(go1, o); }},
      {"singular-value identity", [&](Outcome& o) { criterion_3(go1, o); }},
      {"test A rate", [&](Outcome& o) { criterion_4(pm, o); }},
      {"friction kink", [&](Outcome& o) { criterion_5(go1, o); }},
      {"task prefactor", [&](Outcome& o) { criterion_6(go1, o); }},
      {"test E zmp", [&](Outcome& o) { criterion_7(pm, o); }},
      {"property suites", [&](Outcome& o) { criterion_8(go1, pm, o); }},
  };

  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    o.detail.precision(6);
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    failed += !o.pass;
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
