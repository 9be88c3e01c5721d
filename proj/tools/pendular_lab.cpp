// pendular-lab: command-line front end for the experiment sweeps and the
// single-shot solvers.
//
// Exit codes: 0 success, 2 configuration error, 3 solver failure (a
// diagnostics file is written under --out), 64 usage error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pendular/analysis.hpp"
#include "pendular/config.hpp"
#include "pendular/forceqp.hpp"
#include "pendular/harness.hpp"
#include "pendular/ocp.hpp"

namespace fs = std::filesystem;
using namespace pendular;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitSolver = 3;
constexpr int kExitUsage = 64;

const std::vector<std::string> kCommands{"test-a", "test-b",   "test-c", "test-e",
                                         "kink",   "prefactor", "floor", "qp-solve",
                                         "ocp-solve", "report"};

struct Options {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string alpha_grid;
  bool json = false;
  double ax = 0.0;
  double ay = 0.0;
  std::optional<double> alpha;
};

std::string usage() {
  std::string s = "usage: pendular-lab <command> [--config PATH] [--out DIR] [--seed N]\n"
                  "                    [--alpha-grid a,b,c] [--json]\ncommands:";
  for (const auto& c : kCommands) s += " " + c;
  return s + "\n";
}

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != item.size() || !(v > 0.0))
      throw ConfigError("alpha grid entries must be positive numbers", 0, "--alpha-grid");
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("alpha grid is empty", 0, "--alpha-grid");
  return out;
}

config::RunConfig load(const Options& o) {
  if (o.config.empty()) throw ConfigError("missing --config", 0, "--config");
  auto cfg = config::load_run_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed) cfg.seed = *o.seed;
  if (!o.alpha_grid.empty()) cfg.weights.alpha_grid = parse_grid(o.alpha_grid);
  if (o.alpha) cfg.weights.alpha = *o.alpha;
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path().empty() ? fs::path(".") : p.parent_path());
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

// One-line human summary per sweep.
std::string headline(const harness::SweepResult& r) {
  auto get = [&](const char* k) {
    const auto it = r.fitted.find(k);
    return it == r.fitted.end() ? std::string("n/a") : fmt(it->second);
  };
  if (r.name == "test_a")
    return "test_a: slope " + get("slope") + ", reduction " + get("reduction") + "x, R2(alpha=100) " +
           get("lipm_r2_at_100");
  if (r.name == "test_b")
    return "test_b: K_e " + get("K_e") + " vs K_a " + get("K_a") + ", slope " + get("slope");
  if (r.name == "test_c")
    return "test_c: QP " + get("qp_at_alpha_max") + " vs floor " + get("floor") +
           " (relative error " + get("relative_error") + ")";
  if (r.name == "test_e")
    return "test_e: " + get("deviation_at_alpha_min_mm") + " mm -> " + get("plateau_mm") +
           " mm, slope to alpha=100 " + get("slope_to_100");
  if (r.name == "kink")
    return "kink: a* " + get("a_star") + ", slopes " + get("left_slope") + " / " + get("right_slope") +
           ", first departure at " + get("observed_departure");
  if (r.name == "prefactor") return "prefactor: max deviation " + get("max_deviation");
  return r.name;
}

int run_sweep(const std::string& cmd, const Options& o) {
  const auto cfg = load(o);
  harness::SweepResult r;
  if (cmd == "test-a") r = harness::run_test_a(cfg);
  else if (cmd == "test-b") r = harness::run_test_b(cfg);
  else if (cmd == "test-c") r = harness::run_test_c(cfg);
  else if (cmd == "test-e") r = harness::run_test_e(cfg);
  else if (cmd == "kink") r = harness::run_kink(cfg);
  else r = harness::run_prefactor(cfg);

  const fs::path dir = cfg.output_dir;
  const auto art = harness::write_artifacts(r, dir);
  write_text(dir / (r.name + "_run.toml"), config::to_toml(cfg));
  if (o.json) {
    nlohmann::json j;
    j["name"] = r.name;
    j["fitted"] = r.fitted;
    for (const auto& c : r.companions) j["companions"][c.name] = c.fitted;
    std::vector<std::string> files;
    for (const auto& p : art.csv) files.push_back(p.string());
    files.push_back(art.svg.string());
    files.push_back(art.summary.string());
    j["artifacts"] = files;
    j["failures"] = r.failures();
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << headline(r) << "\n";
  }
  if (r.failures() > 0) {
    write_text(dir / (r.name + "_diagnostics.txt"), r.summary());
    std::cerr << r.failures() << " sweep point(s) failed; see "
              << (dir / (r.name + "_diagnostics.txt")).string() << "\n";
    return kExitSolver;
  }
  return 0;
}

int run_floor(const Options& o) {
  auto cfg = load(o);
  cfg.robot.stance = "trot";
  const auto stance2 = cfg.stance();
  const Vec3 f_net = required_contact_force(stance2, Vec3(o.ax, o.ay, 0.0));
  const auto rep = analysis::geometric_floor(stance2, cfg.nominal_com(), f_net);
  if (o.json) {
    nlohmann::json j;
    j["geometric_floor"] = rep.geometric_floor;
    j["d_hat"] = {rep.d_hat.x(), rep.d_hat.y(), rep.d_hat.z()};
    j["canceller"] = {rep.canceller.x(), rep.canceller.y(), rep.canceller.z()};
    j["canceller_feasible"] = rep.canceller_feasible;
    if (rep.floor_fraction) j["floor_fraction"] = *rep.floor_fraction;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "geometric_floor=" << fmt(rep.geometric_floor) << " m^2/s^2\n";
    if (rep.floor_fraction) std::cout << "floor_fraction=" << fmt(*rep.floor_fraction) << "\n";
    std::cout << "canceller_feasible=" << (rep.canceller_feasible ? "true" : "false") << "\n";
  }
  return 0;
}

int run_qp(const Options& o) {
  const auto cfg = load(o);
  const auto stance = cfg.stance();
  forceqp::QpWeights w;
  w.alpha = cfg.weights.alpha;
  w.gamma = cfg.weights.gamma;
  w.lambda = cfg.weights.lambda;
  forceqp::SolverOptions so;
  so.tol = cfg.solver.tol;
  so.max_iter = cfg.solver.max_iter;
  so.cone_model = forceqp::cone_model_from_string(cfg.solver.cone_model);
  const Vec3 f_net = required_contact_force(stance, Vec3(o.ax, o.ay, 0.0));
  const auto sol = forceqp::solve(stance, cfg.nominal_com(), f_net, w, so);

  std::ostringstream csv;
  csv << "contact,fx,fy,fz\n";
  for (std::size_t i = 0; i < sol.forces.size(); ++i)
    csv << i << "," << fmt(sol.forces[i].x()) << "," << fmt(sol.forces[i].y()) << ","
        << fmt(sol.forces[i].z()) << "\n";
  write_text(fs::path(cfg.output_dir) / "qp_solve.csv", csv.str());
  if (o.json) {
    nlohmann::json j;
    j["hdot"] = {sol.hdot.x(), sol.hdot.y(), sol.hdot.z()};
    j["hdot_over_m"] = sol.hdot.norm() / stance.mass;
    j["objective"] = sol.objective;
    j["iterations"] = sol.iterations;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "hdot_over_m=" << fmt(sol.hdot.norm() / stance.mass)
              << " iterations=" << sol.iterations << "\n";
  }
  return 0;
}

int run_ocp(const Options& o) {
  const auto cfg = load(o);
  ocp::OcpProblem pb;
  pb.stance = cfg.stance();
  pb.horizon = cfg.scenario.horizon;
  pb.knots = cfg.scenario.knots;
  pb.alpha = cfg.weights.alpha;
  pb.beta = cfg.weights.beta;
  pb.gamma = cfg.weights.gamma;
  pb.lambda = cfg.weights.lambda;
  pb.initial.position = cfg.nominal_com();
  pb.terminal.position = cfg.nominal_com() + cfg.scenario.offset;
  ocp::OcpOptions oo;
  oo.tol = cfg.solver.ocp_tol;
  oo.bc_tol = cfg.solver.bc_tol;
  const auto sol = ocp::solve_ocp(pb, oo);

  std::ostringstream csv;
  csv << "t,cx,cy,cz,vx,vy,vz,ax,ay,az,px,py,hx,hy,hz";
  for (std::size_t i = 0; i < pb.stance.size(); ++i) csv << ",f" << i << "x,f" << i << "y,f" << i << "z";
  csv << "\n";
  for (int k = 0; k < pb.knots; ++k) {
    const auto& s = sol.com_traj[k];
    csv << fmt(k * sol.dt);
    for (const Vec3& v : {s.com, s.com_vel, s.com_acc}) csv << "," << fmt(v.x()) << "," << fmt(v.y()) << "," << fmt(v.z());
    csv << "," << fmt(s.pivot.x()) << "," << fmt(s.pivot.y());
    csv << "," << fmt(sol.hdot[k].x()) << "," << fmt(sol.hdot[k].y()) << "," << fmt(sol.hdot[k].z());
    for (const auto& f : sol.knot_forces[k]) csv << "," << fmt(f.x()) << "," << fmt(f.y()) << "," << fmt(f.z());
    csv << "\n";
  }
  write_text(fs::path(cfg.output_dir) / "ocp_solve.csv", csv.str());
  if (o.json) {
    nlohmann::json j;
    j["objective"] = sol.objective;
    j["eps_H"] = sol.eps_H;
    j["eps_pend"] = sol.eps_pend;
    j["lipm_r2"] = std::isnan(sol.lipm_r2) ? nlohmann::json(nullptr) : nlohmann::json(sol.lipm_r2);
    j["stationarity"] = sol.stationarity;
    j["bc_residual"] = sol.bc_residual;
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << "eps_H=" << fmt(sol.eps_H) << " eps_pend=" << fmt(sol.eps_pend)
              << " lipm_r2=" << fmt(sol.lipm_r2) << "\n";
  }
  return 0;
}

int run_report(const Options& o) {
  fs::path dir = o.out;
  if (dir.empty()) dir = o.config.empty() ? fs::path("runs") : fs::path(config::load_run_config(o.config).output_dir);
  const std::string table = harness::report_from_csv(dir);
  write_text(dir / "table.md", table);
  std::cout << table;
  return 0;
}

void write_failure(const Options& o, const std::string& cmd, const std::string& text) {
  try {
    fs::path dir = o.out.empty() ? fs::path("runs") : fs::path(o.out);
    write_text(dir / (cmd + "_diagnostics.txt"), text);
    std::cerr << "diagnostics written to " << (dir / (cmd + "_diagnostics.txt")).string() << "\n";
  } catch (const std::exception& e) {
    std::cerr << "could not write diagnostics: " << e.what() << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2 || std::find(kCommands.begin(), kCommands.end(), argv[1]) == kCommands.end()) {
    if (argc >= 2) std::cerr << "unknown command: " << argv[1] << "\n";
    std::cerr << usage();
    return kExitUsage;
  }
  const std::string cmd = argv[1];

  Options o;
  CLI::App app{"pendular-lab " + cmd};
  app.add_option("--config", o.config, "Run configuration (TOML subset)");
  app.add_option("--out", o.out, "Output directory");
  app.add_option("--seed", o.seed, "Random seed");
  app.add_option("--alpha-grid", o.alpha_grid, "Comma-separated alpha values");
  app.add_flag("--json", o.json, "Machine-readable summary on stdout");
  if (cmd == "floor" || cmd == "qp-solve") {
    app.add_option("--ax", o.ax, "Fore-aft CoM acceleration (m/s^2)");
    app.add_option("--ay", o.ay, "Lateral CoM acceleration (m/s^2)");
  }
  if (cmd == "qp-solve" || cmd == "ocp-solve") app.add_option("--alpha", o.alpha, "Balance weight");
  try {
    app.parse(argc - 1, argv + 1);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (cmd == "floor") return run_floor(o);
    if (cmd == "qp-solve") return run_qp(o);
    if (cmd == "ocp-solve") return run_ocp(o);
    if (cmd == "report") return run_report(o);
    return run_sweep(cmd, o);
  } catch (const ConfigError& e) {
    std::cerr << "config error";
    if (e.line() > 0) std::cerr << " at line " << e.line();
    if (!e.field().empty()) std::cerr << " (" << e.field() << ")";
    std::cerr << ": " << e.what() << "\n";
    return kExitConfig;
  } catch (const InfeasibleError& e) {
    std::ostringstream d;
    d << "error=infeasible\nmessage=" << e.what() << "\ngap=" << e.gap() << "\ncertificate="
      << e.certificate().transpose() << "\n";
    std::cerr << e.what() << "\n";
    write_failure(o, cmd, d.str());
    return kExitSolver;
  } catch (const ConvergenceError& e) {
    std::ostringstream d;
    d << "error=convergence\nmessage=" << e.what() << "\niterations=" << e.iterations()
      << "\nprimal_residual=" << e.primal_residual() << "\ndual_residual=" << e.dual_residual() << "\n";
    std::cerr << e.what() << "\n";
    write_failure(o, cmd, d.str());
    return kExitSolver;
  } catch (const pendular::Error& e) {
    std::cerr << e.what() << "\n";
    write_failure(o, cmd, std::string("error=solver\nmessage=") + e.what() + "\n");
    return kExitSolver;
  } catch (const std::invalid_argument& e) {
    std::cerr << e.what() << "\n";
    write_failure(o, cmd, std::string("error=invalid_argument\nmessage=") + e.what() + "\n");
    return kExitSolver;
  }
}
