#include "pendular/harness.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "pendular/analysis.hpp"
#include "pendular/forceqp.hpp"
#include "pendular/ocp.hpp"
#include "pendular/svg.hpp"

namespace pendular::harness {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string format_value(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::vector<double> grid_or(const config::RunConfig& cfg, const std::vector<double>& fallback) {
  std::vector<double> g = cfg.weights.alpha_grid.empty() ? fallback : cfg.weights.alpha_grid;
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

forceqp::SolverOptions solver_options(const config::RunConfig& cfg) {
  forceqp::SolverOptions o;
  o.tol = cfg.solver.tol;
  o.max_iter = cfg.solver.max_iter;
  o.cone_model = forceqp::cone_model_from_string(cfg.solver.cone_model);
  return o;
}

// Plain least-squares slope of log y on log x over positive finite points.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int n = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0) || !(y[i] > 0)) continue;
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
    ++n;
  }
  const double den = n * sxx - sx * sx;
  if (n < 2 || den <= 0) return kNaN;
  return (n * sxy - sx * sy) / den;
}

struct QpPoint {
  double mean_hdot = 0.0;
  double mean_floor = 0.0;
  long iterations = 0;
  double residual = 0.0;
};

QpPoint qp_sweep_point(const Scenario& sc, double alpha, double gamma,
                       const forceqp::SolverOptions& opts, bool with_floor) {
  forceqp::QpWeights w;
  w.alpha = alpha;
  w.gamma = gamma;
  QpPoint p;
  const std::size_t n = sc.frames();
  for (std::size_t k = 0; k < n; ++k) {
    const double t = sc.time(k);
    const Vec3 c = sc.com(t);
    const Vec3 f_net = required_contact_force(sc.stance, sc.com_acc(t));
    const auto sol = forceqp::solve(sc.stance, c, f_net, w, opts);
    p.mean_hdot += sol.hdot.norm() / sc.stance.mass;
    p.iterations += sol.iterations;
    p.residual = std::max(p.residual, sol.primal_residual);
    if (with_floor) p.mean_floor += analysis::geometric_floor(sc.stance, c, f_net).geometric_floor;
  }
  p.mean_hdot /= static_cast<double>(n);
  p.mean_floor /= static_cast<double>(n);
  return p;
}

ocp::OcpProblem ocp_problem(const config::RunConfig& cfg, double alpha) {
  ocp::OcpProblem pb;
  pb.stance = cfg.stance();
  pb.horizon = cfg.scenario.horizon;
  pb.knots = cfg.scenario.knots;
  pb.alpha = alpha;
  pb.beta = cfg.weights.beta;
  pb.gamma = cfg.weights.gamma;
  pb.lambda = cfg.weights.lambda;
  pb.initial.position = cfg.nominal_com();
  pb.terminal.position = cfg.nominal_com() + cfg.scenario.offset;
  return pb;
}

ocp::OcpOptions ocp_options(const config::RunConfig& cfg) {
  ocp::OcpOptions o;
  o.tol = cfg.solver.ocp_tol;
  o.bc_tol = cfg.solver.bc_tol;
  return o;
}

// Runs fn per grid value in parallel; exceptions become row errors.
template <typename Fn>
std::vector<Row> sweep_rows(const std::vector<double>& grid, std::size_t n_cols, Fn fn) {
  return parallel_map<Row>(grid.size(), [&](std::size_t i) {
    Row row;
    try {
      row.values = fn(grid[i]);
    } catch (const std::exception& e) {
      row.values.assign(n_cols, kNaN);
      row.values[0] = grid[i];
      row.error = e.what();
    }
    return row;
  });
}

std::vector<double> finite_pairs(const std::vector<double>& x, const std::vector<double>& y,
                                 std::vector<double>& y_out) {
  std::vector<double> x_out;
  y_out.clear();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (std::isfinite(x[i]) && std::isfinite(y[i]) && y[i] > 0) {
      x_out.push_back(x[i]);
      y_out.push_back(y[i]);
    }
  return x_out;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

svg::Chart chart_for(const SweepResult& r) {
  svg::Chart c;
  c.title = r.name;
  c.x_label = r.columns.front();
  auto add = [&](const std::string& col, bool dashed) {
    const auto it = std::find(r.columns.begin(), r.columns.end(), col);
    if (it == r.columns.end()) return;
    c.series.push_back({col, r.column(r.columns.front()), r.column(col), dashed});
  };
  if (r.name == "test_a") {
    c.log_x = c.log_y = true;
    c.y_label = "time-avg |Hdot|";
    add("eps_H", false);
    add("reference_K_over_alpha", true);
  } else if (r.name == "test_b") {
    c.log_x = c.log_y = true;
    c.y_label = "|Hdot|/m";
    add("hdot_over_m", false);
    add("analytic_K_over_alpha", true);
  } else if (r.name == "test_c") {
    c.log_x = c.log_y = true;
    c.y_label = "|Hdot|/m";
    add("hdot_over_m", false);
    add("analytic_floor", true);
  } else if (r.name == "test_e") {
    c.log_x = c.log_y = true;
    c.y_label = "ZMP - pivot (mm)";
    add("zmp_pivot_mm", false);
    add("reference_1_over_alpha_mm", true);
  } else if (r.name == "kink") {
    c.y_label = "|Hdot|/m";
    add("qp_inf", false);
    add("floor", true);
  } else if (r.name == "prefactor") {
    c.log_x = true;
    c.y_label = "Hdot / task";
    add("measured_ratio", false);
    add("predicted_prefactor", true);
  } else {
    for (std::size_t i = 1; i < r.columns.size(); ++i) add(r.columns[i], false);
  }
  return c;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  return out;
}

// Minimal numeric CSV reader: header plus rows of numbers ("nan" allowed).
std::map<std::string, std::vector<double>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty csv " + path.string());
  const auto header = split(line, ',');
  std::map<std::string, std::vector<double>> cols;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size()) throw std::runtime_error("ragged csv " + path.string());
    for (std::size_t i = 0; i < cells.size(); ++i)
      cols[header[i]].push_back(cells[i] == "nan" ? kNaN : std::stod(cells[i]));
  }
  return cols;
}

}  // namespace

void Scenario::validate() const {
  if (!(duration > 0.0)) throw std::invalid_argument("scenario: duration must be positive");
  if (!(sample_rate > 0.0)) throw std::invalid_argument("scenario: sample rate must be positive");
  for (const auto& s : sway) {
    if (!(s.amplitude >= 0.0)) throw std::invalid_argument("scenario: negative amplitude");
    if (!(s.frequency > 0.0)) throw std::invalid_argument("scenario: frequency must be positive");
    if (s.axis != 'x' && s.axis != 'y' && s.axis != 'z')
      throw std::invalid_argument("scenario: axis must be x, y or z");
  }
}

std::size_t Scenario::frames() const {
  return static_cast<std::size_t>(std::llround(duration * sample_rate));
}

Vec3 Scenario::com(double t) const {
  Vec3 c = com0;
  for (const auto& s : sway)
    c(s.axis - 'x') += s.amplitude * std::sin(2.0 * std::numbers::pi * s.frequency * t);
  return c;
}

Vec3 Scenario::com_acc(double t) const {
  Vec3 a = Vec3::Zero();
  for (const auto& s : sway) {
    const double w = 2.0 * std::numbers::pi * s.frequency;
    a(s.axis - 'x') -= s.amplitude * w * w * std::sin(w * t);
  }
  return a;
}

Scenario Scenario::from_config(const config::RunConfig& cfg) {
  Scenario sc;
  sc.name = cfg.scenario.name;
  sc.stance = cfg.stance();
  sc.com0 = cfg.nominal_com();
  sc.sway = cfg.scenario.sway;
  sc.duration = cfg.scenario.duration;
  sc.sample_rate = cfg.scenario.sample_rate;
  sc.validate();
  return sc;
}

std::string SweepResult::to_csv() const {
  std::ostringstream o;
  for (std::size_t i = 0; i < columns.size(); ++i) o << (i ? "," : "") << columns[i];
  o << "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.values.size(); ++i) o << (i ? "," : "") << format_value(r.values[i]);
    o << "\n";
  }
  return o.str();
}

std::string SweepResult::summary() const {
  std::ostringstream o;
  o << "name=" << name << "\n";
  for (const auto& [k, v] : fitted) o << k << "=" << format_value(v) << "\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!rows[i].error.empty())
      o << "error." << format_value(rows[i].values.front()) << "=" << rows[i].error << "\n";
  for (const auto& c : companions) {
    for (const auto& [k, v] : c.fitted) o << c.name << "." << k << "=" << format_value(v) << "\n";
  }
  return o.str();
}

std::vector<double> SweepResult::column(const std::string& col) const {
  const auto it = std::find(columns.begin(), columns.end(), col);
  if (it == columns.end()) throw std::out_of_range("no column " + col);
  const auto idx = static_cast<std::size_t>(it - columns.begin());
  std::vector<double> out;
  for (const auto& r : rows) out.push_back(r.values.at(idx));
  return out;
}

std::size_t SweepResult::failures() const {
  std::size_t n = 0;
  for (const auto& r : rows) n += r.error.empty() ? 0 : 1;
  for (const auto& c : companions) n += c.failures();
  return n;
}

Artifacts write_artifacts(const SweepResult& result, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  Artifacts a;
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + p.string());
    out << text;
  };
  a.csv.push_back(dir / (result.name + ".csv"));
  write(a.csv.back(), result.to_csv());
  for (const auto& c : result.companions) {
    a.csv.push_back(dir / (c.name + ".csv"));
    write(a.csv.back(), c.to_csv());
  }
  a.summary = dir / (result.name + "_summary.txt");
  write(a.summary, result.summary());
  a.svg = dir / (result.name + "_" + timestamp() + ".svg");
  write(a.svg, svg::render(chart_for(result)));
  return a;
}

std::vector<std::size_t> upper_decade(const std::vector<double>& alphas) {
  std::vector<std::size_t> idx(alphas.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return alphas[a] < alphas[b]; });
  if (idx.empty()) return idx;
  const double top = alphas[idx.back()];
  std::vector<std::size_t> out;
  for (auto i : idx)
    if (alphas[i] >= top / 10.0 * (1.0 - 1e-12)) out.push_back(i);
  if (out.size() < 4) out.assign(idx.end() - std::min<std::size_t>(4, idx.size()), idx.end());
  return out;
}

double upper_decade_slope(const std::vector<double>& alphas, const std::vector<double>& values) {
  std::vector<std::pair<double, double>> pts;
  for (auto i : upper_decade(alphas)) pts.emplace_back(alphas[i], values[i]);
  return ocp::collapse_rate_fit(pts).first;
}

double upper_decade_constant(const std::vector<double>& alphas, const std::vector<double>& values) {
  double acc = 0.0;
  int n = 0;
  for (auto i : upper_decade(alphas)) {
    if (!(values[i] > 0.0)) throw std::invalid_argument("upper_decade_constant: values must be positive");
    acc += std::log(alphas[i] * values[i]);
    ++n;
  }
  if (n == 0) throw std::invalid_argument("upper_decade_constant: empty grid");
  return std::exp(acc / n);
}

unsigned sweep_threads() {
  unsigned hw = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("PENDULAR_LAB_THREADS")) {
    unsigned v = 0;
    const auto [ptr, ec] = std::from_chars(env, env + std::char_traits<char>::length(env), v);
    if (ec == std::errc() && v > 0) return std::min(v, hw);
  }
  return hw;
}

double test_b_point(const config::RunConfig& cfg, double alpha, int* iterations) {
  const auto sc = Scenario::from_config(cfg);
  const auto p = qp_sweep_point(sc, alpha, cfg.weights.gamma, solver_options(cfg), false);
  if (iterations) *iterations = static_cast<int>(p.iterations);
  return p.mean_hdot;
}

SweepResult run_test_a(const config::RunConfig& cfg) {
  SweepResult r;
  r.name = "test_a";
  r.columns = {"alpha", "eps_H", "eps_pend", "lipm_r2", "reference_K_over_alpha", "solver_iters",
               "residual"};
  const auto grid = grid_or(cfg, kTestAGrid);
  const auto opts = ocp_options(cfg);
  r.rows = sweep_rows(grid, r.columns.size(), [&](double alpha) {
    const auto sol = ocp::solve_ocp(ocp_problem(cfg, alpha), opts);
    return std::vector<double>{alpha, sol.eps_H, sol.eps_pend, sol.lipm_r2, kNaN,
                               double(sol.inner_iterations),
                               std::max(sol.stationarity, sol.bc_residual)};
  });
  std::vector<double> eps;
  const auto alphas = finite_pairs(r.column("alpha"), r.column("eps_H"), eps);
  if (alphas.size() >= 4) {
    const double k = upper_decade_constant(alphas, eps);
    r.fitted["slope"] = upper_decade_slope(alphas, eps);
    r.fitted["slope_full_range"] = loglog_slope(alphas, eps);
    r.fitted["K_fit"] = k;
    r.fitted["reduction"] = eps.front() / eps.back();
    r.fitted["alpha_min"] = alphas.front();
    r.fitted["alpha_max"] = alphas.back();
    for (auto& row : r.rows) row.values[4] = k / row.values[0];
  }
  for (const auto& row : r.rows)
    if (row.values[0] == 100.0) r.fitted["lipm_r2_at_100"] = row.values[3];
  return r;
}

SweepResult run_test_b(const config::RunConfig& cfg) {
  SweepResult r;
  r.name = "test_b";
  r.columns = {"alpha", "hdot_over_m", "analytic_K_over_alpha", "solver_iters", "residual"};
  const auto sc = Scenario::from_config(cfg);
  const auto jac = analysis::moment_jacobian(sc.stance, sc.com0);
  std::vector<Vec3> excitation;
  for (std::size_t k = 0; k < sc.frames(); ++k) {
    const double t = sc.time(k);
    excitation.push_back(excitation_baseline(sc.stance, sc.com(t), sc.com_acc(t)) / sc.stance.mass);
  }
  const double k_a = analysis::scaling_constant(jac, excitation);
  const auto grid = grid_or(cfg, kTestBGrid);
  const auto opts = solver_options(cfg);
  r.rows = sweep_rows(grid, r.columns.size(), [&](double alpha) {
    const auto p = qp_sweep_point(sc, alpha, cfg.weights.gamma, opts, false);
    return std::vector<double>{alpha, p.mean_hdot, k_a / alpha, double(p.iterations), p.residual};
  });
  r.fitted["K_a"] = k_a;
  std::vector<double> eps;
  const auto alphas = finite_pairs(r.column("alpha"), r.column("hdot_over_m"), eps);
  if (alphas.size() >= 4) {
    r.fitted["slope"] = upper_decade_slope(alphas, eps);
    r.fitted["slope_full_range"] = loglog_slope(alphas, eps);
    r.fitted["K_e"] = upper_decade_constant(alphas, eps);
    r.fitted["cancellation_ratio"] = eps.front() / eps.back();
  }
  return r;
}

SweepResult run_test_c(const config::RunConfig& cfg_in) {
  config::RunConfig cfg = cfg_in;
  cfg.robot.stance = "trot";
  SweepResult r;
  r.name = "test_c";
  r.columns = {"alpha", "hdot_over_m", "analytic_floor", "solver_iters", "residual"};
  const auto sc = Scenario::from_config(cfg);
  const auto grid = grid_or(cfg_in, kTestCGrid);
  const auto opts = solver_options(cfg);
  r.rows = sweep_rows(grid, r.columns.size(), [&](double alpha) {
    const auto p = qp_sweep_point(sc, alpha, cfg.weights.gamma, opts, true);
    return std::vector<double>{alpha, p.mean_hdot, p.mean_floor, double(p.iterations), p.residual};
  });
  std::vector<double> eps;
  const auto alphas = finite_pairs(r.column("alpha"), r.column("hdot_over_m"), eps);
  if (!alphas.empty()) {
    const auto& last = r.rows.back().values;
    r.fitted["floor"] = last[2];
    r.fitted["qp_at_alpha_max"] = last[1];
    r.fitted["alpha_max"] = last[0];
    r.fitted["relative_error"] = std::abs(last[1] - last[2]) / last[2];
    r.fitted["cancellation_ratio"] = eps.front() / eps.back();
  }

  SweepResult dirs;
  dirs.name = "test_c_directions";
  dirs.columns = {"heading_deg", "floor_fraction"};
  std::vector<Vec2> headings;
  for (int i = 0; i < kTestCDirections; ++i) {
    const double th = std::numbers::pi * i / kTestCDirections;
    headings.emplace_back(std::cos(th), std::sin(th));
  }
  const auto fr = analysis::floor_fraction_sweep(sc.stance, sc.com0, headings, 1.0);
  double sum = 0, lo = 1, hi = 0;
  int n = 0;
  for (int i = 0; i < kTestCDirections; ++i) {
    const double v = fr[i].value_or(kNaN);
    dirs.rows.push_back({{180.0 * i / kTestCDirections, v}, {}});
    if (fr[i]) {
      sum += v, lo = std::min(lo, v), hi = std::max(hi, v);
      ++n;
    }
  }
  if (n) {
    dirs.fitted["mean"] = sum / n;
    dirs.fitted["min"] = lo;
    dirs.fitted["max"] = hi;
  }
  r.companions.push_back(std::move(dirs));
  return r;
}

SweepResult run_test_e(const config::RunConfig& cfg) {
  SweepResult r;
  r.name = "test_e";
  r.columns = {"alpha", "zmp_pivot_mm", "zmp_pivot_max_mm", "zmp_inside_fraction",
               "reference_1_over_alpha_mm", "solver_iters", "residual"};
  const auto grid = grid_or(cfg, kTestEGrid);
  const auto opts = ocp_options(cfg);
  r.rows = sweep_rows(grid, r.columns.size(), [&](double alpha) {
    const auto sol = ocp::solve_ocp(ocp_problem(cfg, alpha), opts);
    const auto& m = sol.full_metrics;
    return std::vector<double>{alpha, 1e3 * m.zmp_pivot_mean, 1e3 * m.zmp_pivot_max,
                               m.zmp_inside_fraction, kNaN, double(sol.inner_iterations),
                               std::max(sol.stationarity, sol.bc_residual)};
  });
  const auto alphas = r.column("alpha");
  const auto dev = r.column("zmp_pivot_mm");
  if (!r.rows.empty() && std::isfinite(dev.front())) {
    for (auto& row : r.rows) row.values[4] = dev.front() * alphas.front() / row.values[0];
    std::vector<double> xs, ys;
    bool monotone = true;
    for (std::size_t i = 0; i < alphas.size(); ++i)
      if (alphas[i] <= 100.0) {
        if (!ys.empty() && !(dev[i] < ys.back())) monotone = false;
        xs.push_back(alphas[i]);
        ys.push_back(dev[i]);
      }
    r.fitted["slope_to_100"] = loglog_slope(xs, ys);
    r.fitted["monotone_to_100"] = monotone ? 1.0 : 0.0;
    r.fitted["plateau_mm"] = dev.back();
    r.fitted["deviation_at_alpha_min_mm"] = dev.front();
  }
  double inside = 1.0;
  for (double v : r.column("zmp_inside_fraction")) inside = std::min(inside, std::isnan(v) ? 0.0 : v);
  r.fitted["inside_fraction_min"] = inside;
  return r;
}

SweepResult run_kink(const config::RunConfig& cfg_in) {
  config::RunConfig cfg = cfg_in;
  cfg.robot.stance = "trot";
  const auto stance2 = cfg.stance();
  const Vec3 com = cfg.nominal_com();
  analysis::KinkOptions kopts;
  kopts.solver = solver_options(cfg);

  SweepResult r;
  r.name = "kink";
  r.columns = {"accel", "qp_inf", "floor", "excess", "solver_iters"};
  const double kappa = analysis::kink_kappa(stance2, com);
  const double a_star = analysis::critical_acceleration(cfg.robot.mu, cfg.robot.gravity, kappa);
  std::vector<double> grid;
  for (int i = 1; i <= 22; ++i) grid.push_back(0.25 * i);
  r.rows = sweep_rows(grid, r.columns.size(), [&](double a) {
    const auto p = analysis::kink_point(stance2, com, cfg.robot.mu, a, kopts);
    return std::vector<double>{a, p.qp_inf, p.floor, p.qp_inf - p.floor, double(p.iterations)};
  });
  r.fitted["kappa"] = kappa;
  r.fitted["a_star"] = a_star;

  std::vector<double> xs, ys;
  double below = 0.0, above = std::numeric_limits<double>::infinity();
  double first_excess = kNaN;
  for (const auto& row : r.rows) {
    if (!row.error.empty()) continue;
    xs.push_back(row.values[0]);
    ys.push_back(row.values[1]);
    if (row.values[0] < a_star) below = std::max(below, std::abs(row.values[3]));
    if (row.values[0] > a_star) above = std::min(above, row.values[3]);
    if (std::isnan(first_excess) && row.values[3] > 1e-6) first_excess = row.values[0];
  }
  r.fitted["max_gap_below"] = below;
  r.fitted["min_excess_above"] = std::isfinite(above) ? above : kNaN;
  r.fitted["observed_departure"] = first_excess;
  try {
    const auto [left, right] = analysis::one_sided_slopes(xs, ys, a_star);
    r.fitted["left_slope"] = left;
    r.fitted["right_slope"] = right;
  } catch (const std::exception&) {
    r.fitted["left_slope"] = kNaN;
    r.fitted["right_slope"] = kNaN;
  }

  SweepResult mu;
  mu.name = "kink_mu";
  mu.columns = {"mu", "qp_inf", "floor"};
  std::vector<double> mus;
  for (int i = 0; i <= 14; ++i) mus.push_back(0.3 + 0.05 * i);
  try {
    const auto sweep = analysis::mu_sweep_no_kink(stance2, com, 2.0, mus, kopts);
    for (const auto& p : sweep.curve) mu.rows.push_back({{p.mu, p.qp_inf, p.floor}, {}});
    mu.fitted["accel"] = 2.0;
    mu.fitted["max_slope_jump"] = sweep.max_slope_jump;
    mu.fitted["smooth"] = sweep.smooth ? 1.0 : 0.0;
  } catch (const std::exception& e) {
    mu.rows.push_back({{kNaN, kNaN, kNaN}, e.what()});
  }
  r.companions.push_back(std::move(mu));
  return r;
}

SweepResult run_prefactor(const config::RunConfig& cfg) {
  SweepResult r;
  r.name = "prefactor";
  r.columns = {"lambda_over_alpha", "measured_ratio", "predicted_prefactor", "deviation",
               "solver_iters"};
  const auto stance = cfg.stance();
  const Vec3 com = cfg.nominal_com();
  const Vec3 f_net = required_contact_force(stance, Vec3::Zero().eval());
  const Vec3 task(0.3, -0.2, 0.1);
  const double alpha = std::max(cfg.weights.alpha, 1e-3);
  const std::vector<double> ratios{0.01, 0.1, 0.25, 0.5, 1.0, 2.0, 4.0, 10.0, 100.0};
  const auto opts = solver_options(cfg);
  r.rows = sweep_rows(ratios, r.columns.size(), [&](double ratio) {
    forceqp::QpWeights w;
    w.alpha = alpha;
    w.lambda = ratio * alpha;
    // The prefactor is the gamma -> 0 limit; keep the regulariser negligible.
    w.gamma = 1e-10;
    w.hdot_task = task;
    const auto sol = forceqp::solve(stance, com, f_net, w, opts);
    const double pred = analysis::task_prefactor(w.alpha, w.lambda);
    return std::vector<double>{ratio, sol.hdot.dot(task) / task.squaredNorm(), pred,
                               (sol.hdot - pred * task).norm() / task.norm(),
                               double(sol.iterations)};
  });
  double worst = 0.0;
  for (double d : r.column("deviation")) worst = std::max(worst, std::isnan(d) ? 1.0 : d);
  r.fitted["alpha"] = alpha;
  r.fitted["max_deviation"] = worst;
  return r;
}

std::string report_from_csv(const std::filesystem::path& dir) {
  std::ostringstream o;
  o << "| row | experiment | measured |\n|---|---|---|\n";
  auto row = [&](const char* id, const char* what, const std::string& file, auto fn) {
    const auto path = dir / file;
    if (!std::filesystem::exists(path)) {
      o << "| " << id << " | " << what << " | missing " << file << " |\n";
      return;
    }
    o << "| " << id << " | " << what << " | " << fn(read_csv(path)) << " |\n";
  };
  auto clean = [](const std::vector<double>& x, const std::vector<double>& y, std::vector<double>& yo) {
    return finite_pairs(x, y, yo);
  };
  row("A", "point-mass OCP", "test_a.csv", [&](const auto& c) {
    std::vector<double> eps;
    const auto a = clean(c.at("alpha"), c.at("eps_H"), eps);
    std::ostringstream s;
    s.precision(3);
    s << "slope " << upper_decade_slope(a, eps) << " (" << eps.front() / eps.back() << "x)";
    return s.str();
  });
  row("B", "Go1 N=4 QP", "test_b.csv", [&](const auto& c) {
    std::vector<double> eps;
    const auto a = clean(c.at("alpha"), c.at("hdot_over_m"), eps);
    std::ostringstream s;
    s.precision(3);
    s << "K_e " << upper_decade_constant(a, eps) << ", slope " << upper_decade_slope(a, eps)
      << ", K_a " << c.at("analytic_K_over_alpha").front() * c.at("alpha").front();
    return s.str();
  });
  row("C", "Go1 N=2 floor", "test_c.csv", [&](const auto& c) {
    std::ostringstream s;
    s.precision(5);
    s << "QP " << c.at("hdot_over_m").back() << " vs floor " << c.at("analytic_floor").back()
      << " at alpha " << c.at("alpha").back();
    return s.str();
  });
  row("E", "point-mass ZMP", "test_e.csv", [&](const auto& c) {
    std::ostringstream s;
    s.precision(3);
    s << c.at("zmp_pivot_mm").front() << " mm at alpha " << c.at("alpha").front() << ", "
      << c.at("zmp_pivot_mm").back() << " mm at alpha " << c.at("alpha").back();
    return s.str();
  });
  return o.str();
}

}  // namespace pendular::harness
