#pragma once

// Scenario generators and parameter sweeps for the experiment suite. Every
// sweep returns a SweepResult whose rows are ordered by the swept parameter
// and whose CSV is byte-identical for identical inputs.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "pendular/config.hpp"
#include "pendular/model.hpp"

namespace pendular::harness {

inline const std::vector<double> kTestAGrid{1, 5, 10, 50, 100, 250, 500, 1000};
inline const std::vector<double> kTestBGrid{1, 2, 5, 10, 20, 50, 100, 200, 500, 1000};
inline const std::vector<double> kTestCGrid{1, 10, 100, 1e3, 1e4, 1e5};
inline const std::vector<double> kTestEGrid{5, 20, 100, 500, 1000};
inline constexpr int kTestCDirections = 7;

struct Scenario {
  std::string name;
  StanceConfig stance;
  Vec3 com0 = Vec3::Zero();
  std::vector<config::Sinusoid> sway;
  double duration = 50.0;
  double sample_rate = 20.0;

  /// Throws std::invalid_argument on negative amplitudes, non-positive
  /// frequencies, duration or rate.
  void validate() const;
  std::size_t frames() const;
  double time(std::size_t frame) const { return static_cast<double>(frame) / sample_rate; }
  Vec3 com(double t) const;
  Vec3 com_acc(double t) const;

  static Scenario from_config(const config::RunConfig& cfg);
};

struct Row {
  std::vector<double> values;  // one per column; NaN where the solve failed
  std::string error;           // empty on success
};

struct SweepResult {
  std::string name;
  std::vector<std::string> columns;  // first column is the swept parameter
  std::vector<Row> rows;
  std::map<std::string, double> fitted;  // fitted constants and analytic overlays
  std::vector<SweepResult> companions;   // secondary tables (e.g. direction sweep)

  std::string to_csv() const;
  /// `key=value` lines: fitted constants then one line per failed row.
  std::string summary() const;
  std::vector<double> column(const std::string& name) const;
  std::size_t failures() const;
};

/// Paths of the files written for one sweep.
struct Artifacts {
  std::vector<std::filesystem::path> csv;
  std::filesystem::path svg;
  std::filesystem::path summary;
};

/// Writes `<name>.csv` (plus companions), `<name>_summary.txt` and
/// `<name>_<timestamp>.svg` under dir.
Artifacts write_artifacts(const SweepResult& result, const std::filesystem::path& dir);

/// Indices of the fitting window: alphas within one decade of the largest,
/// widened to the four largest when the decade holds fewer points.
std::vector<std::size_t> upper_decade(const std::vector<double>& alphas);

/// Least-squares log-log slope of y against alpha over the upper decade.
double upper_decade_slope(const std::vector<double>& alphas, const std::vector<double>& values);

/// Geometric mean of alpha * y over the upper decade (K in y ~ K / alpha).
double upper_decade_constant(const std::vector<double>& alphas, const std::vector<double>& values);

SweepResult run_test_a(const config::RunConfig& cfg);
SweepResult run_test_b(const config::RunConfig& cfg);
SweepResult run_test_c(const config::RunConfig& cfg);
SweepResult run_test_e(const config::RunConfig& cfg);
SweepResult run_kink(const config::RunConfig& cfg);
SweepResult run_prefactor(const config::RunConfig& cfg);

/// Recomputes one Test B row (mean |Hdot|/m over the scenario at alpha).
double test_b_point(const config::RunConfig& cfg, double alpha, int* iterations = nullptr);

/// Table rows A, B, C and E rebuilt from the CSVs in dir without re-solving.
std::string report_from_csv(const std::filesystem::path& dir);

/// Sweep parallelism: PENDULAR_LAB_THREADS if set, else hardware concurrency.
unsigned sweep_threads();

/// Evaluates fn(0..n-1) on up to sweep_threads() workers; results in index order.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t n, Fn fn) {
  std::vector<T> out(n);
  const unsigned workers = static_cast<unsigned>(std::min<std::size_t>(sweep_threads(), n));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
    return out;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) out[i] = fn(i);
    });
  for (auto& t : pool) t.join();
  return out;
}

}  // namespace pendular::harness
