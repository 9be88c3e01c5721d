#pragma once

// Run configuration in a small TOML subset: [sections], `key = value` with
// numbers, booleans, quoted strings and flat arrays of numbers or strings,
// `#` comments. Unknown sections or keys are rejected.

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include "pendular/errors.hpp"
#include "pendular/model.hpp"

namespace pendular::config {

using Value = std::variant<double, bool, std::string, std::vector<double>, std::vector<std::string>>;

struct Entry {
  Value value;
  int line = 0;
};

/// section -> key -> entry. Keys before the first header live in section "";
/// a header's own line is stored under the empty key.
using Document = std::map<std::string, std::map<std::string, Entry>>;

Document parse_document(const std::string& text);

struct Sinusoid {
  char axis = 'x';          // 'x', 'y' or 'z'
  double amplitude = 0.0;   // m
  double frequency = 1.0;   // Hz
};

struct RunConfig {
  struct Robot {
    std::string name = "go1";
    std::string stance = "rectangle";  // "rectangle" (4 feet) or "trot" (FR + RL)
    double mass = 12.0;
    double lx = 0.188;
    double ly = 0.127;
    double height = 0.27;
    double mu = 0.6;
    double gravity = kDefaultGravity;
  } robot;

  struct Weights {
    double alpha = 1.0;
    double beta = 1.0;
    double gamma = 1.0;
    double lambda = 0.0;
    std::vector<double> alpha_grid;
  } weights;

  struct Scenario {
    std::string name = "sway";
    double duration = 50.0;      // s
    double sample_rate = 20.0;   // Hz
    std::vector<Sinusoid> sway;
    double horizon = 3.0;        // s, trajectory problem
    int knots = 60;
    Vec3 offset = Vec3::Zero();  // rest-to-rest CoM displacement
  } scenario;

  struct Solver {
    std::string cone_model = "soc";
    double tol = 1e-10;
    int max_iter = 100000;
    double ocp_tol = 1e-8;
    double bc_tol = 1e-6;
  } solver;

  std::string output_dir = "runs";
  std::uint64_t seed = 1;

  /// Throws ConfigError naming the offending field.
  void validate() const;

  StanceConfig stance() const;
  /// CoM rest position: above the stance centroid at the nominal height.
  Vec3 nominal_com() const;
};

RunConfig from_document(const Document& doc);
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
std::string to_toml(const RunConfig& cfg);

}  // namespace pendular::config
