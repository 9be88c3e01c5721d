#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace pendular::optim {

/// f(x), writing the gradient into the second argument.
using Objective = std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>;

struct LbfgsOptions {
  int memory = 12;
  int max_iter = 20000;
  double grad_tol = 1e-8;  // on |grad|_inf / max(1, |f|)
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double f = 0.0;
  double grad_norm = 0.0;  // infinity norm
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

/// Limited-memory BFGS with a strong-Wolfe line search.
LbfgsResult minimize_lbfgs(const Objective& objective, Eigen::VectorXd x0,
                           const LbfgsOptions& opts = {});

}  // namespace pendular::optim
