#pragma once

#include <Eigen/Dense>
#include <functional>

namespace dosegp {

// Objective: fill grad, return value. Returning a non-finite value tells the
// line search to back off.
using ObjectiveFn =
    std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd& grad)>;

struct LbfgsOptions {
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;  // on the max-norm
  int history = 8;
  int max_line_search = 40;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double fx = 0.0;
  int iterations = 0;
  bool converged = false;  // gradient tolerance reached
};

// Limited-memory BFGS (two-loop recursion) with Armijo backtracking.
// Requires a finite objective at x0. Monotone: result.fx <= f(x0).
LbfgsResult lbfgs_minimize(const ObjectiveFn& f, Eigen::VectorXd x0,
                           const LbfgsOptions& opts = {});

}  // namespace dosegp
