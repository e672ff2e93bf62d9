#include "dosegp/lbfgs.hpp"

#include <cmath>
#include <deque>

#include "dosegp/errors.hpp"

namespace dosegp {

LbfgsResult lbfgs_minimize(const ObjectiveFn& f, Eigen::VectorXd x0,
                           const LbfgsOptions& opts) {
  const Eigen::Index n = x0.size();
  Eigen::VectorXd g(n);
  double fx = f(x0, g);
  if (!std::isfinite(fx) || !g.allFinite())
    throw NumericalError("lbfgs: objective not finite at the starting point");

  struct Pair {
    Eigen::VectorXd s, y;
    double rho;
  };
  std::deque<Pair> mem;

  LbfgsResult res;
  res.x = x0;
  res.fx = fx;

  Eigen::VectorXd x = std::move(x0);
  double gamma = 1.0;  // initial Hessian scaling

  for (int it = 0; it < opts.max_iterations; ++it) {
    if (g.cwiseAbs().maxCoeff() < opts.gradient_tolerance) {
      res.converged = true;
      break;
    }

    // Two-loop recursion for d = -H g.
    Eigen::VectorXd q = g;
    std::vector<double> alpha(mem.size());
    for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
      alpha[i] = mem[i].rho * mem[i].s.dot(q);
      q -= alpha[i] * mem[i].y;
    }
    q *= gamma;
    for (size_t i = 0; i < mem.size(); ++i) {
      const double beta = mem[i].rho * mem[i].y.dot(q);
      q += (alpha[i] - beta) * mem[i].s;
    }
    Eigen::VectorXd d = -q;
    double dg = d.dot(g);
    if (!(dg < 0.0)) {  // not a descent direction; reset to steepest descent
      mem.clear();
      d = -g;
      dg = -g.squaredNorm();
      gamma = 1.0;
    }

    // Armijo backtracking.
    double step = (it == 0 && mem.empty())
                      ? 1.0 / std::max(1.0, g.norm())
                      : 1.0;
    const double c1 = 1e-4;
    Eigen::VectorXd x_new(n), g_new(n);
    double fx_new = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < opts.max_line_search; ++ls) {
      x_new = x + step * d;
      fx_new = f(x_new, g_new);
      if (std::isfinite(fx_new) && g_new.allFinite() &&
          fx_new <= fx + c1 * step * dg) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // cannot make progress along this direction

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd yv = g_new - g;
    const double sy = s.dot(yv);
    if (sy > 1e-12 * s.norm() * yv.norm()) {
      mem.push_back({s, yv, 1.0 / sy});
      if (static_cast<int>(mem.size()) > opts.history) mem.pop_front();
      gamma = sy / yv.squaredNorm();
    }

    x = std::move(x_new);
    fx = fx_new;
    g = g_new;
    res.iterations = it + 1;
    if (fx < res.fx) {
      res.fx = fx;
      res.x = x;
    }
  }
  if (g.cwiseAbs().maxCoeff() < opts.gradient_tolerance) res.converged = true;
  return res;
}

}  // namespace dosegp
