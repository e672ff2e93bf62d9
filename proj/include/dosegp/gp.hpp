#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "dosegp/kernel.hpp"
#include "dosegp/linalg.hpp"

namespace dosegp {

// Zero-mean GP regression with iid Gaussian noise, exact inference.
class GpPosterior {
 public:
  GpPosterior(KernelSpec kernel, double noise_variance, Eigen::MatrixXd x,
              Eigen::VectorXd y);

  const KernelSpec& kernel() const { return kernel_; }
  double noise_variance() const { return noise_variance_; }
  const Eigen::MatrixXd& train_inputs() const { return x_; }
  const Eigen::VectorXd& train_targets() const { return y_; }
  // alpha = (K + noise I)^-1 y
  const Eigen::VectorXd& alpha() const { return alpha_; }
  const CholResult& factor() const { return chol_; }

  // Latent joint predictive at query rows (no observation noise).
  void predict_joint(const Eigen::MatrixXd& xstar, Eigen::VectorXd& mean,
                     Eigen::MatrixXd& cov) const;
  Eigen::VectorXd predict_mean(const Eigen::MatrixXd& xstar) const;

 private:
  KernelSpec kernel_;
  double noise_variance_;
  Eigen::MatrixXd x_;
  Eigen::VectorXd y_;
  CholResult chol_;
  Eigen::VectorXd alpha_;
};

struct NllResult {
  double value = 0.0;
  // d NLL / d [log l_1 .. log l_d, log s2, log noise]
  Eigen::VectorXd gradient;
};

// Negative log marginal likelihood
//   0.5 y' A^-1 y + 0.5 log|A| + (n/2) log 2 pi,  A = K + noise I,
// with its analytic gradient in log-parameters.
NllResult gp_negative_log_likelihood(const KernelSpec& kernel,
                                     double noise_variance,
                                     const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& y,
                                     bool with_gradient = true);

struct GpFitOptions {
  int restarts = 5;
  std::uint64_t seed = 0;
  int max_iterations = 200;
  double gradient_tolerance = 1e-6;
};

// Maximum marginal likelihood in log-space via L-BFGS with multiple restarts:
// restart 0 starts from data-driven values (per-dimension spread, target
// variance), the rest perturb them by random factors in [1e-2, 1e2]. Keeps
// the best finite optimum; throws NumericalError if every restart fails.
GpPosterior gp_fit_hyperparameters(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y,
                                   KernelFamily family,
                                   const GpFitOptions& opts = {});

}  // namespace dosegp
