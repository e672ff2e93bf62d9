#pragma once

#include <Eigen/Dense>
#include <optional>

#include "dosegp/backdoor.hpp"
#include "dosegp/linalg.hpp"
#include "dosegp/rng.hpp"

namespace dosegp {

// Interventional model on the grid: f = a .* f_obs + b with
//   f_obs ~ N(mu, K) from the observational prior,
//   a ~ N(1, K_a), b ~ N(0, K_b), y | f ~ N(f(x), sigma_int_sq).
struct AffineHyper {
  double lambda_a = 1.0, sigma_a = 1.0;   // scale / smoothness of a's kernel
  double lambda_b = 1.0, sigma_b = 1.0;   // same for b
  double sigma_int_sq = 1.0;              // interventional noise variance

  void validate() const;
};

// log prior over the hyperparameters: normal on the logs of the kernel
// scales (variance 0.5) and smoothnesses (variance 0.1); the noise variance
// gets Jeffreys 1/sigma^2 by default or inverse-gamma(a0, b0) when a proper
// prior is configured.
double log_hyperprior(const AffineHyper& h, double noise_prior_shape = 0.0,
                      double noise_prior_scale = 0.0);

// Grid geometry feeding the kernels of a and b: dose and prior-mean
// coordinates rescaled to [0, 1], and the relative prior uncertainty
//   v_t = sqrt(K_tt / max_u K_uu),
// which pins a and b near their means wherever the observational prior is
// already confident. k(t, u) = lambda v_t v_u
//   * exp(-((xh_t - xh_u)^2 + (yh_t - yh_u)^2) / (2 sigma)) + 1e-5 delta_tu.
class AffineGeometry {
 public:
  explicit AffineGeometry(const DoseResponsePrior& prior);

  Eigen::Index size() const { return x_hat_.size(); }
  const Eigen::VectorXd& x_hat() const { return x_hat_; }
  const Eigen::VectorXd& y_hat() const { return y_hat_; }
  const Eigen::VectorXd& v() const { return v_; }

  double kernel(Eigen::Index t, Eigen::Index u, double lambda,
                double sigma) const;
  Eigen::MatrixXd gram(double lambda, double sigma) const;

 private:
  Eigen::VectorXd x_hat_, y_hat_, v_;
};

// Per-dose sufficient statistics of an interventional dataset; every dose
// must sit on the grid.
struct DoseData {
  Eigen::VectorXi count;
  Eigen::VectorXd sum_y;
  Eigen::VectorXd sum_y_sq;
  Eigen::Index total = 0;

  static DoseData collect(const DoseGrid& grid,
                          const InterventionalDataset& intv);
};

struct McmcState {
  Eigen::VectorXd f_obs, a, b;
  AffineHyper hyper;

  Eigen::VectorXd f() const { return a.cwiseProduct(f_obs) + b; }
  void validate(Eigen::Index grid_size) const;
};

struct McmcOptions {
  int iterations = 2200;
  int burn_in = 200;
  int thin = 10;
  std::uint64_t seed = 0;
  bool clamp_a = false;               // drops the multiplicative channel
  bool update_hyperparameters = true; // false = latent-only refresh
  // Inverse-gamma prior on the noise variance; (0, 0) means Jeffreys.
  double noise_prior_shape = 0.0;
  double noise_prior_scale = 0.0;
  double slice_width = 1.0;
  int slice_max_stepout = 50;
  std::optional<McmcState> init_state;

  void validate() const;
};

struct McmcSamples {
  Eigen::MatrixXd f_obs, a, b;   // draws x grid
  Eigen::MatrixXd hyper;         // draws x 5: lambda_a sigma_a lambda_b sigma_b sigma_int_sq
  DoseGrid grid;
  std::uint64_t seed = 0;
  int iterations = 0, burn_in = 0, thin = 0;

  Eigen::Index num_draws() const { return f_obs.rows(); }
  Eigen::VectorXd f_draw(Eigen::Index k) const;
};

struct PosteriorSummary {
  Eigen::VectorXd mean, variance;  // of f per dose, across draws
};

// One systematic-scan sweep in the fixed order f_obs, a, b, noise variance,
// then the four kernel hyperparameters by slice sampling on the log scale.
// With no data rows this samples the prior chain.
McmcState gibbs_sweep(McmcState state, const DoseResponsePrior& prior,
                      const AffineGeometry& geom, const DoseData& data,
                      const McmcOptions& opts, RandomStream& rng);
McmcState gibbs_sweep(McmcState state, const DoseResponsePrior& prior,
                      const InterventionalDataset& intv,
                      const McmcOptions& opts, RandomStream& rng);

McmcSamples run_mcmc(const DoseResponsePrior& prior,
                     const InterventionalDataset& intv,
                     const McmcOptions& opts);

PosteriorSummary posterior_summary(const McmcSamples& samples);

// Posterior of a Gaussian vector prior N(mean, cov) observed through
// y_o = h_o f_o + e_o at the given indices, e_o ~ N(0, noise_var_o).
// Shared by the Gibbs conditionals and the closed-form reference method.
struct GaussianConditional {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};
GaussianConditional condition_diagonal(const Eigen::VectorXd& prior_mean,
                                       const Eigen::MatrixXd& prior_cov,
                                       const std::vector<Eigen::Index>& idx,
                                       const Eigen::VectorXd& h,
                                       const Eigen::VectorXd& obs,
                                       const Eigen::VectorXd& noise_var);

}  // namespace dosegp
