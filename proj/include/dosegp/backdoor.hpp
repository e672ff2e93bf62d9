#pragma once

#include <Eigen/Dense>
#include <tuple>

#include "dosegp/dataset.hpp"
#include "dosegp/gp.hpp"

namespace dosegp {

// Strictly increasing dose levels. A single level is tolerated (degenerate
// but well-defined); the evaluation protocol itself always builds >= 2.
struct DoseGrid {
  Eigen::VectorXd levels;

  Eigen::Index size() const { return levels.size(); }
  void validate() const;
  // Evenly spaced; requires lo < hi and t >= 2.
  static DoseGrid even(double lo, double hi, Eigen::Index t);
  // Exact-match lookup (relative tolerance on the grid span); InputError if
  // the dose is off the grid.
  Eigen::Index index_of(double dose) const;
};

// Gaussian belief about the dose-response curve on a grid, obtained by
// averaging a fitted (y | x, z) surface over the empirical covariate
// distribution, plus where it came from.
struct DoseResponsePrior {
  DoseGrid grid;
  Eigen::VectorXd mu;        // grid-length mean
  Eigen::MatrixXd cov;       // grid x grid, symmetric PSD
  Eigen::Index n_obs = 0;    // covariate sample size behind the average
  StandardizeMoments moments;

  void validate() const;
};

// Center/scale outcomes and treatments by the observational moments; the
// interventional side is mapped with the same moments. Covariates untouched.
std::tuple<ObservationalDataset, InterventionalDataset, StandardizeMoments>
standardize(const ObservationalDataset& obs, const InterventionalDataset& intv);

struct PriorBuildOptions {
  Eigen::Index block_size = 256;
  double memory_budget_mb = 4096.0;
  StandardizeMoments moments;  // recorded in the result, identity by default
};

// mu_t = mean_i m*(x_t, z_i) and cov_tu = mean_ij cov*((x_t, z_i), (x_u, z_j))
// for the model's latent predictive m*, cov*. Never materializes the
// (grid x n) joint covariance: covariate sums are accumulated blockwise, and
// the train-cross terms reuse the model's factorization.
DoseResponsePrior build_dose_response_prior(const GpPosterior& model,
                                            const ObservationalDataset& obs,
                                            const DoseGrid& grid,
                                            const PriorBuildOptions& opts = {});

}  // namespace dosegp
