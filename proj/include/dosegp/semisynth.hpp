#pragma once

#include <Eigen/Dense>
#include <vector>

#include "dosegp/backdoor.hpp"
#include "dosegp/dataset.hpp"
#include "dosegp/gp.hpp"

namespace dosegp {

// A ground-truth curve distilled from real observational data: the fitted
// outcome surface averaged over the observed covariates, plus a flat noise
// level for simulating trial draws against it.
struct SemiSyntheticTruth {
  DoseGrid grid;
  Eigen::VectorXd f;        // curve on the grid
  double noise_var = 1.0;   // between-subject spread + fitted noise
  int stratum = -1;         // -1 when built from all rows
  Eigen::Index rows = 0;

  void validate() const;
};

// Fit a GP to (y | x, z), average its predictive mean over the rows at each
// grid dose. The noise is the covariate-induced spread of those predictions
// (averaged over the grid) plus the fitted observation noise.
SemiSyntheticTruth fit_semisynthetic_truth(const ObservationalDataset& obs,
                                           const DoseGrid& grid,
                                           const GpFitOptions& opts = {});

// Same, independently per stratum label; every stratum must have at least
// min_rows rows.
std::vector<SemiSyntheticTruth> fit_semisynthetic_truth_by_stratum(
    const ObservationalDataset& obs, const DoseGrid& grid,
    Eigen::Index min_rows = 20, const GpFitOptions& opts = {});

// One trial draw: y ~ N(f(x), noise_var); the dose must sit on the grid.
void simulate_trial(const SemiSyntheticTruth& truth, double x, int replicates,
                    RandomStream& rng, InterventionalDataset& out);

}  // namespace dosegp
