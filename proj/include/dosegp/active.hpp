#pragma once

#include <Eigen/Dense>
#include <functional>
#include <string>
#include <vector>

#include "dosegp/affine.hpp"
#include "dosegp/backdoor.hpp"

namespace dosegp {

// Variance-greedy dose picking: argmax, ties to the lowest index.
Eigen::Index select_next_dose(const Eigen::VectorXd& variances);

// Answers a dose query for one stratum. Throwing aborts the loop; whatever
// was collected survives in the result.
using DoseOracle =
    std::function<double(int stratum, double dose, RandomStream& rng)>;

struct ActiveOptions {
  int hyper_refresh_every = 5;  // full refit cadence, in accepted points
  McmcOptions full_mcmc;        // seeding fit and every refresh
  McmcOptions latent_mcmc;      // between refreshes; hyperparameters frozen
  std::uint64_t seed = 0;

  ActiveOptions();
  void validate() const;
};

struct SelectionRecord {
  int step = 0;      // 1-based adaptive step
  int stratum = 0;
  Eigen::Index dose_index = 0;
  double dose = 0.0;
  double y = 0.0;
  bool hyper_refresh = false;
};

struct ActiveResult {
  std::vector<InterventionalDataset> data;    // per stratum, incl. seeding
  std::vector<McmcSamples> samples;           // final chain per stratum
  std::vector<PosteriorSummary> summaries;
  std::vector<SelectionRecord> history;       // adaptive queries only
  bool aborted = false;
  std::string error;
};

// Seeds one observation per (stratum, dose), fits each stratum, then spends
// the budget greedily on the highest posterior variance across all strata.
// Only the stratum that received a point is refit; hyperparameters move only
// on the refresh cadence, latent draws in between.
ActiveResult run_active_loop(const std::vector<DoseResponsePrior>& priors,
                             const DoseOracle& oracle, int budget,
                             const ActiveOptions& opts);

// The last retained draw, viewed as a chain state to continue from.
McmcState state_from_last_draw(const McmcSamples& samples);

}  // namespace dosegp
