#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>
#include <vector>

#include "dosegp/affine.hpp"
#include "dosegp/backdoor.hpp"
#include "dosegp/gp.hpp"
#include "dosegp/synthgen.hpp"

namespace dosegp {

// Mean absolute error normalized by the spread of the truth; invariant to
// affine changes of the outcome units. Flat truth leaves it undefined.
double normalized_abs_error(const Eigen::VectorXd& estimate,
                            const Eigen::VectorXd& truth);

// Average log density of the truth under per-dose Gaussian posteriors.
// Differences of this across methods are invariant to outcome units.
double avg_posterior_log_density(const Eigen::VectorXd& mean,
                                 const Eigen::VectorXd& variance,
                                 const Eigen::VectorXd& truth);

struct PairedTTest {
  double mean_diff = 0.0;
  double t = 0.0;
  double p = 1.0;
  int n = 0;
  bool significant = false;  // two-tailed at 0.05
};
PairedTTest paired_t_test(const std::vector<double>& diffs);

// One benchmark configuration: direct-effect degree, effect-range quantile,
// confounder-drop mode, interventional sample size.
struct StudyCell {
  int degree = 2;          // 2 or 3
  double alpha = 0.25;     // 0.25 -> central 50% range, 0.10 -> 80%
  DropMode drop = DropMode::kRandom;
  int m_int = 40;

  std::string label() const;
};

struct StudyConfig {
  std::vector<StudyCell> cells;
  Eigen::Index n_obs = 300;
  int p = 10;
  int drop_count = 6;
  Eigen::Index grid_size = 20;
  int replications = 20;
  std::uint64_t seed = 0;
  int threads = 1;
  McmcOptions mcmc;
  GpFitOptions gp_fit;
  PriorBuildOptions prior_build;
  bool run_clamped_scale = true;

  static StudyConfig desk_default();
  static StudyConfig paper_default();
  void validate() const;
};

// "ours" plus the baseline_name() strings key these maps.
struct ReplicationRecord {
  int cell = 0;
  int rep = 0;
  bool failed = false;
  std::string error;
  bool interventional_collapsed = false;
  std::map<std::string, double> e;  // normalized error per method
  std::map<std::string, double> l;  // average log density per method
};

struct MethodAggregate {
  double e_mean = 0.0;
  double l_mean = 0.0;
  // Paired against our method: e_diff = E_method - E_ours,
  // l_diff = L_ours - L_method; positive favors the full model.
  double e_diff_mean = 0.0;
  double e_diff_t = 0.0;
  double e_diff_p = 1.0;
  bool e_diff_significant = false;
  // Replications with |l_diff| > 10 are reported by count, not averaged.
  double l_diff_mean = 0.0;
  int l_excluded = 0;
  int n_used = 0;
};

struct CellSummary {
  StudyCell cell;
  int completed = 0;
  int failed = 0;
  int collapsed = 0;
  double e_ours_mean = 0.0;
  double l_ours_mean = 0.0;
  std::map<std::string, MethodAggregate> methods;
};

struct StudyResult {
  StudyConfig config;
  std::vector<ReplicationRecord> replications;
  std::vector<CellSummary> cells;
};

// One full replication: sample a problem, hide confounders, run the trial,
// fit everything, score against the analytic truth in standardized units.
ReplicationRecord run_replication(const StudyConfig& cfg, int cell_idx,
                                  int rep);

// Replications fan out over a thread pool; each one draws from a stream
// keyed by (seed, cell, rep) and lands in its own slot, so results do not
// depend on the thread count. Failed replications are recorded and skipped
// in the aggregates.
StudyResult run_study(const StudyConfig& cfg);

}  // namespace dosegp
