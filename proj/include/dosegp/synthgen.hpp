#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>

#include "dosegp/dataset.hpp"
#include "dosegp/rng.hpp"

namespace dosegp {

// A fully sampled confounded dose-response model. Everything below is a
// deterministic function of (p, n, degree, alpha, seed), so serializing the
// five scalars reconstructs the problem bit for bit.
struct SyntheticProblem {
  int p = 0;                 // covariate count
  Eigen::Index n = 0;        // observational rows drawn with the model
  int degree = 2;            // direct-effect polynomial degree
  double alpha = 0.25;       // effect-range quantile (0.25 -> central 50%)
  std::uint64_t seed = 0;

  Eigen::VectorXd theta;     // confounder mixing weights, length p + 1
  Eigen::VectorXd beta;      // quadratic outcome coefficients, length 3
  Eigen::VectorXd poly;      // direct-effect coefficients, length degree + 1
  Eigen::VectorXd poly_raw;  // before range matching
  double x_mean_hat = 0.0;   // treatment moments the polynomial is anchored to
  double x_var_hat = 1.0;
  double range_confounded = 0.0;  // quantile range of f_yz + noise
  double range_direct = 0.0;      // sample range of the raw polynomial part
  double noise_frac_x = 0.0;      // sigma_x^2 / var(f_x), drawn in [0.2, 0.4]
  double noise_frac_y = 0.0;
  double sigma_x_sq = 0.0;
  double sigma_y_sq = 0.0;
  double expected_f_yz = 0.0;     // analytic E[f_yz(Z)]
  double rank_correlation = 0.0;  // realized |spearman(X, f_yz)|
  int rejections = 0;

  // Realized per-row pieces kept for diagnostics and confounder scoring.
  Eigen::VectorXd f_x_sum;   // sum_i f_xi(z_i), length n
  Eigen::VectorXd f_yz;      // confounding term per row
  Eigen::VectorXd f_yz_noisy;  // f_yz + outcome noise

  double direct_effect(double x) const;       // polynomial in scaled x
  double true_dose_response(double x) const;  // direct + E[f_yz]
  Eigen::VectorXd true_dose_response(const Eigen::VectorXd& x) const;
};

// Draw a model plus its observational sample. Rejects and redraws the whole
// model while |spearman(X, f_yz)| < 0.2; more than 100 rejections raises
// GenerationError.
std::pair<SyntheticProblem, ObservationalDataset> generate_problem(
    int p, Eigen::Index n, int degree, double alpha, std::uint64_t seed);

// One arm of a randomized trial at dose x: covariates are drawn fresh, the
// dose is forced. Appends `replicates` rows.
void sample_interventional(const SyntheticProblem& problem, double x,
                           int replicates, RandomStream& rng,
                           InterventionalDataset& out);

enum class DropMode { kRandom, kAdversarial };

// Remove k covariate columns. Random: uniform subset. Adversarial: ranks
// covariates by how much of the X / outcome-confounding dependence each one
// carries (absolute rank correlation of X and the noisy confounding term
// after residualizing both on that covariate with a fixed-hyperparameter GP
// smoother on a strided subsample), then removes the k strongest.
ObservationalDataset drop_confounders(const SyntheticProblem& problem,
                                      const ObservationalDataset& data,
                                      DropMode mode, int k, RandomStream& rng,
                                      std::string* ranking_note = nullptr);

// Rank statistics (average ranks on ties) and their Pearson correlation.
Eigen::VectorXd average_ranks(const Eigen::VectorXd& v);
double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

// Type-7 (linear interpolation) sample quantile.
double quantile_type7(Eigen::VectorXd values, double q);

}  // namespace dosegp
