#pragma once

#include <Eigen/Dense>
#include <map>
#include <string>

#include "dosegp/affine.hpp"
#include "dosegp/backdoor.hpp"

namespace dosegp {

// The comparison ladder around the full affine-reshaping model:
//   kPriorConditioning   update the observational prior on the trial data
//                        directly, conjugate closed form, only the noise
//                        variance is estimated
//   kAdditiveResidual    prior mean/covariance plus an additive SE GP
//                        discrepancy, hyperparameters by marginal likelihood
//   kInterventionalOnly  SE GP on the trial data alone
//   kObservationalOnly   GP on observational (y, x), ignoring confounders
//   kClampedScale        the affine model with the multiplier pinned at one
enum class BaselineMethod {
  kPriorConditioning,
  kAdditiveResidual,
  kInterventionalOnly,
  kObservationalOnly,
  kClampedScale,
};

std::string baseline_name(BaselineMethod m);

struct BaselineFit {
  BaselineMethod method = BaselineMethod::kPriorConditioning;
  Eigen::VectorXd mean, variance;  // per grid dose
  std::map<std::string, double> hyperparameters;
  // Interventional-only fits can collapse to a flat zero curve when the
  // trial sample is tiny; flagged, never silently patched.
  bool collapsed = false;
};

BaselineFit fit_prior_conditioning(const DoseResponsePrior& prior,
                                   const InterventionalDataset& intv);

BaselineFit fit_additive_residual(const DoseResponsePrior& prior,
                                  const InterventionalDataset& intv,
                                  std::uint64_t seed = 0);

// Direct GP regression on rows (y, x), predictions on the grid.
BaselineFit fit_direct_gp(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                          const DoseGrid& grid, KernelFamily family,
                          BaselineMethod tag, const GpFitOptions& opts = {});

BaselineFit fit_clamped_scale(const DoseResponsePrior& prior,
                              const InterventionalDataset& intv,
                              const McmcOptions& opts);

}  // namespace dosegp
