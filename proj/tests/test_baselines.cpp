#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dosegp/baselines.hpp"
#include "dosegp/errors.hpp"
#include "dosegp/kernel.hpp"
#include "dosegp/linalg.hpp"

using namespace dosegp;

namespace {

DoseResponsePrior toy_prior() {
  DoseResponsePrior p;
  p.grid.levels.resize(4);
  p.grid.levels << 0.0, 1.0, 2.0, 3.0;
  p.mu.resize(4);
  p.mu << 0.0, 0.5, 1.5, 2.0;
  p.cov.resize(4, 4);
  p.cov << 1.00, 0.60, 0.30, 0.10,
           0.60, 0.90, 0.50, 0.20,
           0.30, 0.50, 0.80, 0.40,
           0.10, 0.20, 0.40, 0.70;
  p.n_obs = 25;
  return p;
}

// Dense marginal negative log likelihood of the residuals under
// N(0, C + s2 I), the objective the noise search minimizes.
double dense_nll(const Eigen::MatrixXd& c, const Eigen::VectorXd& r,
                 double s2) {
  Eigen::MatrixXd a = c;
  a.diagonal().array() += s2;
  const Eigen::LLT<Eigen::MatrixXd> llt(a);
  const Eigen::VectorXd alpha = llt.solve(r);
  double logdet = 0.0;
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    logdet += 2.0 * std::log(llt.matrixL()(i, i));
  return 0.5 * r.dot(alpha) + 0.5 * logdet +
         0.5 * static_cast<double>(r.size()) * std::log(2.0 * M_PI);
}

InterventionalDataset toy_trial() {
  InterventionalDataset intv;
  intv.append(0.0, 0.4);
  intv.append(1.0, 0.9);
  intv.append(1.0, 1.1);
  intv.append(3.0, 2.6);
  return intv;
}

}  // namespace

TEST_CASE("baseline names are stable identifiers") {
  CHECK(baseline_name(BaselineMethod::kPriorConditioning) ==
        "prior_conditioning");
  CHECK(baseline_name(BaselineMethod::kAdditiveResidual) ==
        "additive_residual");
  CHECK(baseline_name(BaselineMethod::kInterventionalOnly) ==
        "interventional_only");
  CHECK(baseline_name(BaselineMethod::kObservationalOnly) ==
        "observational_only");
  CHECK(baseline_name(BaselineMethod::kClampedScale) == "clamped_scale");
}

TEST_CASE("conditioning baseline maximizes its marginal likelihood") {
  const DoseResponsePrior prior = toy_prior();
  const InterventionalDataset intv = toy_trial();
  const BaselineFit fit = fit_prior_conditioning(prior, intv);
  const double s2 = fit.hyperparameters.at("sigma_int_sq");
  CHECK(s2 > 0.0);

  // rebuild the sub-covariance and residual the estimator works with
  const Eigen::Index m = intv.m();
  Eigen::MatrixXd c(m, m);
  Eigen::VectorXd r(m);
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < m; ++i) {
    idx.push_back(prior.grid.index_of(intv.x(i)));
    r(i) = intv.y(i) - prior.mu(idx[i]);
  }
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j)
      c(i, j) = prior.cov(idx[i], idx[j]);

  // brute-force scan: the returned noise cannot lose to any grid point
  const double impl_nll = dense_nll(c, r, s2);
  double brute_best = std::numeric_limits<double>::infinity();
  for (int i = 0; i <= 4000; ++i) {
    const double lg = std::log(1e-9) + (std::log(1e3) - std::log(1e-9)) *
                      static_cast<double>(i) / 4000.0;
    brute_best = std::min(brute_best, dense_nll(c, r, std::exp(lg)));
  }
  CHECK(impl_nll <= brute_best + 1e-6);

  // the posterior is the shared conditioning helper at that noise level
  const GaussianConditional want = condition_diagonal(
      prior.mu, prior.cov, idx, Eigen::VectorXd::Ones(m), intv.y,
      Eigen::VectorXd::Constant(m, s2));
  CHECK((fit.mean - want.mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((fit.variance - want.cov.diagonal()).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("conditioning baseline recovers a planted noise level") {
  const DoseResponsePrior prior = toy_prior();
  RandomStream rng(8);
  // data generated exactly from the model: f ~ prior, y = f(x) + noise
  const Eigen::VectorXd f =
      mvn_draw(prior.mu, chol_with_jitter(prior.cov, "toy"), rng);
  InterventionalDataset intv;
  const double sd = 0.3;
  for (int t = 0; t < 4; ++t)
    for (int k = 0; k < 60; ++k)
      intv.append(prior.grid.levels(t), f(t) + sd * rng.normal());
  const BaselineFit fit = fit_prior_conditioning(prior, intv);
  CHECK(fit.hyperparameters.at("sigma_int_sq") ==
        doctest::Approx(sd * sd).epsilon(0.3));
  // with 60 replicates per dose the posterior pins down f itself
  for (int t = 0; t < 4; ++t) {
    CHECK(std::abs(fit.mean(t) - f(t)) < 0.2);
    CHECK(fit.variance(t) < 0.05);
  }
}

TEST_CASE("empty trials leave the prior untouched") {
  const DoseResponsePrior prior = toy_prior();
  InterventionalDataset empty;
  const BaselineFit i = fit_prior_conditioning(prior, empty);
  CHECK(i.mean == prior.mu);
  CHECK(i.variance == prior.cov.diagonal());
  const BaselineFit ii = fit_additive_residual(prior, empty);
  CHECK(ii.mean == prior.mu);
  CHECK(ii.variance == prior.cov.diagonal());
}

TEST_CASE("additive discrepancy never fits worse than pure conditioning") {
  const DoseResponsePrior prior = toy_prior();
  // bias the trial well away from the prior mean so the discrepancy matters
  InterventionalDataset intv;
  RandomStream rng(4);
  for (int t = 0; t < 4; ++t)
    for (int k = 0; k < 6; ++k)
      intv.append(prior.grid.levels(t),
                  prior.mu(t) + 2.0 + 0.4 * prior.grid.levels(t) +
                      0.1 * rng.normal());
  const BaselineFit cond = fit_prior_conditioning(prior, intv);
  const BaselineFit add = fit_additive_residual(prior, intv, 5);

  // conditioning-model marginal at its own fitted noise
  const Eigen::Index m = intv.m();
  Eigen::MatrixXd c(m, m);
  Eigen::VectorXd r(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const Eigen::Index ti = prior.grid.index_of(intv.x(i));
    r(i) = intv.y(i) - prior.mu(ti);
    for (Eigen::Index j = 0; j < m; ++j)
      c(i, j) = prior.cov(ti, prior.grid.index_of(intv.x(j)));
  }
  const double cond_nll =
      dense_nll(c, r, cond.hyperparameters.at("sigma_int_sq"));
  CHECK(add.hyperparameters.at("nll") <= cond_nll + 1e-4);

  // the fitted discrepancy should absorb most of the planted offset
  for (int t = 0; t < 4; ++t) {
    const double target = prior.mu(t) + 2.0 + 0.4 * prior.grid.levels(t);
    CHECK(std::abs(add.mean(t) - target) < 0.35);
    CHECK(std::abs(add.mean(t) - target) <
          std::abs(cond.mean(t) - target) + 0.05);
  }

  SUBCASE("fits are reproducible per seed") {
    const BaselineFit again = fit_additive_residual(prior, intv, 5);
    CHECK(again.mean == add.mean);
    CHECK(again.variance == add.variance);
  }
}

TEST_CASE("zero residuals keep the additive model at the prior mean") {
  const DoseResponsePrior prior = toy_prior();
  InterventionalDataset intv;
  for (int t = 0; t < 4; ++t) intv.append(prior.grid.levels(t), prior.mu(t));
  const BaselineFit fit = fit_additive_residual(prior, intv, 1);
  CHECK((fit.mean - prior.mu).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("trial-only regression tracks a clear signal") {
  DoseGrid grid = DoseGrid::even(0.0, 3.0, 4);
  RandomStream rng(12);
  Eigen::VectorXd x(40), y(40);
  for (int i = 0; i < 40; ++i) {
    x(i) = grid.levels(i % 4);
    y(i) = 1.0 + 0.8 * x(i) + 0.05 * rng.normal();
  }
  GpFitOptions opts;
  opts.seed = 3;
  const BaselineFit fit =
      fit_direct_gp(y, x, grid, KernelFamily::kSquaredExponentialArd,
                    BaselineMethod::kInterventionalOnly, opts);
  CHECK(fit.method == BaselineMethod::kInterventionalOnly);
  CHECK_FALSE(fit.collapsed);
  for (int t = 0; t < 4; ++t) {
    CHECK(fit.mean(t) == doctest::Approx(1.0 + 0.8 * grid.levels(t))
                             .epsilon(0.1));
    CHECK(fit.variance(t) < 0.05);
  }
}

TEST_CASE("trial-only regression flags a degenerate collapse") {
  // A tiny trial where every outcome is identical: the marginal likelihood
  // drives both variances toward zero and the fit is a flat curve, which
  // must be flagged rather than silently reported.
  DoseGrid grid = DoseGrid::even(0.0, 3.0, 4);
  Eigen::VectorXd x(4), y = Eigen::VectorXd::Zero(4);
  x << 0.0, 1.0, 2.0, 3.0;
  GpFitOptions opts;
  opts.seed = 3;
  const BaselineFit fit =
      fit_direct_gp(y, x, grid, KernelFamily::kSquaredExponentialArd,
                    BaselineMethod::kInterventionalOnly, opts);
  CHECK(fit.collapsed);
  CHECK(fit.hyperparameters.at("signal_variance") < 1e-4);
}

TEST_CASE("observational regression is plain fit-and-predict") {
  DoseGrid grid = DoseGrid::even(-1.0, 1.0, 5);
  RandomStream rng(6);
  Eigen::VectorXd x(60), y(60);
  for (int i = 0; i < 60; ++i) {
    x(i) = rng.uniform(-1.2, 1.2);
    y(i) = std::sin(2.0 * x(i)) + 0.1 * rng.normal();
  }
  GpFitOptions opts;
  opts.seed = 9;
  const BaselineFit fit =
      fit_direct_gp(y, x, grid, KernelFamily::kMatern32Ard,
                    BaselineMethod::kObservationalOnly, opts);
  const GpPosterior gp = gp_fit_hyperparameters(
      Eigen::MatrixXd(x), y, KernelFamily::kMatern32Ard, opts);
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  gp.predict_joint(grid.levels, mean, cov);
  CHECK(fit.mean == mean);
  CHECK((fit.variance - cov.diagonal().cwiseMax(0.0)).cwiseAbs().maxCoeff() ==
        0.0);
  CHECK(fit.method == BaselineMethod::kObservationalOnly);
}

TEST_CASE("clamped-scale baseline is the pinned-gain sampler") {
  const DoseResponsePrior prior = toy_prior();
  const InterventionalDataset intv = toy_trial();
  McmcOptions opts;
  opts.iterations = 300;
  opts.burn_in = 50;
  opts.thin = 5;
  opts.seed = 44;
  const BaselineFit fit = fit_clamped_scale(prior, intv, opts);
  McmcOptions direct = opts;
  direct.clamp_a = true;
  const McmcSamples samples = run_mcmc(prior, intv, direct);
  const PosteriorSummary s = posterior_summary(samples);
  CHECK(fit.mean == s.mean);
  CHECK(fit.variance == s.variance);
  CHECK(fit.method == BaselineMethod::kClampedScale);
  // the clamp wins even if the caller forgot to set it
  McmcOptions noflag = opts;
  noflag.clamp_a = false;
  const BaselineFit fit2 = fit_clamped_scale(prior, intv, noflag);
  CHECK(fit2.mean == fit.mean);
}
