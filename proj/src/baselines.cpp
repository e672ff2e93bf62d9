#include "dosegp/baselines.hpp"

#include <cmath>

#include "dosegp/errors.hpp"
#include "dosegp/lbfgs.hpp"

namespace dosegp {

std::string baseline_name(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::kPriorConditioning: return "prior_conditioning";
    case BaselineMethod::kAdditiveResidual: return "additive_residual";
    case BaselineMethod::kInterventionalOnly: return "interventional_only";
    case BaselineMethod::kObservationalOnly: return "observational_only";
    case BaselineMethod::kClampedScale: return "clamped_scale";
  }
  throw InputError("unknown baseline method");
}

namespace {

std::vector<Eigen::Index> dose_indices(const DoseGrid& grid,
                                       const InterventionalDataset& intv) {
  std::vector<Eigen::Index> idx(intv.m());
  for (Eigen::Index i = 0; i < intv.m(); ++i)
    idx[i] = grid.index_of(intv.x(i));
  return idx;
}

double fallback_variance(const Eigen::VectorXd& y) {
  if (y.size() >= 2) {
    const double v = sample_variance(y);
    if (v > 0.0) return v;
  }
  return 1.0;
}

// Marginal likelihood of y under N(mu_rows, C + s2 I) as a function of s2,
// through the eigendecomposition of C; dense log-scan plus golden-section
// polish, robust to the occasional extra local dip.
double noise_by_marginal_likelihood(const Eigen::MatrixXd& c,
                                    const Eigen::VectorXd& resid) {
  const Eigen::Index m = resid.size();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.info() != Eigen::Success)
    throw NumericalError("noise estimate: eigendecomposition failed");
  const Eigen::VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
  const Eigen::VectorXd w2 =
      (eig.eigenvectors().transpose() * resid).array().square();
  const auto nll = [&](double log_s2) {
    const double s2 = std::exp(log_s2);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
      const double d = lam(i) + s2;
      acc += w2(i) / d + std::log(d);
    }
    return 0.5 * acc;
  };
  const double vy = fallback_variance(resid);
  const double lo = std::log(1e-10 * vy), hi = std::log(1e4 * vy);
  const int steps = 800;
  double best = lo, best_val = nll(lo);
  for (int i = 1; i <= steps; ++i) {
    const double u = lo + (hi - lo) * i / steps;
    const double v = nll(u);
    if (v < best_val) {
      best_val = v;
      best = u;
    }
  }
  double a = std::max(lo, best - (hi - lo) / steps);
  double b = std::min(hi, best + (hi - lo) / steps);
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
  double f1 = nll(c1), f2 = nll(c2);
  for (int it = 0; it < 200 && b - a > 1e-12; ++it) {
    if (f1 < f2) {
      b = c2; c2 = c1; f2 = f1;
      c1 = b - gr * (b - a); f1 = nll(c1);
    } else {
      a = c1; c1 = c2; f1 = f2;
      c2 = a + gr * (b - a); f2 = nll(c2);
    }
  }
  return std::exp(0.5 * (a + b));
}

BaselineFit prior_only(const DoseResponsePrior& prior, BaselineMethod tag) {
  BaselineFit fit;
  fit.method = tag;
  fit.mean = prior.mu;
  fit.variance = prior.cov.diagonal();
  return fit;
}

}  // namespace

BaselineFit fit_prior_conditioning(const DoseResponsePrior& prior,
                                   const InterventionalDataset& intv) {
  prior.validate();
  intv.validate();
  if (intv.m() == 0)
    return prior_only(prior, BaselineMethod::kPriorConditioning);
  const auto idx = dose_indices(prior.grid, intv);

  Eigen::MatrixXd c(intv.m(), intv.m());
  Eigen::VectorXd resid(intv.m());
  for (Eigen::Index i = 0; i < intv.m(); ++i) {
    resid(i) = intv.y(i) - prior.mu(idx[i]);
    for (Eigen::Index j = 0; j < intv.m(); ++j)
      c(i, j) = prior.cov(idx[i], idx[j]);
  }
  const double s2 = noise_by_marginal_likelihood(c, resid);

  const GaussianConditional post = condition_diagonal(
      prior.mu, prior.cov, idx, Eigen::VectorXd::Ones(intv.m()), intv.y,
      Eigen::VectorXd::Constant(intv.m(), s2));
  BaselineFit fit;
  fit.method = BaselineMethod::kPriorConditioning;
  fit.mean = post.mean;
  fit.variance = post.cov.diagonal().cwiseMax(0.0);
  fit.hyperparameters["sigma_int_sq"] = s2;
  return fit;
}

BaselineFit fit_additive_residual(const DoseResponsePrior& prior,
                                  const InterventionalDataset& intv,
                                  std::uint64_t seed) {
  prior.validate();
  intv.validate();
  if (intv.m() == 0)
    return prior_only(prior, BaselineMethod::kAdditiveResidual);
  const Eigen::Index m = intv.m();
  const auto idx = dose_indices(prior.grid, intv);

  Eigen::MatrixXd c0(m, m);
  Eigen::VectorXd resid(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    resid(i) = intv.y(i) - prior.mu(idx[i]);
    for (Eigen::Index j = 0; j < m; ++j)
      c0(i, j) = prior.cov(idx[i], idx[j]);
  }
  const Eigen::MatrixXd doses = intv.x;
  const double vy = fallback_variance(intv.y);
  const double span = std::max(prior.grid.levels(prior.grid.size() - 1) -
                                   prior.grid.levels(0),
                               1e-6);

  // theta = (log l, log s2, log noise); the discrepancy is a squared
  // exponential in the dose.
  const ObjectiveFn objective = [&](const Eigen::VectorXd& theta,
                                    Eigen::VectorXd& grad) -> double {
    grad = Eigen::VectorXd::Zero(3);
    if (theta.cwiseAbs().maxCoeff() > 30.0)
      return std::numeric_limits<double>::infinity();
    KernelSpec ks;
    ks.family = KernelFamily::kSquaredExponentialArd;
    ks.lengthscales = Eigen::VectorXd::Constant(1, std::exp(theta(0)));
    ks.signal_variance = std::exp(theta(1));
    const double s2 = std::exp(theta(2));
    try {
      const Eigen::MatrixXd q = scaled_sqdist(ks.lengthscales, doses, doses);
      const Eigen::MatrixXd r =
          ks.signal_variance * (-0.5 * q.array()).exp().matrix();
      Eigen::MatrixXd a = c0 + r;
      a.diagonal().array() += s2;
      const CholResult chol = chol_with_jitter(a, "residual marginal");
      const Eigen::VectorXd alpha = chol.solve(resid);
      const double nll = 0.5 * resid.dot(alpha) + 0.5 * chol.log_det() +
                         0.5 * static_cast<double>(m) * std::log(2.0 * M_PI);
      const Eigen::MatrixXd g =
          chol.solve(Eigen::MatrixXd::Identity(m, m)) -
          alpha * alpha.transpose();
      grad(0) = 0.5 * g.cwiseProduct(r.cwiseProduct(q)).sum();
      grad(1) = 0.5 * g.cwiseProduct(r).sum();
      grad(2) = 0.5 * s2 * g.trace();
      return nll;
    } catch (const NumericalError&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  // Start nested inside the pure conditioning model (vanishing discrepancy
  // amplitude, its estimated noise), so the optimum can only improve on it.
  const BaselineFit base = fit_prior_conditioning(prior, intv);
  const double base_s2 = base.hyperparameters.at("sigma_int_sq");
  std::vector<Eigen::VectorXd> starts;
  {
    Eigen::VectorXd t0(3);
    t0 << std::log(0.5 * span), std::log(1e-12 * vy), std::log(base_s2);
    starts.push_back(t0);
  }
  RandomStream stream = RandomStream(seed).child(0x6164ull);
  for (int r = 1; r <= 3; ++r) {
    RandomStream s = stream.child(static_cast<std::uint64_t>(r));
    Eigen::VectorXd t(3);
    t << std::log(span * s.uniform(0.05, 2.0)),
        std::log(vy * s.uniform(0.01, 1.0)),
        std::log(vy * s.uniform(0.01, 1.0));
    starts.push_back(t);
  }
  LbfgsOptions lopts;
  lopts.max_iterations = 200;
  bool have_best = false;
  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_theta;
  for (const auto& t0 : starts) {
    Eigen::VectorXd g(3);
    if (!std::isfinite(objective(t0, g))) continue;
    try {
      const LbfgsResult lr = lbfgs_minimize(objective, t0, lopts);
      if (std::isfinite(lr.fx) && (!have_best || lr.fx < best_val)) {
        have_best = true;
        best_val = lr.fx;
        best_theta = lr.x;
      }
    } catch (const NumericalError&) {
    }
  }
  if (!have_best)
    throw NumericalError("additive residual: every start failed");

  KernelSpec ks;
  ks.family = KernelFamily::kSquaredExponentialArd;
  ks.lengthscales = Eigen::VectorXd::Constant(1, std::exp(best_theta(0)));
  ks.signal_variance = std::exp(best_theta(1));
  const double s2 = std::exp(best_theta(2));

  // Joint posterior of f = f_obs + discrepancy on the grid.
  const Eigen::MatrixXd grid_x = prior.grid.levels;
  const Eigen::MatrixXd s_grid = prior.cov + kernel_gram(ks, grid_x);
  Eigen::MatrixXd a(m, m);
  {
    const Eigen::MatrixXd q = scaled_sqdist(ks.lengthscales, doses, doses);
    a = c0 + ks.signal_variance * (-0.5 * q.array()).exp().matrix();
    a.diagonal().array() += s2;
  }
  const CholResult chol = chol_with_jitter(a, "residual predictive");
  Eigen::MatrixXd w(prior.grid.size(), m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index t = 0; t < prior.grid.size(); ++t)
      w(t, i) = prior.cov(t, idx[i]) +
                kernel_eval(ks, grid_x.row(t), doses.row(i));
  const Eigen::VectorXd alpha = chol.solve(resid);
  BaselineFit fit;
  fit.method = BaselineMethod::kAdditiveResidual;
  fit.mean = prior.mu + w * alpha;
  const Eigen::MatrixXd cov = s_grid - w * chol.solve(w.transpose());
  fit.variance = cov.diagonal().cwiseMax(0.0);
  fit.hyperparameters["lengthscale"] = ks.lengthscales(0);
  fit.hyperparameters["signal_variance"] = ks.signal_variance;
  fit.hyperparameters["sigma_int_sq"] = s2;
  fit.hyperparameters["nll"] = best_val;
  return fit;
}

BaselineFit fit_direct_gp(const Eigen::VectorXd& y, const Eigen::VectorXd& x,
                          const DoseGrid& grid, KernelFamily family,
                          BaselineMethod tag, const GpFitOptions& opts) {
  if (y.size() == 0) throw InputError("direct gp: no rows");
  grid.validate();
  const Eigen::MatrixXd xin = x;
  const GpPosterior gp = gp_fit_hyperparameters(xin, y, family, opts);
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  gp.predict_joint(grid.levels, mean, cov);
  BaselineFit fit;
  fit.method = tag;
  fit.mean = mean;
  fit.variance = cov.diagonal().cwiseMax(0.0);
  fit.hyperparameters["signal_variance"] = gp.kernel().signal_variance;
  fit.hyperparameters["lengthscale"] = gp.kernel().lengthscales(0);
  fit.hyperparameters["sigma_int_sq"] = gp.noise_variance();
  fit.collapsed =
      gp.kernel().signal_variance < 1e-4 * std::max(fallback_variance(y), 1e-12);
  return fit;
}

BaselineFit fit_clamped_scale(const DoseResponsePrior& prior,
                              const InterventionalDataset& intv,
                              const McmcOptions& opts) {
  McmcOptions o = opts;
  o.clamp_a = true;
  const McmcSamples samples = run_mcmc(prior, intv, o);
  const PosteriorSummary s = posterior_summary(samples);
  BaselineFit fit;
  fit.method = BaselineMethod::kClampedScale;
  fit.mean = s.mean;
  fit.variance = s.variance;
  fit.hyperparameters["lambda_b"] = samples.hyper.col(2).mean();
  fit.hyperparameters["sigma_b"] = samples.hyper.col(3).mean();
  fit.hyperparameters["sigma_int_sq"] = samples.hyper.col(4).mean();
  return fit;
}

}  // namespace dosegp
