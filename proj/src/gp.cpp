#include "dosegp/gp.hpp"

#include <cmath>

#include "dosegp/dataset.hpp"
#include "dosegp/errors.hpp"
#include "dosegp/lbfgs.hpp"
#include "dosegp/rng.hpp"

namespace dosegp {

GpPosterior::GpPosterior(KernelSpec kernel, double noise_variance,
                         Eigen::MatrixXd x, Eigen::VectorXd y)
    : kernel_(std::move(kernel)),
      noise_variance_(noise_variance),
      x_(std::move(x)),
      y_(std::move(y)) {
  kernel_.validate(x_.cols());
  if (x_.rows() != y_.size() || x_.rows() < 1)
    throw InputError("gp: input/target size mismatch");
  if (!(noise_variance_ > 0.0) || !std::isfinite(noise_variance_))
    throw InputError("gp: noise variance must be positive and finite");
  Eigen::MatrixXd a = kernel_gram(kernel_, x_);
  a.diagonal().array() += noise_variance_;
  chol_ = chol_with_jitter(std::move(a), "gp training covariance");
  alpha_ = chol_.solve(y_);
}

void GpPosterior::predict_joint(const Eigen::MatrixXd& xstar,
                                Eigen::VectorXd& mean,
                                Eigen::MatrixXd& cov) const {
  if (xstar.cols() != x_.cols())
    throw InputError("gp predict: query dimension mismatch");
  const Eigen::MatrixXd ks = kernel_gram(kernel_, x_, xstar);  // n x t
  mean = ks.transpose() * alpha_;
  const Eigen::MatrixXd kss = kernel_gram(kernel_, xstar);
  const Eigen::MatrixXd v = chol_.solve(ks);
  cov = kss - ks.transpose() * v;
  cov = 0.5 * (cov + cov.transpose()).eval();
}

Eigen::VectorXd GpPosterior::predict_mean(const Eigen::MatrixXd& xstar) const {
  if (xstar.cols() != x_.cols())
    throw InputError("gp predict: query dimension mismatch");
  return kernel_gram(kernel_, x_, xstar).transpose() * alpha_;
}

NllResult gp_negative_log_likelihood(const KernelSpec& kernel,
                                     double noise_variance,
                                     const Eigen::MatrixXd& x,
                                     const Eigen::VectorXd& y,
                                     bool with_gradient) {
  kernel.validate(x.cols());
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  Eigen::MatrixXd sq = scaled_sqdist(kernel.lengthscales, x, x);
  sq.diagonal().setZero();
  sq = 0.5 * (sq + sq.transpose()).eval();
  Eigen::MatrixXd k(n, n);
  if (kernel.family == KernelFamily::kMatern32Ard) {
    const double s3 = std::sqrt(3.0);
    k = kernel.signal_variance *
        ((1.0 + s3 * sq.array().sqrt()) * (-s3 * sq.array().sqrt()).exp());
  } else {
    k = kernel.signal_variance * (-0.5 * sq.array()).exp();
  }
  Eigen::MatrixXd a = k;
  a.diagonal().array() += noise_variance;
  const CholResult chol = chol_with_jitter(a, "gp marginal likelihood");
  const Eigen::VectorXd alpha = chol.solve(y);

  NllResult res;
  res.value = 0.5 * y.dot(alpha) + 0.5 * chol.log_det() +
              0.5 * static_cast<double>(n) * std::log(2.0 * M_PI);
  if (!with_gradient) return res;

  // dNLL/dtheta = 0.5 <G, dA/dtheta> with G = A^-1 - alpha alpha'.
  Eigen::MatrixXd g =
      chol.solve(Eigen::MatrixXd::Identity(n, n)) - alpha * alpha.transpose();
  res.gradient.resize(d + 2);
  const Eigen::MatrixXd scale = lengthscale_grad_scale(kernel, k, sq);
  // M = G .* scale; then <G, dA/d log l_j> = sum_ij M_ij ((x_ij)/l_j)^2,
  // expanded as 2 (rowsum(M) . u^2) - 2 u' M u for symmetric M.
  const Eigen::MatrixXd m = g.cwiseProduct(scale);
  const Eigen::VectorXd mrow = m.rowwise().sum();
  for (Eigen::Index j = 0; j < d; ++j) {
    const Eigen::VectorXd u = x.col(j) / kernel.lengthscales(j);
    const Eigen::VectorXd u2 = u.array().square();
    const double term = 2.0 * mrow.dot(u2) - 2.0 * u.dot(m * u);
    res.gradient(j) = 0.5 * term;
  }
  res.gradient(d) = 0.5 * g.cwiseProduct(k).sum();
  res.gradient(d + 1) = 0.5 * noise_variance * g.trace();
  return res;
}

namespace {

Eigen::VectorXd default_log_params(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y) {
  const Eigen::Index d = x.cols();
  Eigen::VectorXd theta(d + 2);
  for (Eigen::Index j = 0; j < d; ++j) {
    double sd = 1.0;
    if (x.rows() >= 2) {
      const double v = sample_variance(x.col(j));
      if (v > 0.0) sd = std::sqrt(v);
    }
    theta(j) = std::log(sd);
  }
  double vy = 1.0;
  if (y.size() >= 2) {
    const double v = sample_variance(y);
    if (v > 0.0) vy = v;
  }
  theta(d) = std::log(vy);
  theta(d + 1) = std::log(0.1 * vy);
  return theta;
}

KernelSpec unpack_kernel(const Eigen::VectorXd& theta, Eigen::Index d,
                         KernelFamily family) {
  KernelSpec k;
  k.family = family;
  k.lengthscales = theta.head(d).array().exp();
  k.signal_variance = std::exp(theta(d));
  return k;
}

}  // namespace

GpPosterior gp_fit_hyperparameters(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y,
                                   KernelFamily family,
                                   const GpFitOptions& opts) {
  if (x.rows() != y.size() || x.rows() < 1)
    throw InputError("gp fit: input/target size mismatch");
  if (opts.restarts < 1) throw InputError("gp fit: needs at least one restart");
  const Eigen::Index d = x.cols();

  const ObjectiveFn objective = [&](const Eigen::VectorXd& theta,
                                    Eigen::VectorXd& grad) -> double {
    // Guard the optimizer out of regions where exp() overflows.
    if (theta.cwiseAbs().maxCoeff() > 30.0) {
      grad = Eigen::VectorXd::Zero(theta.size());
      return std::numeric_limits<double>::infinity();
    }
    try {
      const NllResult r = gp_negative_log_likelihood(
          unpack_kernel(theta, d, family), std::exp(theta(d + 1)), x, y, true);
      grad = r.gradient;
      return r.value;
    } catch (const NumericalError&) {
      grad = Eigen::VectorXd::Zero(theta.size());
      return std::numeric_limits<double>::infinity();
    }
  };

  const Eigen::VectorXd theta0 = default_log_params(x, y);
  RandomStream stream = RandomStream(opts.seed).child(0x6f70ull);

  LbfgsOptions lopts;
  lopts.max_iterations = opts.max_iterations;
  lopts.gradient_tolerance = opts.gradient_tolerance;

  bool have_best = false;
  double best_val = std::numeric_limits<double>::infinity();
  Eigen::VectorXd best_theta;
  const double lo = std::log(1e-2), hi = std::log(1e2);
  for (int r = 0; r < opts.restarts; ++r) {
    Eigen::VectorXd init = theta0;
    if (r > 0) {
      RandomStream s = stream.child(static_cast<std::uint64_t>(r));
      for (Eigen::Index j = 0; j < init.size(); ++j)
        init(j) += s.uniform(lo, hi);
    }
    Eigen::VectorXd g(init.size());
    if (!std::isfinite(objective(init, g))) continue;
    try {
      const LbfgsResult lr = lbfgs_minimize(objective, init, lopts);
      if (std::isfinite(lr.fx) && (!have_best || lr.fx < best_val)) {
        have_best = true;
        best_val = lr.fx;
        best_theta = lr.x;
      }
    } catch (const NumericalError&) {
      // this restart diverged; others may still succeed
    }
  }
  if (!have_best)
    throw NumericalError("gp fit: all restarts failed to produce a finite optimum");
  return GpPosterior(unpack_kernel(best_theta, d, family),
                     std::exp(best_theta(d + 1)), x, y);
}

}  // namespace dosegp
