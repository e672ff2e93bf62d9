#include "dosegp/affine.hpp"

#include <cmath>

#include "dosegp/errors.hpp"
#include "dosegp/slice.hpp"

namespace dosegp {

namespace {
constexpr double kNugget = 1e-5;
constexpr double kLogScaleVar = 0.5;   // prior variance of log lambda
constexpr double kLogSmoothVar = 0.1;  // prior variance of log sigma
}  // namespace

void AffineHyper::validate() const {
  const double vals[] = {lambda_a, sigma_a, lambda_b, sigma_b, sigma_int_sq};
  for (double v : vals)
    if (!(v > 0.0) || !std::isfinite(v))
      throw InputError("affine hyperparameters must be positive and finite");
}

double log_hyperprior(const AffineHyper& h, double noise_prior_shape,
                      double noise_prior_scale) {
  h.validate();
  double lp = normal_log_density(std::log(h.lambda_a), 0.0, kLogScaleVar) +
              normal_log_density(std::log(h.sigma_a), 0.0, kLogSmoothVar) +
              normal_log_density(std::log(h.lambda_b), 0.0, kLogScaleVar) +
              normal_log_density(std::log(h.sigma_b), 0.0, kLogSmoothVar);
  if (noise_prior_shape > 0.0 && noise_prior_scale > 0.0) {
    // inverse-gamma(a0, b0) density, up to the normalizing constant
    lp += -(noise_prior_shape + 1.0) * std::log(h.sigma_int_sq) -
          noise_prior_scale / h.sigma_int_sq;
  } else {
    lp += -std::log(h.sigma_int_sq);  // Jeffreys
  }
  return lp;
}

AffineGeometry::AffineGeometry(const DoseResponsePrior& prior) {
  prior.validate();
  const Eigen::Index t = prior.grid.size();
  x_hat_.resize(t);
  y_hat_.resize(t);
  v_.resize(t);
  const double x_lo = prior.grid.levels(0);
  const double x_span = prior.grid.levels(t - 1) - x_lo;
  const double mu_lo = prior.mu.minCoeff();
  const double mu_span = prior.mu.maxCoeff() - mu_lo;
  const double var_max = prior.cov.diagonal().maxCoeff();
  for (Eigen::Index i = 0; i < t; ++i) {
    x_hat_(i) = x_span > 0.0 ? (prior.grid.levels(i) - x_lo) / x_span : 0.0;
    y_hat_(i) = mu_span > 0.0 ? (prior.mu(i) - mu_lo) / mu_span : 0.0;
    v_(i) = var_max > 0.0
                ? std::sqrt(std::max(0.0, prior.cov(i, i)) / var_max)
                : 0.0;
  }
}

double AffineGeometry::kernel(Eigen::Index t, Eigen::Index u, double lambda,
                              double sigma) const {
  const double dx = x_hat_(t) - x_hat_(u);
  const double dy = y_hat_(t) - y_hat_(u);
  double k = lambda * v_(t) * v_(u) *
             std::exp(-(dx * dx + dy * dy) / (2.0 * sigma));
  if (t == u) k += kNugget;
  return k;
}

Eigen::MatrixXd AffineGeometry::gram(double lambda, double sigma) const {
  if (!(lambda > 0.0) || !(sigma > 0.0))
    throw InputError("affine kernel: lambda and sigma must be positive");
  const Eigen::Index t = size();
  Eigen::MatrixXd g(t, t);
  for (Eigen::Index i = 0; i < t; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      g(i, j) = kernel(i, j, lambda, sigma);
      g(j, i) = g(i, j);
    }
  return g;
}

DoseData DoseData::collect(const DoseGrid& grid,
                           const InterventionalDataset& intv) {
  intv.validate();
  const Eigen::Index t = grid.size();
  DoseData d;
  d.count = Eigen::VectorXi::Zero(t);
  d.sum_y = Eigen::VectorXd::Zero(t);
  d.sum_y_sq = Eigen::VectorXd::Zero(t);
  for (Eigen::Index i = 0; i < intv.m(); ++i) {
    const Eigen::Index idx = grid.index_of(intv.x(i));
    d.count(idx) += 1;
    d.sum_y(idx) += intv.y(i);
    d.sum_y_sq(idx) += intv.y(i) * intv.y(i);
  }
  d.total = intv.m();
  return d;
}

void McmcState::validate(Eigen::Index grid_size) const {
  if (f_obs.size() != grid_size || a.size() != grid_size ||
      b.size() != grid_size)
    throw InputError("mcmc state: latent size mismatch");
  if (!f_obs.allFinite() || !a.allFinite() || !b.allFinite())
    throw InputError("mcmc state: non-finite latents");
  hyper.validate();
}

void McmcOptions::validate() const {
  if (iterations < 1 || burn_in < 0 || thin < 1)
    throw InputError("mcmc options: bad schedule");
  if (burn_in >= iterations)
    throw InputError("mcmc options: burn-in must leave retained draws");
  if ((iterations - burn_in) / thin < 1)
    throw InputError("mcmc options: thinning leaves no draws");
  if (!(slice_width > 0.0) || slice_max_stepout < 1)
    throw InputError("mcmc options: bad slice settings");
  if (noise_prior_shape < 0.0 || noise_prior_scale < 0.0)
    throw InputError("mcmc options: negative noise prior parameters");
}

Eigen::VectorXd McmcSamples::f_draw(Eigen::Index k) const {
  return a.row(k).cwiseProduct(f_obs.row(k)).transpose() +
         b.row(k).transpose();
}

GaussianConditional condition_diagonal(const Eigen::VectorXd& prior_mean,
                                       const Eigen::MatrixXd& prior_cov,
                                       const std::vector<Eigen::Index>& idx,
                                       const Eigen::VectorXd& h,
                                       const Eigen::VectorXd& obs,
                                       const Eigen::VectorXd& noise_var) {
  const Eigen::Index t = prior_mean.size();
  const Eigen::Index o = static_cast<Eigen::Index>(idx.size());
  if (h.size() != o || obs.size() != o || noise_var.size() != o)
    throw InputError("condition_diagonal: observation size mismatch");
  if (o == 0) return {prior_mean, prior_cov};
  for (Eigen::Index j = 0; j < o; ++j)
    if (!(noise_var(j) > 0.0))
      throw InputError("condition_diagonal: noise variances must be positive");

  // W = K[:, O] H,  S = H K_OO H + R; posterior via the observation-space
  // inverse so only an o x o system is solved.
  Eigen::MatrixXd w(t, o);
  Eigen::MatrixXd s(o, o);
  Eigen::VectorXd hm(o), res(o);
  for (Eigen::Index j = 0; j < o; ++j) {
    w.col(j) = prior_cov.col(idx[j]) * h(j);
    hm(j) = h(j) * prior_mean(idx[j]);
    res(j) = obs(j) - hm(j);
  }
  for (Eigen::Index i = 0; i < o; ++i)
    for (Eigen::Index j = 0; j < o; ++j)
      s(i, j) = h(i) * prior_cov(idx[i], idx[j]) * h(j) +
                (i == j ? noise_var(i) : 0.0);
  const CholResult chol = chol_with_jitter(std::move(s), "gibbs conditional");
  GaussianConditional out;
  out.mean = prior_mean + w * chol.solve(res);
  out.cov = prior_cov - w * chol.solve(w.transpose());
  out.cov = 0.5 * (out.cov + out.cov.transpose()).eval();
  return out;
}

namespace {

struct Occupied {
  std::vector<Eigen::Index> idx;
  Eigen::VectorXd ybar;       // per-dose means
  Eigen::VectorXd noise_var;  // sigma^2 / n_t
};

Occupied occupied_doses(const DoseData& data, double sigma_int_sq) {
  Occupied o;
  for (Eigen::Index t = 0; t < data.count.size(); ++t)
    if (data.count(t) > 0) o.idx.push_back(t);
  const Eigen::Index k = static_cast<Eigen::Index>(o.idx.size());
  o.ybar.resize(k);
  o.noise_var.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index t = o.idx[j];
    o.ybar(j) = data.sum_y(t) / data.count(t);
    o.noise_var(j) = sigma_int_sq / data.count(t);
  }
  return o;
}

double gauss_vector_logpdf(const Eigen::VectorXd& x,
                           const Eigen::VectorXd& mean,
                           const Eigen::MatrixXd& cov) {
  const CholResult chol = chol_with_jitter(cov, "hyper slice target");
  return mvn_log_density(x, mean, chol);
}

}  // namespace

McmcState gibbs_sweep(McmcState state, const DoseResponsePrior& prior,
                      const AffineGeometry& geom, const DoseData& data,
                      const McmcOptions& opts, RandomStream& rng) {
  const Eigen::Index t = prior.grid.size();
  state.validate(t);
  if (data.count.size() != t)
    throw InputError("gibbs: dose data does not match the grid");
  const Occupied occ = occupied_doses(data, state.hyper.sigma_int_sq);
  const Eigen::Index no = static_cast<Eigen::Index>(occ.idx.size());
  Eigen::VectorXd h(no), obs(no);

  // f_obs | a, b, noise: observe ybar_t = a_t f_obs_t + (b_t + noise)
  for (Eigen::Index j = 0; j < no; ++j) {
    h(j) = state.a(occ.idx[j]);
    obs(j) = occ.ybar(j) - state.b(occ.idx[j]);
  }
  {
    const GaussianConditional post = condition_diagonal(
        prior.mu, prior.cov, occ.idx, h, obs, occ.noise_var);
    state.f_obs = mvn_draw(
        post.mean, chol_with_jitter(post.cov, "f_obs conditional"), rng);
  }

  // a | f_obs, b, noise
  if (!opts.clamp_a) {
    const Eigen::MatrixXd ka = geom.gram(state.hyper.lambda_a,
                                         state.hyper.sigma_a);
    for (Eigen::Index j = 0; j < no; ++j) {
      h(j) = state.f_obs(occ.idx[j]);
      obs(j) = occ.ybar(j) - state.b(occ.idx[j]);
    }
    const GaussianConditional post = condition_diagonal(
        Eigen::VectorXd::Ones(t), ka, occ.idx, h, obs, occ.noise_var);
    state.a =
        mvn_draw(post.mean, chol_with_jitter(post.cov, "a conditional"), rng);
  }

  // b | f_obs, a, noise
  {
    const Eigen::MatrixXd kb = geom.gram(state.hyper.lambda_b,
                                         state.hyper.sigma_b);
    for (Eigen::Index j = 0; j < no; ++j) {
      h(j) = 1.0;
      obs(j) = occ.ybar(j) - state.a(occ.idx[j]) * state.f_obs(occ.idx[j]);
    }
    const GaussianConditional post = condition_diagonal(
        Eigen::VectorXd::Zero(t), kb, occ.idx, h, obs, occ.noise_var);
    state.b =
        mvn_draw(post.mean, chol_with_jitter(post.cov, "b conditional"), rng);
  }

  // noise variance: conjugate inverse-gamma update from the residual sum of
  // squares, which per-dose sufficient statistics give exactly.
  if (opts.update_hyperparameters) {
    const Eigen::VectorXd f = state.f();
    double rss = 0.0;
    for (Eigen::Index dose = 0; dose < t; ++dose) {
      if (data.count(dose) == 0) continue;
      rss += data.sum_y_sq(dose) - 2.0 * f(dose) * data.sum_y(dose) +
             static_cast<double>(data.count(dose)) * f(dose) * f(dose);
    }
    rss = std::max(rss, 0.0);
    const double shape =
        opts.noise_prior_shape + 0.5 * static_cast<double>(data.total);
    const double scale = opts.noise_prior_scale + 0.5 * rss;
    if (shape > 0.0 && scale > 0.0)
      state.hyper.sigma_int_sq = rng.inverse_gamma(shape, scale);

    // Kernel hyperparameters of a and b: slice sampling on the log scale.
    const auto slice_update = [&](double current, double log_prior_var,
                                  const Eigen::VectorXd& field,
                                  const Eigen::VectorXd& field_mean,
                                  bool is_lambda, double other) {
      const std::function<double(double)> target = [&](double u) -> double {
        if (std::abs(u) > 30.0) return -std::numeric_limits<double>::infinity();
        const double val = std::exp(u);
        const double lambda = is_lambda ? val : other;
        const double sigma = is_lambda ? other : val;
        try {
          return gauss_vector_logpdf(field, field_mean,
                                     geom.gram(lambda, sigma)) +
                 normal_log_density(u, 0.0, log_prior_var);
        } catch (const NumericalError&) {
          return -std::numeric_limits<double>::infinity();
        }
      };
      return std::exp(slice_sample(target, std::log(current), opts.slice_width,
                                   opts.slice_max_stepout, rng));
    };
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(t);
    const Eigen::VectorXd zeros = Eigen::VectorXd::Zero(t);
    if (!opts.clamp_a) {
      state.hyper.lambda_a = slice_update(state.hyper.lambda_a, kLogScaleVar,
                                          state.a, ones, true,
                                          state.hyper.sigma_a);
      state.hyper.sigma_a = slice_update(state.hyper.sigma_a, kLogSmoothVar,
                                         state.a, ones, false,
                                         state.hyper.lambda_a);
    }
    state.hyper.lambda_b = slice_update(state.hyper.lambda_b, kLogScaleVar,
                                        state.b, zeros, true,
                                        state.hyper.sigma_b);
    state.hyper.sigma_b = slice_update(state.hyper.sigma_b, kLogSmoothVar,
                                       state.b, zeros, false,
                                       state.hyper.lambda_b);
  }
  return state;
}

McmcState gibbs_sweep(McmcState state, const DoseResponsePrior& prior,
                      const InterventionalDataset& intv,
                      const McmcOptions& opts, RandomStream& rng) {
  const AffineGeometry geom(prior);
  const DoseData data = DoseData::collect(prior.grid, intv);
  return gibbs_sweep(std::move(state), prior, geom, data, opts, rng);
}

McmcSamples run_mcmc(const DoseResponsePrior& prior,
                     const InterventionalDataset& intv,
                     const McmcOptions& opts) {
  prior.validate();
  opts.validate();
  const Eigen::Index t = prior.grid.size();
  const AffineGeometry geom(prior);
  const DoseData data = DoseData::collect(prior.grid, intv);

  McmcState state;
  if (opts.init_state) {
    state = *opts.init_state;
    state.validate(t);
  } else {
    state.f_obs = prior.mu;
    state.a = Eigen::VectorXd::Ones(t);
    state.b = Eigen::VectorXd::Zero(t);
    state.hyper = AffineHyper{};
    if (intv.m() >= 2) {
      const double vy = sample_variance(intv.y);
      if (vy > 0.0) state.hyper.sigma_int_sq = vy;
    }
  }

  RandomStream rng = RandomStream(opts.seed).child(0x6d636d63ull);
  const Eigen::Index keep =
      static_cast<Eigen::Index>((opts.iterations - opts.burn_in) / opts.thin);
  McmcSamples out;
  out.f_obs.resize(keep, t);
  out.a.resize(keep, t);
  out.b.resize(keep, t);
  out.hyper.resize(keep, 5);
  out.grid = prior.grid;
  out.seed = opts.seed;
  out.iterations = opts.iterations;
  out.burn_in = opts.burn_in;
  out.thin = opts.thin;

  Eigen::Index stored = 0;
  for (int it = 1; it <= opts.iterations; ++it) {
    try {
      state = gibbs_sweep(std::move(state), prior, geom, data, opts, rng);
    } catch (const NumericalError& e) {
      throw NumericalError("mcmc sweep " + std::to_string(it) + ": " +
                           e.what());
    }
    if (it > opts.burn_in && (it - opts.burn_in) % opts.thin == 0 &&
        stored < keep) {
      out.f_obs.row(stored) = state.f_obs.transpose();
      out.a.row(stored) = state.a.transpose();
      out.b.row(stored) = state.b.transpose();
      out.hyper(stored, 0) = state.hyper.lambda_a;
      out.hyper(stored, 1) = state.hyper.sigma_a;
      out.hyper(stored, 2) = state.hyper.lambda_b;
      out.hyper(stored, 3) = state.hyper.sigma_b;
      out.hyper(stored, 4) = state.hyper.sigma_int_sq;
      ++stored;
    }
  }
  return out;
}

PosteriorSummary posterior_summary(const McmcSamples& samples) {
  const Eigen::Index k = samples.num_draws();
  if (k < 2)
    throw InputError("posterior summary: needs at least two draws");
  const Eigen::Index t = samples.f_obs.cols();
  Eigen::MatrixXd f(k, t);
  for (Eigen::Index i = 0; i < k; ++i) f.row(i) = samples.f_draw(i).transpose();
  PosteriorSummary s;
  s.mean = f.colwise().mean();
  s.variance.resize(t);
  for (Eigen::Index j = 0; j < t; ++j)
    s.variance(j) = sample_variance(f.col(j));
  return s;
}

}  // namespace dosegp
