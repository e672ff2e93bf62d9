#include "dosegp/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "dosegp/errors.hpp"
#include "dosegp/gp.hpp"
#include "dosegp/linalg.hpp"

namespace dosegp {

namespace {

// Covariance of the covariate vector: ones on the diagonal, 0.5 off it.
Eigen::MatrixXd covariate_chol(int p) {
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Constant(p, p, 0.5);
  sigma.diagonal().setOnes();
  return chol_with_jitter(std::move(sigma), "covariate covariance")
      .llt.matrixL();
}

double truncated_unit_normal(RandomStream& rng) {
  for (;;) {
    const double v = rng.normal();
    if (std::abs(v) > 0.2) return v;
  }
}

double polyval(const Eigen::VectorXd& coef, double x) {
  double acc = 0.0;
  for (Eigen::Index i = coef.size() - 1; i >= 0; --i) acc = acc * x + coef(i);
  return acc;
}

}  // namespace

double SyntheticProblem::direct_effect(double x) const {
  const double xh = (x - x_mean_hat) / std::sqrt(x_var_hat);
  return polyval(poly, xh);
}

double SyntheticProblem::true_dose_response(double x) const {
  return direct_effect(x) + expected_f_yz;
}

Eigen::VectorXd SyntheticProblem::true_dose_response(
    const Eigen::VectorXd& x) const {
  Eigen::VectorXd out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out(i) = true_dose_response(x(i));
  return out;
}

Eigen::VectorXd average_ranks(const Eigen::VectorXd& v) {
  const Eigen::Index n = v.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
  Eigen::VectorXd ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && v(order[j + 1]) == v(order[i])) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index k = i; k <= j; ++k) ranks(order[k]) = r;
    i = j + 1;
  }
  return ranks;
}

double spearman(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw InputError("spearman: need two equally sized vectors");
  const Eigen::VectorXd ra = average_ranks(a);
  const Eigen::VectorXd rb = average_ranks(b);
  const double ma = ra.mean(), mb = rb.mean();
  const Eigen::VectorXd da = ra.array() - ma, db = rb.array() - mb;
  const double den = std::sqrt(da.squaredNorm() * db.squaredNorm());
  if (!(den > 0.0)) return 0.0;
  return da.dot(db) / den;
}

double quantile_type7(Eigen::VectorXd values, double q) {
  if (values.size() < 1) throw InputError("quantile: empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw InputError("quantile: q outside [0, 1]");
  std::sort(values.data(), values.data() + values.size());
  const double h = static_cast<double>(values.size() - 1) * q;
  const Eigen::Index lo = static_cast<Eigen::Index>(std::floor(h));
  if (lo + 1 >= values.size()) return values(values.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return values(lo) + frac * (values(lo + 1) - values(lo));
}

std::pair<SyntheticProblem, ObservationalDataset> generate_problem(
    int p, Eigen::Index n, int degree, double alpha, std::uint64_t seed) {
  if (p < 1) throw InputError("generate_problem: need at least one covariate");
  if (n < 3) throw InputError("generate_problem: need at least three rows");
  if (degree < 1) throw InputError("generate_problem: degree must be >= 1");
  if (!(alpha > 0.0 && alpha < 0.5))
    throw InputError("generate_problem: alpha must lie in (0, 0.5)");

  const Eigen::MatrixXd chol_sigma = covariate_chol(p);
  const RandomStream master(seed);

  for (int attempt = 0; attempt <= 100; ++attempt) {
    RandomStream rng = master.child(static_cast<std::uint64_t>(attempt));
    SyntheticProblem prob;
    prob.p = p;
    prob.n = n;
    prob.degree = degree;
    prob.alpha = alpha;
    prob.seed = seed;
    prob.rejections = attempt;

    // Draw order is part of the reproducibility contract: covariates row by
    // row, the p treatment surfaces, the treatment noise fraction and noise,
    // the outcome side, then the direct-effect polynomial.
    Eigen::MatrixXd z(n, p);
    {
      Eigen::VectorXd e(p);
      for (Eigen::Index i = 0; i < n; ++i) {
        for (int j = 0; j < p; ++j) e(j) = rng.normal();
        z.row(i) = (chol_sigma * e).transpose();
      }
    }

    // Treatment surface: sum of p independent GP draws in one covariate
    // each, kernel exp(-(d^2)/4), scaled by 1/sqrt(p).
    prob.f_x_sum = Eigen::VectorXd::Zero(n);
    {
      KernelSpec ks;
      ks.family = KernelFamily::kSquaredExponentialArd;
      ks.lengthscales = Eigen::VectorXd::Constant(1, std::sqrt(2.0));
      ks.signal_variance = 1.0;
      for (int j = 0; j < p; ++j) {
        const Eigen::MatrixXd col = z.col(j);
        const CholResult ch =
            chol_with_jitter(kernel_gram(ks, col), "treatment surface gram");
        Eigen::VectorXd e(n);
        for (Eigen::Index i = 0; i < n; ++i) e(i) = rng.normal();
        prob.f_x_sum += (ch.llt.matrixL() * e) / std::sqrt(
                            static_cast<double>(p));
      }
    }
    const double v_fx = sample_variance(prob.f_x_sum);
    if (!(v_fx > 0.0)) continue;
    prob.noise_frac_x = rng.uniform(0.2, 0.4);
    prob.sigma_x_sq = prob.noise_frac_x * v_fx;
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i)
      x(i) = prob.f_x_sum(i) + std::sqrt(prob.sigma_x_sq) * rng.normal();

    // Outcome side: confounding through one index direction.
    prob.theta.resize(p + 1);
    const double theta_sd = 1.0 / std::sqrt(static_cast<double>(p + 1));
    for (int j = 0; j <= p; ++j) prob.theta(j) = theta_sd * rng.normal();
    prob.beta.resize(3);
    for (int j = 0; j < 3; ++j) prob.beta(j) = truncated_unit_normal(rng);

    Eigen::VectorXd zy =
        Eigen::VectorXd::Constant(n, prob.theta(0)) +
        z * prob.theta.tail(p);
    prob.f_yz.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
      prob.f_yz(i) = prob.beta(2) * zy(i) * zy(i) + prob.beta(1) * zy(i) +
                     prob.beta(0);
    const double v_fyz = sample_variance(prob.f_yz);
    if (!(v_fyz > 0.0)) continue;
    prob.noise_frac_y = rng.uniform(0.2, 0.4);
    prob.sigma_y_sq = prob.noise_frac_y * v_fyz;
    prob.f_yz_noisy.resize(n);
    for (Eigen::Index i = 0; i < n; ++i)
      prob.f_yz_noisy(i) =
          prob.f_yz(i) + std::sqrt(prob.sigma_y_sq) * rng.normal();

    // Direct effect: polynomial in standardized x, rescaled so its realized
    // spread matches the central quantile range of the confounded part.
    prob.range_confounded = quantile_type7(prob.f_yz_noisy, 1.0 - alpha) -
                            quantile_type7(prob.f_yz_noisy, alpha);
    prob.x_mean_hat = sample_mean(x);
    prob.x_var_hat = sample_variance(x);
    if (!(prob.x_var_hat > 0.0)) continue;
    prob.poly_raw.resize(degree + 1);
    for (int j = 0; j <= degree; ++j)
      prob.poly_raw(j) = truncated_unit_normal(rng);
    Eigen::VectorXd direct_raw(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double xh = (x(i) - prob.x_mean_hat) / std::sqrt(prob.x_var_hat);
      direct_raw(i) = polyval(prob.poly_raw, xh);
    }
    prob.range_direct = direct_raw.maxCoeff() - direct_raw.minCoeff();
    if (!(prob.range_direct > 0.0)) continue;
    prob.poly = prob.poly_raw * (prob.range_confounded / prob.range_direct);

    // Keep only models where the treatment actually tracks the confounding.
    prob.rank_correlation = std::abs(spearman(x, prob.f_yz));
    if (prob.rank_correlation < 0.2) continue;

    const Eigen::VectorXd theta_tail = prob.theta.tail(p);
    const double sum_theta = theta_tail.sum();
    const double var_zy =
        0.5 * (theta_tail.squaredNorm() + sum_theta * sum_theta);
    prob.expected_f_yz =
        prob.beta(2) * (prob.theta(0) * prob.theta(0) + var_zy) +
        prob.beta(1) * prob.theta(0) + prob.beta(0);

    ObservationalDataset obs;
    obs.x = x;
    obs.z = z;
    obs.y.resize(n);
    const double scale = prob.range_confounded / prob.range_direct;
    for (Eigen::Index i = 0; i < n; ++i)
      obs.y(i) = scale * direct_raw(i) + prob.f_yz_noisy(i);
    obs.validate();
    return {std::move(prob), std::move(obs)};
  }
  throw GenerationError(
      "generate_problem: over 100 candidate models rejected; the requested "
      "configuration rarely yields treatment/confounding dependence");
}

void sample_interventional(const SyntheticProblem& problem, double x,
                           int replicates, RandomStream& rng,
                           InterventionalDataset& out) {
  if (replicates < 0)
    throw InputError("sample_interventional: negative replicate count");
  const Eigen::MatrixXd chol_sigma = covariate_chol(problem.p);
  Eigen::VectorXd e(problem.p);
  const double fx = problem.direct_effect(x);
  for (int r = 0; r < replicates; ++r) {
    for (int j = 0; j < problem.p; ++j) e(j) = rng.normal();
    const Eigen::VectorXd z = chol_sigma * e;
    const double zy = problem.theta(0) + z.dot(problem.theta.tail(problem.p));
    const double fyz = problem.beta(2) * zy * zy + problem.beta(1) * zy +
                       problem.beta(0);
    const double y =
        fx + fyz + std::sqrt(problem.sigma_y_sq) * rng.normal();
    out.append(x, y);
  }
}

namespace {

// Residualize target on a single covariate with a fixed-hyperparameter GP
// smoother over a strided subsample.
Eigen::VectorXd gp_residuals(const Eigen::VectorXd& covariate,
                             const Eigen::VectorXd& target) {
  const Eigen::Index m = covariate.size();
  KernelSpec ks;
  ks.family = KernelFamily::kSquaredExponentialArd;
  double lsq = m >= 2 ? sample_variance(covariate) : 1.0;
  ks.lengthscales = Eigen::VectorXd::Constant(1, lsq > 0.0 ? std::sqrt(lsq)
                                                           : 1.0);
  double vt = m >= 2 ? sample_variance(target) : 1.0;
  if (!(vt > 0.0)) vt = 1.0;
  ks.signal_variance = vt;
  const GpPosterior gp(ks, 0.1 * vt, covariate, target);
  return target - gp.predict_mean(covariate);
}

}  // namespace

ObservationalDataset drop_confounders(const SyntheticProblem& problem,
                                      const ObservationalDataset& data,
                                      DropMode mode, int k, RandomStream& rng,
                                      std::string* ranking_note) {
  data.validate();
  const int p = static_cast<int>(data.p());
  if (k < 0 || k > p)
    throw InputError("drop_confounders: k must lie in [0, covariate count]");
  if (data.n() != problem.f_yz_noisy.size())
    throw InputError("drop_confounders: dataset does not match the problem");

  std::vector<int> removed;
  std::ostringstream note;
  if (mode == DropMode::kRandom) {
    std::vector<int> pool(p);
    std::iota(pool.begin(), pool.end(), 0);
    for (int j = 0; j < k; ++j) {
      const std::uint64_t pick =
          rng.uniform_index(static_cast<std::uint64_t>(pool.size()));
      removed.push_back(pool[pick]);
      pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(pick));
    }
    std::sort(removed.begin(), removed.end());
    note << "random drop (seeded):";
  } else {
    // Score each covariate by the treatment/confounding dependence it
    // carries: residualize both on the covariate, then rank-correlate.
    const Eigen::Index m = std::min<Eigen::Index>(data.n(), 400);
    std::vector<Eigen::Index> idx(m);
    for (Eigen::Index i = 0; i < m; ++i) idx[i] = i * data.n() / m;
    Eigen::VectorXd xs(m), ys(m);
    for (Eigen::Index i = 0; i < m; ++i) {
      xs(i) = data.x(idx[i]);
      ys(i) = problem.f_yz_noisy(idx[i]);
    }
    std::vector<std::pair<double, int>> scored(p);
    Eigen::VectorXd col(m);
    for (int j = 0; j < p; ++j) {
      for (Eigen::Index i = 0; i < m; ++i) col(i) = data.z(idx[i], j);
      const double score =
          std::abs(spearman(gp_residuals(col, xs), gp_residuals(col, ys)));
      scored[j] = {score, j};
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) {
                       return a.first > b.first;
                     });
    for (int j = 0; j < k; ++j) removed.push_back(scored[j].second);
    std::sort(removed.begin(), removed.end());
    note << "adversarial drop (|spearman| of treatment vs confounding after "
            "per-covariate GP residualization, strided subsample cap 400):";
  }
  for (int j : removed) note << " z" << (j + 1);
  if (ranking_note) *ranking_note = note.str();

  ObservationalDataset out;
  out.y = data.y;
  out.x = data.x;
  out.stratum = data.stratum;
  out.z.resize(data.n(), p - k);
  Eigen::Index c = 0;
  for (int j = 0; j < p; ++j) {
    if (std::find(removed.begin(), removed.end(), j) != removed.end()) continue;
    out.z.col(c++) = data.z.col(j);
  }
  out.validate();
  return out;
}

}  // namespace dosegp
