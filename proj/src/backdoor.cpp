#include "dosegp/backdoor.hpp"

#include <cmath>

#include "dosegp/errors.hpp"

namespace dosegp {

void DoseGrid::validate() const {
  if (levels.size() < 1) throw InputError("dose grid: empty");
  if (!levels.allFinite()) throw InputError("dose grid: non-finite level");
  for (Eigen::Index t = 1; t < levels.size(); ++t)
    if (!(levels(t) > levels(t - 1)))
      throw InputError("dose grid: levels must be strictly increasing");
}

DoseGrid DoseGrid::even(double lo, double hi, Eigen::Index t) {
  if (!(lo < hi)) throw InputError("dose grid: need lo < hi");
  if (t < 2) throw InputError("dose grid: even spacing needs >= 2 levels");
  DoseGrid g;
  g.levels = Eigen::VectorXd::LinSpaced(t, lo, hi);
  g.validate();
  return g;
}

Eigen::Index DoseGrid::index_of(double dose) const {
  validate();
  const double span =
      size() > 1 ? levels(size() - 1) - levels(0) : std::abs(levels(0));
  const double tol = 1e-9 * std::max(1.0, span);
  for (Eigen::Index t = 0; t < size(); ++t)
    if (std::abs(levels(t) - dose) <= tol) return t;
  throw InputError("dose " + std::to_string(dose) + " is not on the grid");
}

void DoseResponsePrior::validate() const {
  grid.validate();
  const Eigen::Index t = grid.size();
  if (mu.size() != t || cov.rows() != t || cov.cols() != t)
    throw InputError("dose-response prior: size mismatch");
  if (!mu.allFinite() || !cov.allFinite())
    throw InputError("dose-response prior: non-finite entries");
  if (!cov.isApprox(cov.transpose(), 1e-10))
    throw InputError("dose-response prior: covariance not symmetric");
}

std::tuple<ObservationalDataset, InterventionalDataset, StandardizeMoments>
standardize(const ObservationalDataset& obs,
            const InterventionalDataset& intv) {
  obs.validate();
  intv.validate();
  StandardizeMoments m;
  m.y_mean = sample_mean(obs.y);
  m.x_mean = sample_mean(obs.x);
  const double vy = obs.n() >= 2 ? sample_variance(obs.y) : 0.0;
  const double vx = obs.n() >= 2 ? sample_variance(obs.x) : 0.0;
  m.y_sd = vy > 0.0 ? std::sqrt(vy) : 1.0;
  m.x_sd = vx > 0.0 ? std::sqrt(vx) : 1.0;

  ObservationalDataset so = obs;
  so.y = (obs.y.array() - m.y_mean) / m.y_sd;
  so.x = (obs.x.array() - m.x_mean) / m.x_sd;
  InterventionalDataset si = intv;
  si.y = (intv.y.array() - m.y_mean) / m.y_sd;
  si.x = (intv.x.array() - m.x_mean) / m.x_sd;
  return {std::move(so), std::move(si), m};
}

DoseResponsePrior build_dose_response_prior(const GpPosterior& model,
                                            const ObservationalDataset& obs,
                                            const DoseGrid& grid,
                                            const PriorBuildOptions& opts) {
  obs.validate();
  grid.validate();
  const Eigen::Index n = obs.n();
  const Eigen::Index t = grid.size();
  const Eigen::Index d = 1 + obs.p();
  if (model.train_inputs().cols() != d)
    throw InputError("prior build: model dimension does not match data");
  const Eigen::Index bs = std::max<Eigen::Index>(1, opts.block_size);
  const Eigen::Index ntrain = model.train_inputs().rows();

  // Peak working set: one train-cross block, one block-pair gram, the
  // (train x grid) sum matrix and the grid x grid output.
  const double peak_bytes =
      8.0 * (static_cast<double>(ntrain) * bs + static_cast<double>(bs) * bs +
             static_cast<double>(ntrain) * t + 2.0 * t * t);
  if (peak_bytes > opts.memory_budget_mb * 1024.0 * 1024.0)
    throw ResourceError(
        "prior build: working set exceeds the memory budget; lower the block "
        "size or raise memory_budget_mb");

  const auto& spec = model.kernel();
  const Eigen::MatrixXd& xtrain = model.train_inputs();

  // Inputs (x_t, z_i) for a covariate block at a fixed dose level.
  const auto make_block = [&](Eigen::Index dose_idx, Eigen::Index i0,
                              Eigen::Index len) {
    Eigen::MatrixXd p(len, d);
    p.col(0).setConstant(grid.levels(dose_idx));
    p.rightCols(d - 1) = obs.z.middleRows(i0, len);
    return p;
  };

  // c(:, t) = sum_i k(X_train, (x_t, z_i))
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(ntrain, t);
  for (Eigen::Index dose = 0; dose < t; ++dose) {
    for (Eigen::Index i0 = 0; i0 < n; i0 += bs) {
      const Eigen::Index len = std::min(bs, n - i0);
      c.col(dose) += kernel_gram(spec, xtrain, make_block(dose, i0, len)) *
                     Eigen::VectorXd::Ones(len);
    }
  }

  // s(t, u) = sum_ij k((x_t, z_i), (x_u, z_j))
  Eigen::MatrixXd s(t, t);
  for (Eigen::Index dose_t = 0; dose_t < t; ++dose_t) {
    for (Eigen::Index dose_u = dose_t; dose_u < t; ++dose_u) {
      double acc = 0.0;
      for (Eigen::Index i0 = 0; i0 < n; i0 += bs) {
        const Eigen::Index li = std::min(bs, n - i0);
        const Eigen::MatrixXd bi = make_block(dose_t, i0, li);
        for (Eigen::Index j0 = 0; j0 < n; j0 += bs) {
          const Eigen::Index lj = std::min(bs, n - j0);
          acc += kernel_gram(spec, bi, make_block(dose_u, j0, lj)).sum();
        }
      }
      s(dose_t, dose_u) = acc;
      s(dose_u, dose_t) = acc;
    }
  }

  const double nn = static_cast<double>(n);
  DoseResponsePrior prior;
  prior.grid = grid;
  prior.mu = c.transpose() * model.alpha() / nn;
  const Eigen::MatrixXd v = model.factor().solve(c);
  prior.cov = (s - c.transpose() * v) / (nn * nn);
  prior.cov = 0.5 * (prior.cov + prior.cov.transpose()).eval();
  prior.n_obs = n;
  prior.moments = opts.moments;

  // The exact average of a valid predictive covariance is PSD; anything
  // beyond round-off level means the blocked accumulation went wrong.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(prior.cov,
                                                     Eigen::EigenvaluesOnly);
  const double lead = eig.eigenvalues().maxCoeff();
  if (eig.eigenvalues().minCoeff() < -1e-8 * std::max(1.0, lead))
    throw NumericalError("prior build: covariance lost positive semidefiniteness");
  prior.validate();
  return prior;
}

}  // namespace dosegp
