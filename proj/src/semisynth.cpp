#include "dosegp/semisynth.hpp"

#include <map>

#include "dosegp/errors.hpp"

namespace dosegp {

void SemiSyntheticTruth::validate() const {
  grid.validate();
  if (f.size() != grid.size() || !f.allFinite())
    throw InputError("semisynthetic truth: bad curve");
  if (!(noise_var > 0.0))
    throw InputError("semisynthetic truth: noise variance must be positive");
}

SemiSyntheticTruth fit_semisynthetic_truth(const ObservationalDataset& obs,
                                           const DoseGrid& grid,
                                           const GpFitOptions& opts) {
  obs.validate();
  grid.validate();
  const GpPosterior gp = gp_fit_hyperparameters(
      obs.inputs(), obs.y, KernelFamily::kMatern32Ard, opts);
  const Eigen::Index n = obs.n();
  const Eigen::Index t = grid.size();

  SemiSyntheticTruth truth;
  truth.grid = grid;
  truth.f.resize(t);
  truth.rows = n;
  double spread = 0.0;
  Eigen::MatrixXd pts(n, 1 + obs.p());
  for (Eigen::Index k = 0; k < t; ++k) {
    pts.col(0).setConstant(grid.levels(k));
    if (obs.p() > 0) pts.rightCols(obs.p()) = obs.z;
    const Eigen::VectorXd m = gp.predict_mean(pts);
    truth.f(k) = m.mean();
    spread += n >= 2 ? sample_variance(m) : 0.0;
  }
  spread /= static_cast<double>(t);
  truth.noise_var = spread + gp.noise_variance();
  truth.validate();
  return truth;
}

std::vector<SemiSyntheticTruth> fit_semisynthetic_truth_by_stratum(
    const ObservationalDataset& obs, const DoseGrid& grid,
    Eigen::Index min_rows, const GpFitOptions& opts) {
  obs.validate();
  if (obs.stratum.empty())
    throw InputError("stratified truth: dataset has no stratum labels");
  std::map<int, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < obs.n(); ++i)
    groups[obs.stratum[i]].push_back(i);

  std::vector<SemiSyntheticTruth> out;
  for (const auto& [label, rows] : groups) {
    if (static_cast<Eigen::Index>(rows.size()) < min_rows)
      throw InputError("stratified truth: stratum " + std::to_string(label) +
                       " has " + std::to_string(rows.size()) +
                       " rows, needs " + std::to_string(min_rows));
    ObservationalDataset sub;
    sub.y.resize(rows.size());
    sub.x.resize(rows.size());
    sub.z.resize(rows.size(), obs.p());
    for (size_t i = 0; i < rows.size(); ++i) {
      sub.y(i) = obs.y(rows[i]);
      sub.x(i) = obs.x(rows[i]);
      sub.z.row(i) = obs.z.row(rows[i]);
    }
    SemiSyntheticTruth truth = fit_semisynthetic_truth(sub, grid, opts);
    truth.stratum = label;
    out.push_back(std::move(truth));
  }
  return out;
}

void simulate_trial(const SemiSyntheticTruth& truth, double x, int replicates,
                    RandomStream& rng, InterventionalDataset& out) {
  truth.validate();
  if (replicates < 0) throw InputError("simulate_trial: negative replicates");
  const Eigen::Index t = truth.grid.index_of(x);
  const double sd = std::sqrt(truth.noise_var);
  for (int r = 0; r < replicates; ++r)
    out.append(x, rng.normal(truth.f(t), sd));
}

}  // namespace dosegp
