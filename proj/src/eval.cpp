#include "dosegp/eval.hpp"

#include <atomic>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <sstream>
#include <thread>

#include "dosegp/baselines.hpp"
#include "dosegp/errors.hpp"

namespace dosegp {

double normalized_abs_error(const Eigen::VectorXd& estimate,
                            const Eigen::VectorXd& truth) {
  if (estimate.size() != truth.size() || truth.size() < 1)
    throw InputError("normalized error: size mismatch");
  const double span = truth.maxCoeff() - truth.minCoeff();
  if (!(span > 0.0))
    throw InputError("normalized error: flat truth leaves the metric undefined");
  return (estimate - truth).cwiseAbs().mean() / span;
}

double avg_posterior_log_density(const Eigen::VectorXd& mean,
                                 const Eigen::VectorXd& variance,
                                 const Eigen::VectorXd& truth) {
  if (mean.size() != truth.size() || variance.size() != truth.size() ||
      truth.size() < 1)
    throw InputError("log density metric: size mismatch");
  double acc = 0.0;
  for (Eigen::Index t = 0; t < truth.size(); ++t) {
    // A collapsed posterior gets an honestly terrible score instead of a
    // crash; such rows fall to the exclusion rule downstream.
    const double v = std::max(variance(t), 1e-300);
    acc += normal_log_density(truth(t), mean(t), v);
  }
  return acc / static_cast<double>(truth.size());
}

PairedTTest paired_t_test(const std::vector<double>& diffs) {
  PairedTTest res;
  res.n = static_cast<int>(diffs.size());
  if (res.n < 2) {
    res.mean_diff = res.n == 1 ? diffs[0] : 0.0;
    res.p = std::numeric_limits<double>::quiet_NaN();
    return res;
  }
  Eigen::Map<const Eigen::VectorXd> d(diffs.data(), res.n);
  res.mean_diff = d.mean();
  const double sd = std::sqrt(sample_variance(d));
  if (!(sd > 0.0)) {
    res.t = res.mean_diff == 0.0 ? 0.0
                                 : std::copysign(
                                       std::numeric_limits<double>::infinity(),
                                       res.mean_diff);
    res.p = res.mean_diff == 0.0 ? 1.0 : 0.0;
  } else {
    res.t = res.mean_diff / (sd / std::sqrt(static_cast<double>(res.n)));
    const boost::math::students_t dist(static_cast<double>(res.n - 1));
    res.p = 2.0 * boost::math::cdf(boost::math::complement(dist,
                                                           std::abs(res.t)));
  }
  res.significant = res.p < 0.05;
  return res;
}

std::string StudyCell::label() const {
  std::ostringstream s;
  s << (degree == 2 ? "Q" : degree == 3 ? "C" : "D" + std::to_string(degree));
  s << static_cast<int>(std::lround((1.0 - 2.0 * alpha) * 100)) << "%";
  s << (drop == DropMode::kRandom ? "Random" : "Adversarial");
  s << "M" << m_int;
  return s.str();
}

StudyConfig StudyConfig::desk_default() {
  StudyConfig c;
  c.cells = {StudyCell{2, 0.25, DropMode::kRandom, 40}};
  c.n_obs = 300;
  c.p = 10;
  c.drop_count = 6;
  c.grid_size = 20;
  c.replications = 20;
  return c;
}

StudyConfig StudyConfig::paper_default() {
  StudyConfig c;
  for (int degree : {2, 3})
    for (double alpha : {0.25, 0.10})
      for (DropMode drop : {DropMode::kRandom, DropMode::kAdversarial})
        for (int m : {40, 200})
          c.cells.push_back(StudyCell{degree, alpha, drop, m});
  c.n_obs = 1000;
  c.p = 25;
  c.drop_count = 10;
  c.grid_size = 20;
  c.replications = 50;
  return c;
}

void StudyConfig::validate() const {
  if (cells.empty()) throw InputError("study: no cells configured");
  for (const auto& cell : cells) {
    if (cell.degree < 1) throw InputError("study: bad polynomial degree");
    if (!(cell.alpha > 0.0 && cell.alpha < 0.5))
      throw InputError("study: alpha must lie in (0, 0.5)");
    if (cell.m_int < 0) throw InputError("study: negative trial size");
  }
  if (n_obs < 3 || p < 1 || grid_size < 2 || replications < 1 || threads < 1)
    throw InputError("study: bad dimensions");
  if (drop_count < 0 || drop_count > p)
    throw InputError("study: drop count outside [0, p]");
  mcmc.validate();
}

ReplicationRecord run_replication(const StudyConfig& cfg, int cell_idx,
                                  int rep) {
  const StudyCell& cell = cfg.cells.at(cell_idx);
  ReplicationRecord rec;
  rec.cell = cell_idx;
  rec.rep = rep;
  const RandomStream rs = RandomStream(cfg.seed)
                              .child(static_cast<std::uint64_t>(cell_idx))
                              .child(static_cast<std::uint64_t>(rep));

  auto [problem, obs_full] = generate_problem(
      cfg.p, cfg.n_obs, cell.degree, cell.alpha, rs.child(0).seed());
  RandomStream drop_rng = rs.child(1);
  const ObservationalDataset obs = drop_confounders(
      problem, obs_full, cell.drop, cfg.drop_count, drop_rng);

  const DoseGrid grid =
      DoseGrid::even(obs.x.minCoeff(), obs.x.maxCoeff(), cfg.grid_size);
  InterventionalDataset trial;
  {
    RandomStream trial_rng = rs.child(2);
    const int base = cell.m_int / static_cast<int>(grid.size());
    const int extra = cell.m_int % static_cast<int>(grid.size());
    for (Eigen::Index t = 0; t < grid.size(); ++t)
      sample_interventional(problem, grid.levels(t),
                            base + (t < extra ? 1 : 0), trial_rng, trial);
  }

  auto [sobs, strial, moments] = standardize(obs, trial);
  DoseGrid sgrid;
  sgrid.levels =
      (grid.levels.array() - moments.x_mean) / moments.x_sd;
  sgrid.validate();

  GpFitOptions fit_opts = cfg.gp_fit;
  fit_opts.seed = rs.child(3).seed();
  const GpPosterior model = gp_fit_hyperparameters(
      sobs.inputs(), sobs.y, KernelFamily::kMatern32Ard, fit_opts);
  PriorBuildOptions build_opts = cfg.prior_build;
  build_opts.moments = moments;
  const DoseResponsePrior prior =
      build_dose_response_prior(model, sobs, sgrid, build_opts);

  McmcOptions mcmc_opts = cfg.mcmc;
  mcmc_opts.seed = rs.child(4).seed();
  const PosteriorSummary ours =
      posterior_summary(run_mcmc(prior, strial, mcmc_opts));

  const Eigen::VectorXd truth_std =
      (problem.true_dose_response(grid.levels).array() - moments.y_mean) /
      moments.y_sd;

  const auto score = [&](const std::string& key, const Eigen::VectorXd& mean,
                         const Eigen::VectorXd& variance) {
    rec.e[key] = normalized_abs_error(mean, truth_std);
    rec.l[key] = avg_posterior_log_density(mean, variance, truth_std);
  };
  score("ours", ours.mean, ours.variance);

  const BaselineFit bi = fit_prior_conditioning(prior, strial);
  score(baseline_name(bi.method), bi.mean, bi.variance);
  const BaselineFit bii =
      fit_additive_residual(prior, strial, rs.child(5).seed());
  score(baseline_name(bii.method), bii.mean, bii.variance);
  GpFitOptions o3 = cfg.gp_fit;
  o3.seed = rs.child(6).seed();
  const BaselineFit biii = fit_direct_gp(
      strial.y, strial.x, sgrid, KernelFamily::kSquaredExponentialArd,
      BaselineMethod::kInterventionalOnly, o3);
  score(baseline_name(biii.method), biii.mean, biii.variance);
  rec.interventional_collapsed = biii.collapsed;
  GpFitOptions o4 = cfg.gp_fit;
  o4.seed = rs.child(7).seed();
  const BaselineFit biv =
      fit_direct_gp(sobs.y, sobs.x, sgrid, KernelFamily::kMatern32Ard,
                    BaselineMethod::kObservationalOnly, o4);
  score(baseline_name(biv.method), biv.mean, biv.variance);
  if (cfg.run_clamped_scale) {
    McmcOptions vo = cfg.mcmc;
    vo.seed = rs.child(8).seed();
    const BaselineFit bv = fit_clamped_scale(prior, strial, vo);
    score(baseline_name(bv.method), bv.mean, bv.variance);
  }
  return rec;
}

StudyResult run_study(const StudyConfig& cfg) {
  cfg.validate();
  StudyResult out;
  out.config = cfg;
  const int cells = static_cast<int>(cfg.cells.size());
  const int total = cells * cfg.replications;
  out.replications.resize(total);

  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (;;) {
      const int k = next.fetch_add(1);
      if (k >= total) return;
      const int cell = k / cfg.replications;
      const int rep = k % cfg.replications;
      try {
        out.replications[k] = run_replication(cfg, cell, rep);
      } catch (const std::exception& e) {
        ReplicationRecord rec;
        rec.cell = cell;
        rec.rep = rep;
        rec.failed = true;
        rec.error = e.what();
        out.replications[k] = rec;
      }
    }
  };
  if (cfg.threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < cfg.threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (int c = 0; c < cells; ++c) {
    CellSummary cs;
    cs.cell = cfg.cells[c];
    std::vector<const ReplicationRecord*> ok;
    for (int r = 0; r < cfg.replications; ++r) {
      const ReplicationRecord& rec = out.replications[c * cfg.replications + r];
      if (rec.failed) {
        ++cs.failed;
        continue;
      }
      ++cs.completed;
      if (rec.interventional_collapsed) ++cs.collapsed;
      ok.push_back(&rec);
    }
    if (!ok.empty()) {
      double e_ours = 0.0, l_ours = 0.0;
      for (const auto* rec : ok) {
        e_ours += rec->e.at("ours");
        l_ours += rec->l.at("ours");
      }
      cs.e_ours_mean = e_ours / ok.size();
      cs.l_ours_mean = l_ours / ok.size();
      std::vector<std::string> methods;
      for (const auto& [key, val] : ok.front()->e)
        if (key != "ours") methods.push_back(key);
      for (const auto& key : methods) {
        MethodAggregate agg;
        std::vector<double> e_diffs, l_diffs;
        double e_sum = 0.0, l_sum = 0.0;
        for (const auto* rec : ok) {
          e_sum += rec->e.at(key);
          l_sum += rec->l.at(key);
          e_diffs.push_back(rec->e.at(key) - rec->e.at("ours"));
          const double ld = rec->l.at("ours") - rec->l.at(key);
          if (std::abs(ld) > 10.0)
            ++agg.l_excluded;
          else
            l_diffs.push_back(ld);
        }
        agg.n_used = static_cast<int>(ok.size());
        agg.e_mean = e_sum / ok.size();
        agg.l_mean = l_sum / ok.size();
        const PairedTTest tt = paired_t_test(e_diffs);
        agg.e_diff_mean = tt.mean_diff;
        agg.e_diff_t = tt.t;
        agg.e_diff_p = tt.p;
        agg.e_diff_significant = tt.significant;
        agg.l_diff_mean =
            l_diffs.empty()
                ? std::numeric_limits<double>::quiet_NaN()
                : Eigen::Map<const Eigen::VectorXd>(l_diffs.data(),
                                                    l_diffs.size())
                      .mean();
        cs.methods[key] = agg;
      }
    }
    out.cells.push_back(std::move(cs));
  }
  return out;
}

}  // namespace dosegp
