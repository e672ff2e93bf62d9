#include "dosegp/active.hpp"

#include "dosegp/errors.hpp"

namespace dosegp {

Eigen::Index select_next_dose(const Eigen::VectorXd& variances) {
  if (variances.size() < 1) throw InputError("select_next_dose: empty input");
  if (!variances.allFinite())
    throw InputError("select_next_dose: non-finite variance");
  Eigen::Index best = 0;
  for (Eigen::Index t = 1; t < variances.size(); ++t)
    if (variances(t) > variances(best)) best = t;
  return best;
}

ActiveOptions::ActiveOptions() {
  latent_mcmc.iterations = 700;
  latent_mcmc.burn_in = 100;
  latent_mcmc.thin = 6;
  latent_mcmc.update_hyperparameters = false;
}

void ActiveOptions::validate() const {
  if (hyper_refresh_every < 1)
    throw InputError("active: refresh cadence must be >= 1");
  full_mcmc.validate();
  latent_mcmc.validate();
}

McmcState state_from_last_draw(const McmcSamples& samples) {
  const Eigen::Index k = samples.num_draws();
  if (k < 1) throw InputError("state_from_last_draw: no draws");
  McmcState st;
  st.f_obs = samples.f_obs.row(k - 1);
  st.a = samples.a.row(k - 1);
  st.b = samples.b.row(k - 1);
  st.hyper.lambda_a = samples.hyper(k - 1, 0);
  st.hyper.sigma_a = samples.hyper(k - 1, 1);
  st.hyper.lambda_b = samples.hyper(k - 1, 2);
  st.hyper.sigma_b = samples.hyper(k - 1, 3);
  st.hyper.sigma_int_sq = samples.hyper(k - 1, 4);
  return st;
}

ActiveResult run_active_loop(const std::vector<DoseResponsePrior>& priors,
                             const DoseOracle& oracle, int budget,
                             const ActiveOptions& opts) {
  opts.validate();
  if (priors.empty()) throw InputError("active: needs at least one stratum");
  if (budget < 0) throw InputError("active: negative budget");
  for (const auto& prior : priors) prior.validate();
  const int strata = static_cast<int>(priors.size());

  ActiveResult res;
  res.data.resize(strata);
  res.samples.resize(strata);
  res.summaries.resize(strata);

  const RandomStream root(opts.seed);
  RandomStream oracle_rng = root.child(0xacc);
  std::vector<std::uint64_t> chain_counter(strata, 0);

  const auto refit = [&](int s, bool full) {
    McmcOptions mo = full ? opts.full_mcmc : opts.latent_mcmc;
    if (!full) {
      mo.update_hyperparameters = false;
      mo.init_state = state_from_last_draw(res.samples[s]);
    }
    mo.seed = root.child(1 + s).child(chain_counter[s]++).seed();
    res.samples[s] = run_mcmc(priors[s], res.data[s], mo);
    res.summaries[s] = posterior_summary(res.samples[s]);
  };

  // Seeding pass: one point per dose per stratum, then a full fit each.
  try {
    for (int s = 0; s < strata; ++s) {
      for (Eigen::Index t = 0; t < priors[s].grid.size(); ++t) {
        const double dose = priors[s].grid.levels(t);
        res.data[s].append(dose, oracle(s, dose, oracle_rng));
      }
      refit(s, true);
    }
  } catch (const std::exception& e) {
    res.aborted = true;
    res.error = std::string("seeding query failed: ") + e.what();
    return res;
  }

  std::vector<int> accepted(strata, 0);
  for (int step = 1; step <= budget; ++step) {
    // Global variance-greedy pick; strata tie toward the lower index via
    // strict inequality.
    int best_s = 0;
    Eigen::Index best_t = select_next_dose(res.summaries[0].variance);
    double best_v = res.summaries[0].variance(best_t);
    for (int s = 1; s < strata; ++s) {
      const Eigen::Index t = select_next_dose(res.summaries[s].variance);
      if (res.summaries[s].variance(t) > best_v) {
        best_s = s;
        best_t = t;
        best_v = res.summaries[s].variance(t);
      }
    }

    SelectionRecord record;
    record.step = step;
    record.stratum = best_s;
    record.dose_index = best_t;
    record.dose = priors[best_s].grid.levels(best_t);
    try {
      record.y = oracle(best_s, record.dose, oracle_rng);
    } catch (const std::exception& e) {
      res.aborted = true;
      res.error = "query at step " + std::to_string(step) +
                  " failed: " + e.what();
      return res;
    }
    res.data[best_s].append(record.dose, record.y);
    ++accepted[best_s];
    record.hyper_refresh = accepted[best_s] % opts.hyper_refresh_every == 0;
    res.history.push_back(record);
    refit(best_s, record.hyper_refresh);
  }
  return res;
}

}  // namespace dosegp
