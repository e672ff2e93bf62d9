#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "dosegp/errors.hpp"
#include "dosegp/eval.hpp"
#include "dosegp/linalg.hpp"

using namespace dosegp;

TEST_CASE("normalized error is scale-free mean absolute deviation") {
  Eigen::VectorXd est(3), truth(3);
  est << 1.0, 2.0, 3.0;
  truth << 0.0, 2.0, 4.0;
  CHECK(normalized_abs_error(est, truth) == doctest::Approx(1.0 / 6.0));
  // invariant to affine maps applied to both
  CHECK(normalized_abs_error(5.0 * est.array() - 2.0,
                             5.0 * truth.array() - 2.0) ==
        doctest::Approx(1.0 / 6.0));
  CHECK(normalized_abs_error(truth, truth) == 0.0);
  Eigen::VectorXd flat = Eigen::VectorXd::Constant(3, 1.3);
  CHECK_THROWS_AS(normalized_abs_error(est, flat), InputError);
  CHECK_THROWS_AS(normalized_abs_error(est, Eigen::VectorXd::Zero(2)),
                  InputError);
}

TEST_CASE("posterior log density averages pointwise gaussians") {
  Eigen::VectorXd mean(2), var(2), truth(2);
  mean << 0.0, 1.0;
  var << 1.0, 4.0;
  truth << 0.5, 2.0;
  const double want = 0.5 * (normal_log_density(0.5, 0.0, 1.0) +
                             normal_log_density(2.0, 1.0, 4.0));
  CHECK(avg_posterior_log_density(mean, var, truth) ==
        doctest::Approx(want).epsilon(1e-14));
  // zero variance degrades gracefully instead of crashing
  Eigen::VectorXd vz = Eigen::VectorXd::Zero(2);
  const double v = avg_posterior_log_density(mean, vz, truth);
  CHECK(std::isfinite(v));
  CHECK(v < -1e2);
  CHECK_THROWS_AS(
      avg_posterior_log_density(mean, var, Eigen::VectorXd::Zero(3)),
      InputError);
}

TEST_CASE("paired test matches an external reference") {
  // references computed with an independent statistics library
  const PairedTTest a = paired_t_test({0.3, 0.5, 0.1, 0.4, 0.2});
  CHECK(a.n == 5);
  CHECK(a.mean_diff == doctest::Approx(0.3));
  CHECK(a.t == doctest::Approx(4.242640687119285).epsilon(1e-12));
  CHECK(a.p == doctest::Approx(0.013235599563682695).epsilon(1e-10));
  CHECK(a.significant);

  const PairedTTest b = paired_t_test({0.01, -0.02, 0.005, 0.0, -0.007});
  CHECK(b.t == doctest::Approx(-0.459672281104855).epsilon(1e-12));
  CHECK(b.p == doctest::Approx(0.6696253854693961).epsilon(1e-10));
  CHECK_FALSE(b.significant);

  SUBCASE("degenerate inputs") {
    const PairedTTest single = paired_t_test({0.4});
    CHECK(single.n == 1);
    CHECK(std::isnan(single.p));
    CHECK_FALSE(single.significant);
    // 0.25 is exactly representable, so the sample deviation is exactly zero
    const PairedTTest zero_sd = paired_t_test({0.25, 0.25, 0.25});
    CHECK(zero_sd.p == 0.0);
    CHECK(zero_sd.significant);
    const PairedTTest all_zero = paired_t_test({0.0, 0.0, 0.0});
    CHECK(all_zero.p == 1.0);
    CHECK_FALSE(all_zero.significant);
  }
}

TEST_CASE("cell labels name the four design axes") {
  CHECK(StudyCell{2, 0.25, DropMode::kRandom, 40}.label() == "Q50%RandomM40");
  CHECK(StudyCell{3, 0.10, DropMode::kAdversarial, 200}.label() ==
        "C80%AdversarialM200");
}

TEST_CASE("study configuration is validated") {
  StudyConfig c = StudyConfig::desk_default();
  CHECK_NOTHROW(c.validate());
  CHECK(StudyConfig::paper_default().cells.size() == 16);
  StudyConfig bad = c;
  bad.cells.clear();
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = c;
  bad.cells[0].alpha = 0.7;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = c;
  bad.drop_count = bad.p + 1;
  CHECK_THROWS_AS(bad.validate(), InputError);
  bad = c;
  bad.threads = 0;
  CHECK_THROWS_AS(bad.validate(), InputError);
}

namespace {

StudyConfig tiny_study() {
  StudyConfig c;
  c.cells = {StudyCell{2, 0.25, DropMode::kRandom, 10}};
  c.n_obs = 60;
  c.p = 3;
  c.drop_count = 1;
  c.grid_size = 5;
  c.replications = 4;
  c.seed = 99;
  c.mcmc.iterations = 150;
  c.mcmc.burn_in = 30;
  c.mcmc.thin = 4;
  c.gp_fit.restarts = 1;
  c.gp_fit.max_iterations = 60;
  return c;
}

}  // namespace

TEST_CASE("study results do not depend on the thread count") {
  StudyConfig c1 = tiny_study();
  c1.threads = 1;
  StudyConfig c3 = tiny_study();
  c3.threads = 3;
  const StudyResult r1 = run_study(c1);
  const StudyResult r3 = run_study(c3);
  REQUIRE(r1.replications.size() == r3.replications.size());
  for (std::size_t i = 0; i < r1.replications.size(); ++i) {
    const auto& a = r1.replications[i];
    const auto& b = r3.replications[i];
    CHECK(a.failed == b.failed);
    REQUIRE(a.e.size() == b.e.size());
    for (const auto& [key, val] : a.e) {
      CHECK(val == b.e.at(key));
      CHECK(a.l.at(key) == b.l.at(key));
    }
  }
}

TEST_CASE("aggregates recompute from the replication records") {
  StudyConfig cfg = tiny_study();
  cfg.threads = 2;
  const StudyResult res = run_study(cfg);
  REQUIRE(res.cells.size() == 1);
  const CellSummary& cs = res.cells[0];
  CHECK(cs.completed + cs.failed == cfg.replications);
  REQUIRE(cs.completed > 0);

  // every method of the comparison ladder is present
  for (const char* name :
       {"prior_conditioning", "additive_residual", "interventional_only",
        "observational_only", "clamped_scale"})
    CHECK(cs.methods.count(name) == 1);

  std::vector<const ReplicationRecord*> ok;
  for (const auto& rec : res.replications)
    if (!rec.failed) ok.push_back(&rec);

  double e_ours = 0.0;
  for (const auto* rec : ok) e_ours += rec->e.at("ours");
  CHECK(cs.e_ours_mean == doctest::Approx(e_ours / ok.size()).epsilon(1e-12));

  for (const auto& [name, agg] : cs.methods) {
    CHECK(agg.n_used == static_cast<int>(ok.size()));
    double e_sum = 0.0, ld_sum = 0.0;
    int excluded = 0, kept = 0;
    std::vector<double> e_diffs;
    for (const auto* rec : ok) {
      e_sum += rec->e.at(name);
      e_diffs.push_back(rec->e.at(name) - rec->e.at("ours"));
      const double ld = rec->l.at("ours") - rec->l.at(name);
      if (std::abs(ld) > 10.0) {
        ++excluded;
      } else {
        ld_sum += ld;
        ++kept;
      }
    }
    CHECK(agg.e_mean == doctest::Approx(e_sum / ok.size()).epsilon(1e-12));
    CHECK(agg.l_excluded == excluded);
    if (kept > 0)
      CHECK(agg.l_diff_mean ==
            doctest::Approx(ld_sum / kept).epsilon(1e-12));
    else
      CHECK(std::isnan(agg.l_diff_mean));
    const PairedTTest tt = paired_t_test(e_diffs);
    CHECK(agg.e_diff_mean == doctest::Approx(tt.mean_diff).epsilon(1e-12));
    CHECK(agg.e_diff_p == doctest::Approx(tt.p).epsilon(1e-12));
    CHECK(agg.e_diff_significant == tt.significant);
  }

  SUBCASE("the pinned-gain arm can be switched off") {
    StudyConfig no5 = tiny_study();
    no5.replications = 2;
    no5.run_clamped_scale = false;
    const StudyResult r = run_study(no5);
    CHECK(r.cells[0].methods.count("clamped_scale") == 0);
    CHECK(r.cells[0].methods.count("prior_conditioning") == 1);
  }
}
