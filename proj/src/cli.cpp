#include "dosegp/cli.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <iostream>

#include "dosegp/active.hpp"
#include "dosegp/baselines.hpp"
#include "dosegp/errors.hpp"
#include "dosegp/eval.hpp"
#include "dosegp/semisynth.hpp"
#include "dosegp/serialize.hpp"

namespace dosegp {

namespace {

constexpr const char* kVersion = "0.1.0";

void check_keys(const json& obj, const std::string& ctx,
                std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw InputError(ctx + ": expected an object");
  for (const auto& [key, val] : obj.items()) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) {
        ok = true;
        break;
      }
    if (!ok) {
      std::string msg = ctx + ": unknown key '" + key + "'; allowed:";
      for (const char* a : allowed) msg += std::string(" ") + a;
      throw InputError(msg);
    }
  }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw InputError(std::string("config key '") + key + "' has the wrong type");
  }
}

McmcOptions mcmc_from_json(const json& block, const std::string& ctx,
                           const McmcOptions& base = {}) {
  check_keys(block, ctx,
             {"iterations", "burn_in", "thin", "slice_width",
              "slice_max_stepout"});
  McmcOptions o = base;
  o.iterations = get_or(block, "iterations", o.iterations);
  o.burn_in = get_or(block, "burn_in", o.burn_in);
  o.thin = get_or(block, "thin", o.thin);
  o.slice_width = get_or(block, "slice_width", o.slice_width);
  o.slice_max_stepout = get_or(block, "slice_max_stepout", o.slice_max_stepout);
  o.validate();
  return o;
}

GpFitOptions gp_from_json(const json& block, const std::string& ctx) {
  check_keys(block, ctx, {"restarts", "max_iterations"});
  GpFitOptions o;
  o.restarts = get_or(block, "restarts", o.restarts);
  o.max_iterations = get_or(block, "max_iterations", o.max_iterations);
  if (o.restarts < 1 || o.max_iterations < 1)
    throw InputError(ctx + ": restarts and max_iterations must be positive");
  return o;
}

DoseGrid grid_from_spec(const json& spec, const Eigen::VectorXd& x,
                        const std::string& ctx) {
  if (spec.is_null()) return DoseGrid::even(x.minCoeff(), x.maxCoeff(), 20);
  check_keys(spec, ctx, {"size", "levels"});
  if (spec.contains("levels")) {
    if (spec.contains("size"))
      throw InputError(ctx + ": give either size or levels, not both");
    DoseGrid g;
    g.levels = vector_from_json(spec.at("levels"), ctx + ".levels");
    g.validate();
    return g;
  }
  const Eigen::Index t = get_or<Eigen::Index>(spec, "size", 20);
  return DoseGrid::even(x.minCoeff(), x.maxCoeff(), t);
}

DropMode drop_mode_from_string(const std::string& s, const std::string& ctx) {
  if (s == "random") return DropMode::kRandom;
  if (s == "adversarial") return DropMode::kAdversarial;
  throw InputError(ctx + ": drop mode must be 'random' or 'adversarial', got '" +
                   s + "'");
}

std::filesystem::path out_path(const RunConfig& rc, const std::string& name) {
  return std::filesystem::path(rc.out_dir) / name;
}

// Standardized-units summary mapped back to the original units.
void write_summary_destandardized(const std::string& path,
                                  const DoseGrid& raw_grid,
                                  const Eigen::VectorXd& mean_std,
                                  const Eigen::VectorXd& var_std,
                                  const StandardizeMoments& m) {
  const Eigen::VectorXd mean =
      (mean_std.array() * m.y_sd) + m.y_mean;
  const Eigen::VectorXd var = var_std.array() * (m.y_sd * m.y_sd);
  write_summary_csv(path, raw_grid, mean, var);
}

void cmd_generate(const RunConfig& rc) {
  const json block = rc.config.value("generate", json::object());
  check_keys(block, "generate",
             {"p", "n", "degree", "alpha", "count", "grid_size", "m_int",
              "drop"});
  const int p = get_or(block, "p", 10);
  const Eigen::Index n = get_or<Eigen::Index>(block, "n", 300);
  const int degree = get_or(block, "degree", 2);
  const double alpha = get_or(block, "alpha", 0.25);
  const int count = get_or(block, "count", 1);
  const Eigen::Index grid_size = get_or<Eigen::Index>(block, "grid_size", 20);
  const int m_int = get_or(block, "m_int", 40);
  const json drop = block.value("drop", json::object());
  check_keys(drop, "generate.drop", {"mode", "count"});
  const std::string drop_mode_str =
      get_or<std::string>(drop, "mode", "random");
  const int drop_count = get_or(drop, "count", 0);
  if (count < 1) throw InputError("generate: count must be positive");

  for (int k = 0; k < count; ++k) {
    const std::string tag = std::to_string(k);
    const std::uint64_t seed_k =
        RandomStream(rc.seed).child(static_cast<std::uint64_t>(k)).seed();
    auto [problem, obs] = generate_problem(p, n, degree, alpha, seed_k);
    json pj = to_json(problem);

    ObservationalDataset visible = obs;
    if (drop_count > 0) {
      RandomStream drop_rng = RandomStream(seed_k).child(0xd0);
      std::string note;
      visible = drop_confounders(problem, obs,
                                 drop_mode_from_string(drop_mode_str,
                                                       "generate.drop"),
                                 drop_count, drop_rng, &note);
      pj["drop"] = {{"mode", drop_mode_str},
                    {"count", drop_count},
                    {"note", note}};
    }
    write_json_file(out_path(rc, "problem_" + tag + ".json"), pj);
    write_observational_csv(out_path(rc, "observational_" + tag + ".csv"),
                            obs);
    if (drop_count > 0)
      write_observational_csv(
          out_path(rc, "observational_dropped_" + tag + ".csv"), visible);

    const DoseGrid grid =
        DoseGrid::even(obs.x.minCoeff(), obs.x.maxCoeff(), grid_size);
    InterventionalDataset trial;
    RandomStream trial_rng = RandomStream(seed_k).child(0x72);
    const int base = m_int / static_cast<int>(grid.size());
    const int extra = m_int % static_cast<int>(grid.size());
    for (Eigen::Index t = 0; t < grid.size(); ++t)
      sample_interventional(problem, grid.levels(t),
                            base + (t < extra ? 1 : 0), trial_rng, trial);
    write_interventional_csv(out_path(rc, "trial_" + tag + ".csv"), trial);
    write_summary_csv(out_path(rc, "truth_" + tag + ".csv"), grid,
                      problem.true_dose_response(grid.levels),
                      Eigen::VectorXd::Zero(grid.size()));
  }
}

void cmd_fit(const RunConfig& rc) {
  const json block = rc.config.value("fit", json::object());
  check_keys(block, "fit",
             {"observational_csv", "interventional_csv", "grid", "standardize",
              "methods", "mcmc", "gp"});
  if (!block.contains("observational_csv") ||
      !block.contains("interventional_csv"))
    throw InputError(
        "fit: observational_csv and interventional_csv are required");
  const ObservationalDataset obs =
      read_observational_csv(block.at("observational_csv").get<std::string>());
  const InterventionalDataset intv = read_interventional_csv(
      block.at("interventional_csv").get<std::string>());
  const DoseGrid raw_grid =
      grid_from_spec(block.value("grid", json()), obs.x, "fit.grid");
  const bool do_std = get_or(block, "standardize", true);
  const McmcOptions mcmc_base =
      mcmc_from_json(block.value("mcmc", json::object()), "fit.mcmc");
  const GpFitOptions gp_opts =
      gp_from_json(block.value("gp", json::object()), "fit.gp");
  std::vector<std::string> methods =
      get_or(block, "methods", std::vector<std::string>{"ours"});

  ObservationalDataset sobs = obs;
  InterventionalDataset sint = intv;
  StandardizeMoments moments;
  if (do_std) std::tie(sobs, sint, moments) = standardize(obs, intv);
  DoseGrid grid;
  grid.levels = (raw_grid.levels.array() - moments.x_mean) / moments.x_sd;
  grid.validate();

  const RandomStream rs(rc.seed);
  GpFitOptions fo = gp_opts;
  fo.seed = rs.child(0).seed();
  const GpPosterior model = gp_fit_hyperparameters(
      sobs.inputs(), sobs.y, KernelFamily::kMatern32Ard, fo);
  PriorBuildOptions po;
  po.moments = moments;
  const DoseResponsePrior prior =
      build_dose_response_prior(model, sobs, grid, po);
  write_json_file(out_path(rc, "prior.json"), to_json(prior));

  for (const auto& method : methods) {
    if (method == "ours") {
      McmcOptions mo = mcmc_base;
      mo.seed = rs.child(1).seed();
      const McmcSamples samples = run_mcmc(prior, sint, mo);
      write_json_file(out_path(rc, "samples.json"), to_json(samples));
      const PosteriorSummary s = posterior_summary(samples);
      write_summary_destandardized(out_path(rc, "summary_ours.csv"), raw_grid,
                                   s.mean, s.variance, moments);
    } else if (method == "prior_conditioning") {
      const BaselineFit f = fit_prior_conditioning(prior, sint);
      write_summary_destandardized(
          out_path(rc, "summary_prior_conditioning.csv"), raw_grid, f.mean,
          f.variance, moments);
    } else if (method == "additive_residual") {
      const BaselineFit f =
          fit_additive_residual(prior, sint, rs.child(2).seed());
      write_summary_destandardized(out_path(rc, "summary_additive_residual.csv"),
                                   raw_grid, f.mean, f.variance, moments);
    } else if (method == "interventional_only") {
      GpFitOptions o = gp_opts;
      o.seed = rs.child(3).seed();
      const BaselineFit f = fit_direct_gp(
          sint.y, sint.x, grid, KernelFamily::kSquaredExponentialArd,
          BaselineMethod::kInterventionalOnly, o);
      if (f.collapsed)
        std::cerr << "note: interventional-only fit collapsed to a flat curve"
                  << std::endl;
      write_summary_destandardized(
          out_path(rc, "summary_interventional_only.csv"), raw_grid, f.mean,
          f.variance, moments);
    } else if (method == "observational_only") {
      GpFitOptions o = gp_opts;
      o.seed = rs.child(4).seed();
      const BaselineFit f =
          fit_direct_gp(sobs.y, sobs.x, grid, KernelFamily::kMatern32Ard,
                        BaselineMethod::kObservationalOnly, o);
      write_summary_destandardized(
          out_path(rc, "summary_observational_only.csv"), raw_grid, f.mean,
          f.variance, moments);
    } else if (method == "clamped_scale") {
      McmcOptions mo = mcmc_base;
      mo.seed = rs.child(5).seed();
      const BaselineFit f = fit_clamped_scale(prior, sint, mo);
      write_summary_destandardized(out_path(rc, "summary_clamped_scale.csv"),
                                   raw_grid, f.mean, f.variance, moments);
    } else {
      throw InputError("fit: unknown method '" + method + "'");
    }
  }
}

void cmd_evaluate(const RunConfig& rc) {
  const json block = rc.config.value("evaluate", json::object());
  check_keys(block, "evaluate",
             {"cells", "n_obs", "p", "drop_count", "grid_size", "replications",
              "mcmc", "gp", "clamped_scale"});
  StudyConfig cfg = rc.scale == "paper" ? StudyConfig::paper_default()
                                        : StudyConfig::desk_default();
  if (block.contains("cells")) {
    cfg.cells.clear();
    for (const auto& cj : block.at("cells")) {
      check_keys(cj, "evaluate.cells[]", {"degree", "alpha", "drop", "m"});
      StudyCell cell;
      cell.degree = get_or(cj, "degree", 2);
      cell.alpha = get_or(cj, "alpha", 0.25);
      cell.drop = drop_mode_from_string(
          get_or<std::string>(cj, "drop", "random"), "evaluate.cells[]");
      cell.m_int = get_or(cj, "m", 40);
      cfg.cells.push_back(cell);
    }
  }
  cfg.n_obs = get_or(block, "n_obs", cfg.n_obs);
  cfg.p = get_or(block, "p", cfg.p);
  cfg.drop_count = get_or(block, "drop_count", cfg.drop_count);
  cfg.grid_size = get_or(block, "grid_size", cfg.grid_size);
  cfg.replications = get_or(block, "replications", cfg.replications);
  cfg.run_clamped_scale = get_or(block, "clamped_scale", true);
  if (block.contains("mcmc"))
    cfg.mcmc = mcmc_from_json(block.at("mcmc"), "evaluate.mcmc");
  if (block.contains("gp"))
    cfg.gp_fit = gp_from_json(block.at("gp"), "evaluate.gp");
  cfg.seed = rc.seed;
  cfg.threads = rc.threads;

  const StudyResult result = run_study(cfg);
  write_replications_csv(out_path(rc, "replications.csv"), result);
  write_json_file(out_path(rc, "summary.json"), to_json(result));
}

struct StrataSetup {
  std::vector<SemiSyntheticTruth> truths;
  std::vector<DoseResponsePrior> priors;
  DoseGrid grid;
};

StrataSetup build_strata(const RunConfig& rc, const json& block,
                         const std::string& ctx, bool with_priors) {
  if (!block.contains("observational_csv"))
    throw InputError(ctx + ": observational_csv is required");
  const ObservationalDataset obs =
      read_observational_csv(block.at("observational_csv").get<std::string>());
  StrataSetup setup;
  setup.grid = grid_from_spec(block.value("grid", json()), obs.x,
                              ctx + ".grid");
  const Eigen::Index min_rows =
      get_or<Eigen::Index>(block, "min_stratum_rows", 20);
  const GpFitOptions gp_opts =
      gp_from_json(block.value("gp", json::object()), ctx + ".gp");

  const RandomStream rs(rc.seed);
  if (obs.stratum.empty()) {
    GpFitOptions o = gp_opts;
    o.seed = rs.child(0x5e).seed();
    setup.truths.push_back(fit_semisynthetic_truth(obs, setup.grid, o));
  } else {
    GpFitOptions o = gp_opts;
    o.seed = rs.child(0x5e).seed();
    setup.truths =
        fit_semisynthetic_truth_by_stratum(obs, setup.grid, min_rows, o);
  }
  if (with_priors) {
    // The working prior per stratum comes from the same rows the truth was
    // distilled from; everything stays in the original units here.
    int s = 0;
    for (const auto& truth : setup.truths) {
      ObservationalDataset sub;
      if (truth.stratum < 0) {
        sub = obs;
      } else {
        std::vector<Eigen::Index> rows;
        for (Eigen::Index i = 0; i < obs.n(); ++i)
          if (obs.stratum[i] == truth.stratum) rows.push_back(i);
        sub.y.resize(rows.size());
        sub.x.resize(rows.size());
        sub.z.resize(rows.size(), obs.p());
        for (size_t i = 0; i < rows.size(); ++i) {
          sub.y(i) = obs.y(rows[i]);
          sub.x(i) = obs.x(rows[i]);
          sub.z.row(i) = obs.z.row(rows[i]);
        }
      }
      GpFitOptions o = gp_opts;
      o.seed = rs.child(0x9 + s).seed();
      const GpPosterior model = gp_fit_hyperparameters(
          sub.inputs(), sub.y, KernelFamily::kMatern32Ard, o);
      setup.priors.push_back(
          build_dose_response_prior(model, sub, setup.grid));
      ++s;
    }
  }
  return setup;
}

std::string stratum_tag(const SemiSyntheticTruth& t) {
  return t.stratum < 0 ? "all" : std::to_string(t.stratum);
}

void cmd_active(const RunConfig& rc) {
  const json block = rc.config.value("active", json::object());
  check_keys(block, "active",
             {"observational_csv", "grid", "budget", "min_stratum_rows",
              "hyper_refresh_every", "mcmc", "latent_mcmc", "gp"});
  if (!block.contains("budget"))
    throw InputError("active: budget is required");
  const int budget = block.at("budget").get<int>();

  const StrataSetup setup = build_strata(rc, block, "active", true);
  ActiveOptions opts;
  opts.seed = rc.seed;
  opts.hyper_refresh_every = get_or(block, "hyper_refresh_every", 5);
  if (block.contains("mcmc"))
    opts.full_mcmc = mcmc_from_json(block.at("mcmc"), "active.mcmc");
  if (block.contains("latent_mcmc")) {
    opts.latent_mcmc = mcmc_from_json(block.at("latent_mcmc"),
                                      "active.latent_mcmc", opts.latent_mcmc);
    opts.latent_mcmc.update_hyperparameters = false;
  }

  const DoseOracle oracle = [&](int s, double dose,
                                RandomStream& rng) -> double {
    InterventionalDataset tmp;
    simulate_trial(setup.truths.at(s), dose, 1, rng, tmp);
    return tmp.y(0);
  };
  const ActiveResult result =
      run_active_loop(setup.priors, oracle, budget, opts);

  json tj = json::array();
  for (const auto& t : setup.truths) tj.push_back(to_json(t));
  write_json_file(out_path(rc, "truth.json"), tj);
  write_history_csv(out_path(rc, "history.csv"), result.history);
  for (size_t s = 0; s < setup.truths.size(); ++s) {
    write_summary_csv(
        out_path(rc, "summary_" + stratum_tag(setup.truths[s]) + ".csv"),
        setup.grid, result.summaries[s].mean, result.summaries[s].variance);
    write_interventional_csv(
        out_path(rc, "trial_" + stratum_tag(setup.truths[s]) + ".csv"),
        result.data[s]);
  }
  if (result.aborted)
    throw NumericalError("active loop aborted: " + result.error);
}

void cmd_semisynth(const RunConfig& rc) {
  const json block = rc.config.value("semisynth", json::object());
  check_keys(block, "semisynth",
             {"observational_csv", "grid", "min_stratum_rows", "gp",
              "replicates_per_dose"});
  const StrataSetup setup = build_strata(rc, block, "semisynth", false);
  json tj = json::array();
  for (const auto& t : setup.truths) tj.push_back(to_json(t));
  write_json_file(out_path(rc, "truth.json"), tj);

  const int reps = get_or(block, "replicates_per_dose", 0);
  if (reps > 0) {
    RandomStream rng = RandomStream(rc.seed).child(0x7a1);
    for (const auto& truth : setup.truths) {
      InterventionalDataset trial;
      for (Eigen::Index t = 0; t < setup.grid.size(); ++t)
        simulate_trial(truth, setup.grid.levels(t), reps, rng, trial);
      write_interventional_csv(
          out_path(rc, "trial_" + stratum_tag(truth) + ".csv"), trial);
    }
  }
}

}  // namespace

RunConfig resolve_config(const std::string& command,
                         const std::optional<std::string>& config_path,
                         const std::optional<std::uint64_t>& seed_flag,
                         const std::optional<std::string>& out_flag,
                         const std::optional<int>& threads_flag,
                         const std::optional<std::string>& scale_flag) {
  RunConfig rc;
  rc.command = command;
  rc.config = json::object();
  if (config_path) {
    json j = read_json_file(*config_path);
    if (j.contains("invocation")) {
      // Manifest replay: the stored invocation is the resolved config.
      const std::string stored = j.value("command", command);
      if (stored != command)
        throw InputError("manifest was written by '" + stored +
                         "', not '" + command + "'");
      j = j.at("invocation");
    }
    check_keys(j, "config",
               {"seed", "out", "threads", "scale", "generate", "fit",
                "evaluate", "active", "semisynth"});
    rc.config = std::move(j);
  }
  rc.seed = get_or<std::uint64_t>(rc.config, "seed", 0);
  rc.out_dir = get_or<std::string>(rc.config, "out", ".");
  rc.threads = get_or(rc.config, "threads", 1);
  rc.scale = get_or<std::string>(rc.config, "scale", "desk");
  if (seed_flag) rc.seed = *seed_flag;
  if (out_flag) rc.out_dir = *out_flag;
  if (threads_flag) rc.threads = *threads_flag;
  if (scale_flag) rc.scale = *scale_flag;
  if (rc.scale != "desk" && rc.scale != "paper")
    throw InputError("scale must be 'desk' or 'paper', got '" + rc.scale + "'");
  if (rc.threads < 1) throw InputError("threads must be positive");
  rc.config["seed"] = rc.seed;
  rc.config["out"] = rc.out_dir;
  rc.config["threads"] = rc.threads;
  rc.config["scale"] = rc.scale;
  return rc;
}

void run_command(const RunConfig& rc) {
  std::filesystem::create_directories(rc.out_dir);
  const auto start = std::chrono::steady_clock::now();
  if (rc.command == "generate")
    cmd_generate(rc);
  else if (rc.command == "fit")
    cmd_fit(rc);
  else if (rc.command == "evaluate")
    cmd_evaluate(rc);
  else if (rc.command == "active")
    cmd_active(rc);
  else if (rc.command == "semisynth")
    cmd_semisynth(rc);
  else
    throw InputError("unknown command '" + rc.command + "'");
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
          .count();
  write_json_file(out_path(rc, "manifest.json"),
                  {{"command", rc.command},
                   {"version", kVersion},
                   {"wall_time_seconds", elapsed},
                   {"invocation", rc.config}});
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Dose-response estimation from observational and "
               "interventional data"};
  app.require_subcommand(1);

  struct Flags {
    std::optional<std::string> config, out, scale;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
  };
  std::map<std::string, Flags> flags;
  const std::vector<std::string> commands = {"generate", "fit", "evaluate",
                                             "active", "semisynth"};
  const std::map<std::string, std::string> descriptions = {
      {"generate", "Sample synthetic confounded problems and trials"},
      {"fit", "Fit the dose-response model(s) to CSV data"},
      {"evaluate", "Run the replicated benchmark study"},
      {"active", "Actively allocate a trial budget against a distilled truth"},
      {"semisynth", "Distill trial ground truth from observational data"}};
  for (const auto& name : commands) {
    auto* sub = app.add_subcommand(name, descriptions.at(name));
    auto& f = flags[name];
    sub->add_option("--config", f.config, "JSON config file");
    sub->add_option("--seed", f.seed, "Master seed (overrides config)");
    sub->add_option("--out", f.out, "Output directory (overrides config)");
    sub->add_option("--threads", f.threads, "Worker threads (overrides config)");
    sub->add_option("--scale", f.scale, "Problem scale: desk or paper");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);  // help text or usage error from the parser
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    const Flags& f = flags.at(command);
    const RunConfig rc = resolve_config(command, f.config, f.seed, f.out,
                                        f.threads, f.scale);
    run_command(rc);
    return 0;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << std::endl;
    return 1;
  } catch (const ResourceError& e) {
    std::cerr << "resource error: " << e.what() << std::endl;
    return 2;
  } catch (const GenerationError& e) {
    std::cerr << "generation error: " << e.what() << std::endl;
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << std::endl;
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
}

}  // namespace dosegp
