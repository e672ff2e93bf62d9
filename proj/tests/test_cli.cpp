#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "dosegp/cli.hpp"
#include "dosegp/dataset.hpp"
#include "dosegp/errors.hpp"
#include "dosegp/serialize.hpp"

using namespace dosegp;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() /
           ("dosegp_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Everything in a directory except the manifest, keyed by file name. The
// manifest differs between runs through its wall-clock entry.
std::map<std::string, std::string> dir_contents(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().filename() == "manifest.json") continue;
    out[e.path().filename().string()] = slurp(e.path());
  }
  return out;
}

int run_cli(const std::string& args) {
  const char* bin = std::getenv("DOSEGP_CLI");
  REQUIRE_MESSAGE(bin != nullptr,
                  "DOSEGP_CLI must point at the built binary (set by ctest)");
  const int rc = std::system(
      (std::string(bin) + " " + args + " > /dev/null 2>&1").c_str());
  return WEXITSTATUS(rc);
}

}  // namespace

TEST_CASE("config resolution applies defaults and overrides") {
  const RunConfig bare =
      resolve_config("generate", std::nullopt, std::nullopt, std::nullopt,
                     std::nullopt, std::nullopt);
  CHECK(bare.seed == 0);
  CHECK(bare.out_dir == ".");
  CHECK(bare.threads == 1);
  CHECK(bare.scale == "desk");
  // the resolved values are mirrored into the stored invocation
  CHECK(bare.config.at("seed") == 0);
  CHECK(bare.config.at("scale") == "desk");

  TempDir tmp("resolve");
  const std::string cfg = tmp.file("cfg.json");
  write_json_file(cfg, json{{"seed", 7},
                            {"threads", 2},
                            {"out", "from_file"},
                            {"generate", {{"p", 3}}}});
  const RunConfig from_file = resolve_config(
      "generate", cfg, std::nullopt, std::nullopt, std::nullopt, std::nullopt);
  CHECK(from_file.seed == 7);
  CHECK(from_file.threads == 2);
  CHECK(from_file.out_dir == "from_file");

  const RunConfig overridden = resolve_config(
      "generate", cfg, std::uint64_t{99}, std::string("elsewhere"), 4,
      std::string("paper"));
  CHECK(overridden.seed == 99);
  CHECK(overridden.out_dir == "elsewhere");
  CHECK(overridden.threads == 4);
  CHECK(overridden.scale == "paper");
  CHECK(overridden.config.at("seed") == 99);
}

TEST_CASE("unknown config keys are named in the error") {
  TempDir tmp("strict");
  const std::string cfg = tmp.file("cfg.json");
  write_json_file(cfg, json{{"seed", 1}, {"sede", 2}});
  CHECK_THROWS_WITH_AS(
      resolve_config("generate", cfg, std::nullopt, std::nullopt, std::nullopt,
                     std::nullopt),
      doctest::Contains("unknown key 'sede'"), InputError);

  const std::string nested = tmp.file("nested.json");
  write_json_file(nested, json{{"generate", {{"degre", 3}}}});
  const RunConfig rc = resolve_config("generate", nested, std::nullopt,
                                      tmp.file("out"), std::nullopt,
                                      std::nullopt);
  CHECK_THROWS_WITH_AS(run_command(rc), doctest::Contains("unknown key 'degre'"),
                       InputError);
}

TEST_CASE("invalid settings are rejected") {
  CHECK_THROWS_WITH_AS(
      resolve_config("fit", std::nullopt, std::nullopt, std::nullopt,
                     std::nullopt, std::string("huge")),
      doctest::Contains("desk"), InputError);
  CHECK_THROWS_AS(
      resolve_config("fit", std::nullopt, std::nullopt, std::nullopt, 0,
                     std::nullopt),
      InputError);
  RunConfig rc;
  rc.command = "frobnicate";
  CHECK_THROWS_AS(run_command(rc), InputError);
}

TEST_CASE("generate writes the full problem bundle plus a manifest") {
  TempDir tmp("gen");
  const std::string cfg = tmp.file("cfg.json");
  write_json_file(
      cfg, json{{"generate",
                 {{"p", 3}, {"n", 60}, {"count", 2}, {"grid_size", 4},
                  {"m_int", 8}, {"drop", {{"mode", "random"}, {"count", 1}}}}}});
  const std::string out = tmp.file("out");
  const RunConfig rc = resolve_config("generate", cfg, std::uint64_t{11}, out,
                                      std::nullopt, std::nullopt);
  run_command(rc);
  for (const char* name :
       {"problem_0.json", "observational_0.csv", "observational_dropped_0.csv",
        "trial_0.csv", "truth_0.csv", "problem_1.json", "manifest.json"})
    CHECK_MESSAGE(fs::exists(fs::path(out) / name), name);

  // the problem file reconstructs through its defining scalars
  const json pj = read_json_file((fs::path(out) / "problem_0.json").string());
  const SyntheticProblem prob = problem_from_json(pj);
  CHECK(prob.p == 3);
  CHECK(pj.at("drop").at("note").get<std::string>().find("z") !=
        std::string::npos);

  // dropped dataset really lost one column
  const ObservationalDataset full = read_observational_csv(
      (fs::path(out) / "observational_0.csv").string());
  const ObservationalDataset dropped = read_observational_csv(
      (fs::path(out) / "observational_dropped_0.csv").string());
  CHECK(full.p() == 3);
  CHECK(dropped.p() == 2);
  CHECK(full.y == dropped.y);

  const json manifest =
      read_json_file((fs::path(out) / "manifest.json").string());
  CHECK(manifest.at("command") == "generate");
  CHECK(manifest.at("invocation").at("seed") == 11);
  CHECK(manifest.contains("wall_time_seconds"));
  CHECK(manifest.contains("version"));
}

TEST_CASE("manifest replay reproduces a run") {
  TempDir tmp("replay");
  const std::string cfg = tmp.file("cfg.json");
  write_json_file(cfg,
                  json{{"generate", {{"p", 2}, {"n", 40}, {"grid_size", 3},
                                     {"m_int", 6}}}});
  const std::string out_a = tmp.file("a");
  run_command(resolve_config("generate", cfg, std::uint64_t{3}, out_a,
                             std::nullopt, std::nullopt));
  // replay from the manifest into a fresh directory
  const std::string out_b = tmp.file("b");
  const RunConfig replay = resolve_config(
      "generate", (fs::path(out_a) / "manifest.json").string(), std::nullopt,
      out_b, std::nullopt, std::nullopt);
  CHECK(replay.seed == 3);
  run_command(replay);
  CHECK(dir_contents(out_a) == dir_contents(out_b));

  // a manifest cannot replay under a different subcommand
  CHECK_THROWS_WITH_AS(
      resolve_config("fit", (fs::path(out_a) / "manifest.json").string(),
                     std::nullopt, std::nullopt, std::nullopt, std::nullopt),
      doctest::Contains("generate"), InputError);
}

TEST_CASE("fit consumes generated data end to end") {
  TempDir tmp("fit");
  const std::string gen_out = tmp.file("gen");
  {
    const std::string cfg = tmp.file("gen.json");
    write_json_file(cfg,
                    json{{"generate", {{"p", 2}, {"n", 60}, {"grid_size", 4},
                                       {"m_int", 12}}}});
    run_command(resolve_config("generate", cfg, std::uint64_t{21}, gen_out,
                               std::nullopt, std::nullopt));
  }
  const std::string fit_out = tmp.file("fitout");
  const std::string cfg = tmp.file("fit.json");
  write_json_file(
      cfg,
      json{{"fit",
            {{"observational_csv",
              (fs::path(gen_out) / "observational_0.csv").string()},
             {"interventional_csv",
              (fs::path(gen_out) / "trial_0.csv").string()},
             {"grid", {{"size", 4}}},
             {"methods", json::array({"ours", "prior_conditioning"})},
             {"mcmc", {{"iterations", 200}, {"burn_in", 40}, {"thin", 4}}},
             {"gp", {{"restarts", 1}, {"max_iterations", 60}}}}}});
  run_command(resolve_config("fit", cfg, std::uint64_t{5}, fit_out,
                             std::nullopt, std::nullopt));
  for (const char* name : {"prior.json", "samples.json", "summary_ours.csv",
                           "summary_prior_conditioning.csv", "manifest.json"})
    CHECK_MESSAGE(fs::exists(fs::path(fit_out) / name), name);

  // stored prior and samples parse back and agree on the grid
  const DoseResponsePrior prior =
      prior_from_json(read_json_file((fs::path(fit_out) / "prior.json")
                                         .string()));
  const McmcSamples samples = samples_from_json(
      read_json_file((fs::path(fit_out) / "samples.json").string()));
  CHECK(prior.grid.size() == 4);
  CHECK(samples.f_obs.cols() == 4);
  CHECK(samples.num_draws() == (200 - 40) / 4);

  SUBCASE("unknown methods and bad schedules are input errors") {
    const std::string bad = tmp.file("bad.json");
    json b = read_json_file(cfg);
    b["fit"]["methods"] = json::array({"telepathy"});
    write_json_file(bad, b);
    CHECK_THROWS_WITH_AS(
        run_command(resolve_config("fit", bad, std::uint64_t{5},
                                   tmp.file("badout"), std::nullopt,
                                   std::nullopt)),
        doctest::Contains("telepathy"), InputError);

    json sched = read_json_file(cfg);
    sched["fit"]["mcmc"]["burn_in"] = 500;
    write_json_file(bad, sched);
    CHECK_THROWS_AS(
        run_command(resolve_config("fit", bad, std::uint64_t{5},
                                   tmp.file("badout"), std::nullopt,
                                   std::nullopt)),
        InputError);

    json grid = read_json_file(cfg);
    grid["fit"]["grid"] = {{"size", 4}, {"levels", json::array({0.0, 1.0})}};
    write_json_file(bad, grid);
    CHECK_THROWS_WITH_AS(
        run_command(resolve_config("fit", bad, std::uint64_t{5},
                                   tmp.file("badout"), std::nullopt,
                                   std::nullopt)),
        doctest::Contains("not both"), InputError);
  }
}

TEST_CASE("semisynth and active distill and spend against real data") {
  TempDir tmp("activ");
  // observational file with strata: reuse the generator, then label halves
  const std::string gen_out = tmp.file("gen");
  {
    const std::string cfg = tmp.file("gen.json");
    write_json_file(cfg, json{{"generate", {{"p", 2}, {"n", 80},
                                            {"grid_size", 3}, {"m_int", 6}}}});
    run_command(resolve_config("generate", cfg, std::uint64_t{9}, gen_out,
                               std::nullopt, std::nullopt));
  }
  ObservationalDataset obs = read_observational_csv(
      (fs::path(gen_out) / "observational_0.csv").string());
  obs.stratum.resize(obs.n());
  for (Eigen::Index i = 0; i < obs.n(); ++i)
    obs.stratum[i] = static_cast<int>(i % 2);
  const std::string labeled = tmp.file("labeled.csv");
  write_observational_csv(labeled, obs);

  const std::string semi_out = tmp.file("semi");
  const std::string scfg = tmp.file("semi.json");
  write_json_file(
      scfg, json{{"semisynth",
                  {{"observational_csv", labeled},
                   {"grid", {{"size", 3}}},
                   {"min_stratum_rows", 10},
                   {"replicates_per_dose", 2},
                   {"gp", {{"restarts", 1}, {"max_iterations", 40}}}}}});
  run_command(resolve_config("semisynth", scfg, std::uint64_t{2}, semi_out,
                             std::nullopt, std::nullopt));
  for (const char* name :
       {"truth.json", "trial_0.csv", "trial_1.csv", "manifest.json"})
    CHECK_MESSAGE(fs::exists(fs::path(semi_out) / name), name);
  const json tj = read_json_file((fs::path(semi_out) / "truth.json").string());
  REQUIRE(tj.is_array());
  REQUIRE(tj.size() == 2);
  const SemiSyntheticTruth t0 = truth_from_json(tj[0]);
  CHECK(t0.stratum == 0);
  CHECK(t0.rows == 40);

  const std::string act_out = tmp.file("act");
  const std::string acfg = tmp.file("act.json");
  write_json_file(
      acfg,
      json{{"active",
            {{"observational_csv", labeled},
             {"grid", {{"size", 3}}},
             {"budget", 3},
             {"min_stratum_rows", 10},
             {"hyper_refresh_every", 2},
             {"mcmc", {{"iterations", 150}, {"burn_in", 30}, {"thin", 4}}},
             {"latent_mcmc", {{"iterations", 100}, {"burn_in", 20}, {"thin", 4}}},
             {"gp", {{"restarts", 1}, {"max_iterations", 40}}}}}});
  run_command(resolve_config("active", acfg, std::uint64_t{6}, act_out,
                             std::nullopt, std::nullopt));
  for (const char* name :
       {"truth.json", "history.csv", "summary_0.csv", "summary_1.csv",
        "trial_0.csv", "trial_1.csv", "manifest.json"})
    CHECK_MESSAGE(fs::exists(fs::path(act_out) / name), name);
  // history holds exactly the adaptive queries
  std::ifstream hin((fs::path(act_out) / "history.csv").string());
  std::string line;
  int rows = -1;  // header
  while (std::getline(hin, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("the installed binary maps failures to exit codes") {
  TempDir tmp("bin");
  // no subcommand: usage error from the parser, nonzero but not a crash
  CHECK(run_cli("") != 0);
  // validation failure in the config file
  const std::string bad = tmp.file("bad.json");
  write_json_file(bad, json{{"tpyo", 1}});
  CHECK(run_cli("generate --config " + bad + " --out " + tmp.file("x")) == 1);
  // unreadable config path
  CHECK(run_cli("generate --config " + tmp.file("missing.json")) == 1);
  // malformed json
  const std::string broken = tmp.file("broken.json");
  {
    std::ofstream out(broken);
    out << "{\"seed\": 1,,}";
  }
  CHECK(run_cli("generate --config " + broken) == 1);
  // a healthy tiny run exits zero
  const std::string good = tmp.file("good.json");
  write_json_file(good, json{{"generate", {{"p", 2}, {"n", 30},
                                           {"grid_size", 3}, {"m_int", 3}}}});
  CHECK(run_cli("generate --config " + good + " --seed 4 --out " +
                tmp.file("ok")) == 0);
  CHECK(fs::exists(fs::path(tmp.file("ok")) / "manifest.json"));
}

TEST_CASE("binary runs are bit-identical apart from the manifest") {
  TempDir tmp("twice");
  const std::string cfg = tmp.file("cfg.json");
  write_json_file(cfg, json{{"generate", {{"p", 3}, {"n", 50},
                                          {"grid_size", 4}, {"m_int", 8},
                                          {"drop", {{"mode", "adversarial"},
                                                    {"count", 1}}}}}});
  const std::string a = tmp.file("a"), b = tmp.file("b");
  REQUIRE(run_cli("generate --config " + cfg + " --seed 17 --out " + a) == 0);
  REQUIRE(run_cli("generate --config " + cfg + " --seed 17 --out " + b) == 0);
  CHECK(dir_contents(a) == dir_contents(b));
  // and a different seed changes the data
  const std::string c = tmp.file("c");
  REQUIRE(run_cli("generate --config " + cfg + " --seed 18 --out " + c) == 0);
  CHECK(dir_contents(a) != dir_contents(c));
}
