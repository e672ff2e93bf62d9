#pragma once

#include <nlohmann/json.hpp>
#include <optional>
#include <string>

namespace dosegp {

// A parsed invocation: the subcommand plus the fully resolved config (file
// contents merged with flag overrides and defaults).
struct RunConfig {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  int threads = 1;
  std::string scale = "desk";  // desk | paper
};

// Reads and strictly validates the config file (unknown keys are named in
// the error). A manifest written by a previous run replays through its
// stored "invocation" block.
RunConfig resolve_config(const std::string& command,
                         const std::optional<std::string>& config_path,
                         const std::optional<std::uint64_t>& seed_flag,
                         const std::optional<std::string>& out_flag,
                         const std::optional<int>& threads_flag,
                         const std::optional<std::string>& scale_flag);

// Executes one resolved command, writing outputs plus a manifest into the
// out directory. Throws on failure; never calls exit().
void run_command(const RunConfig& rc);

// Full entry point: argument parsing, dispatch, error-to-exit-code mapping
// (input problems 1, everything else 2).
int cli_main(int argc, char** argv);

}  // namespace dosegp
