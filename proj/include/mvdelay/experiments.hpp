#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace mvdelay {

struct RunContext {
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;  ///< overrides scenario.seed when set
  std::size_t threads = 1;
  bool verbose = false;
};

/// exit_code is 0 when every check of the experiment passed, 2 otherwise.
/// Operational failures throw mvdelay::Error.
struct CommandResult {
  int exit_code = 0;
  nlohmann::json summary;
};

/// Experiment configs share one layout:
///   {"scenario": <scenario document>, "experiment": {...parameters...}}
/// Every file written to out_dir carries the code version and the SHA-256 of
/// the effective config (after the seed override).
CommandResult cmd_simulate(const nlohmann::json& config, const RunContext& ctx);
CommandResult cmd_contract(const nlohmann::json& config, const RunContext& ctx);
CommandResult cmd_chaos(const nlohmann::json& config, const RunContext& ctx);
CommandResult cmd_moments(const nlohmann::json& config, const RunContext& ctx);
CommandResult cmd_girsanov(const nlohmann::json& config, const RunContext& ctx);
CommandResult cmd_rates(const nlohmann::json& config, const RunContext& ctx);

/// Dispatches on the subcommand name.
CommandResult run_command(const std::string& name, const nlohmann::json& config, const RunContext& ctx);

}  // namespace mvdelay
