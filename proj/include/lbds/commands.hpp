#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lbds/config.hpp"

namespace lbds {

struct CommandOptions {
  std::filesystem::path out_dir;
  /// Path batch cache to reuse instead of simulating (simulate, reflect, solve).
  std::optional<std::filesystem::path> batch_cache;
  /// Verification criteria to run; empty runs all of them.
  std::vector<int> criteria;
};

struct CommandResult {
  bool ok = true;
  nlohmann::json summary;
  /// Filled when ok is false: what failed and the numbers behind it.
  nlohmann::json diagnostic;
};

const std::vector<std::string>& command_names();

/// Runs one subcommand and writes its artifacts plus manifest.json into
/// options.out_dir. Throws InvalidArgument for bad configuration and
/// NumericalError for failed numerics.
CommandResult run_command(const std::string& name, const ExperimentConfig& config,
                          const CommandOptions& options, std::ostream& log);

}  // namespace lbds
