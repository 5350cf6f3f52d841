#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "config.hpp"

namespace twist::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 2, kExitGate = 3, kExitIo = 4 };

struct CommandOptions {
  std::filesystem::path config_path;
  std::optional<std::filesystem::path> out_dir;
  std::optional<std::uint64_t> seed;
  int threads = 0;  // 0 = hardware concurrency
  bool full_scale = false;
};

const std::vector<std::string>& command_names();

/// Loads the config, applies the command-line overrides and runs `command`.
/// Errors are reported on `err` and mapped to the exit-code contract.
int run_command(std::string_view command, const CommandOptions& opts, std::ostream& log,
                std::ostream& err);

/// Same, for an already parsed config (overrides are still applied).
int run_command(std::string_view command, ExperimentConfig cfg, const CommandOptions& opts,
                std::ostream& log, std::ostream& err);

}  // namespace twist::cli
