#pragma once

#include "mfmlmc/diagnostics.hpp"
#include "mfmlmc/engine.hpp"
#include "mfmlmc/errors.hpp"
#include "mfmlmc/model.hpp"

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace mfmlmc {

/// Bad command line or config file; maps to exit code 2.
class UsageError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

enum class Subcommand { run, convergence, variance_scaling, complexity, reference };

std::string to_string(Subcommand cmd);

struct CliConfig {
    Subcommand subcommand = Subcommand::run;
    ModelChoice model{};
    double eps = 0.1;
    std::vector<double> eps_list{0.2, 0.1, 0.05};
    std::uint64_t seed = 1;
    std::filesystem::path output_dir = ".";
    EngineConfig engine{};
    std::size_t runs = 20;
    int study_levels = 6;
    std::size_t study_samples = 1000;
    std::size_t baseline_runs = 1;
    SingleLevelConfig reference{};
    std::filesystem::path reference_dir = ".";
    bool record_timing = false;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Environment lookup through std::getenv.
EnvLookup process_env();

/// Parses `args` (without the program name). Precedence: flags, then the MFMLMC_OUTPUT_DIR
/// environment variable (output_dir only), then the `--config` file, then defaults.
/// Throws UsageError naming the offending key or flag.
CliConfig parse_config(const std::vector<std::string>& args, const EnvLookup& env = process_env());

/// Runs a parsed configuration and writes its CSV files. Returns the process exit code.
int execute(const CliConfig& config, std::ostream& out, std::ostream& err);

/// Full entry point: parse, execute and map failures to exit codes
/// (0 success, 1 runtime failure, 2 usage).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const EnvLookup& env = process_env());

}  // namespace mfmlmc
