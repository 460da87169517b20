#pragma once

// Command implementations behind the `lumen` executable.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "lumen/config.hpp"
#include "lumen/metrics.hpp"

namespace lumen::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kConfigError = 2, kCalibrationFailure = 3 };

enum class OutputFormat { csv, json };

struct SweepSpec {
    std::string name;
    std::vector<std::string> values;
};

/// Parameters the sweep command understands.
const std::vector<std::string>& sweep_whitelist();

/// "NAME=v1,v2,..."; throws ConfigError("sweep") on a malformed or unknown
/// parameter.
SweepSpec parse_sweep(const std::string& text);

struct RunConfig {
    std::optional<std::filesystem::path> config_path;
    std::optional<std::filesystem::path> model_path;
    std::uint64_t seed = 1;
    int trials = 1;
    std::optional<TuningPolicy> policy;
    std::optional<NoiseConfig> noise;
    std::vector<SweepSpec> sweeps;
    std::filesystem::path out_dir = ".";
    OutputFormat format = OutputFormat::csv;
    int threads = 0;  // 0: LUMEN_THREADS or hardware concurrency

    /// Throws ConfigError when a referenced path does not exist or a count is
    /// out of range.
    void validate() const;
};

/// Applies a whitelisted sweep value to a configuration.
void apply_sweep_value(AcceleratorConfig& config, const std::string& name, const std::string& value);

/// Desk-scale models trained on the synthetic digits: "mlp", "bnn" and
/// "pruned" (50% magnitude pruning + 6-bit clustering of "mlp").
std::vector<std::pair<std::string, ModelBundle>> build_desk_models(std::uint64_t seed = 1);

/// Analog resolution of a calibrated accelerator under the noise toggles,
/// capped by the converters.
int report_resolution(const Accelerator& accel, const NoiseConfig& noise);

/// One simulated run: calibrate with `seed`, infer the model's test set.
SimReport simulate_once(const AcceleratorConfig& config, const ModelBundle& bundle, std::uint64_t seed,
                        const std::string& name, int threads);

int cmd_simulate(const RunConfig& run, std::ostream& log);
int cmd_sweep(const RunConfig& run, std::ostream& log);
int cmd_explore_resolution(const RunConfig& run, std::ostream& log);
int cmd_make_desk(const RunConfig& run, std::ostream& log);

/// Runs `body`, mapping lumen errors to exit codes and printing diagnostics.
template <typename F>
int guarded(std::ostream& log, F&& body);

}  // namespace lumen::cli

#include "cli_guard.inl"
