#pragma once

#include "mfmlmc/engine.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mfmlmc {

struct SingleLevelConfig {
    double dt = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t seed = 0;
};

struct SingleLevelResult {
    PayoffSeries payoff_series;
    MeanFieldSeries meanfield_series;
    std::uint64_t particle_steps = 0;
    /// Per-component sample variance of P at the terminal time.
    std::vector<double> terminal_variance;
};

/// Interacting-particle Euler-Maruyama scheme with a frozen per-step mean field. Uses the same
/// streams as level 0 of an MLMC run with the same seed, so both produce identical output
/// when dt equals the model's base step.
SingleLevelResult run_single_level(const ModelSpec& model, const SingleLevelConfig& config,
                                   WorkerPool& pool);
SingleLevelResult run_single_level(const ModelSpec& model, const SingleLevelConfig& config);

/// The model re-gridded to base step `dt` (same terminal time). Throws ConfigError unless
/// terminal_time / dt is a positive integer.
ModelSpec with_base_dt(const ModelSpec& model, double dt);

// ---------------------------------------------------------------------------
// Reference cache
// ---------------------------------------------------------------------------

struct ReferenceRun {
    std::string key;
    PayoffSeries payoff_series;
    std::uint64_t particle_steps = 0;
    /// Mean over payoff components of the terminal standard error sqrt(Var / N).
    double terminal_stderr_mean = 0.0;
};

/// Desk-scale over-resolved reference settings for a model (rotator: N = 1e6, dt = T/512;
/// PIC: 1e4 particles per cell, dt = base_dt/64; linear: N = 1e6, dt = T/512).
SingleLevelConfig default_reference_config(const ModelChoice& choice);

/// Canonical cache key of (model, params, dt, N, seed).
std::string reference_key(const ModelChoice& choice, const SingleLevelConfig& config);
std::filesystem::path reference_path(const std::filesystem::path& dir, const ModelChoice& choice,
                                     const SingleLevelConfig& config);

/// Runs the reference and writes it to the cache directory; returns the stored data.
ReferenceRun generate_reference(const ModelChoice& choice, const SingleLevelConfig& config,
                                const std::filesystem::path& dir, std::size_t workers = 1);

/// Loads a cached reference. Throws MissingReferenceError when the file does not exist and
/// std::runtime_error when it is malformed or its key does not match.
ReferenceRun load_reference(const ModelChoice& choice, const SingleLevelConfig& config,
                            const std::filesystem::path& dir);

}  // namespace mfmlmc
