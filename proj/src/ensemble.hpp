#pragma once

// Internal: the independent-particle stepping kernel shared by level 0, the single-level
// scheme and frozen-field ensembles.

#include "mfmlmc/engine.hpp"

#include <optional>

namespace mfmlmc::detail {

struct EnsembleRun {
    MeanFieldSeries meanfield;
    PayoffSeries payoff;
    std::vector<double> variance_by_step;   // max-component sample variance of P at each n
    std::vector<double> terminal_variance;  // per component at the final index
    std::vector<double> terminal_states;    // n_samples x state_dim
    std::uint64_t particle_steps = 0;
};

struct EnsembleSetup {
    double dt = 0.0;
    std::size_t steps = 0;
    std::size_t n_samples = 0;
    int level_tag = 0;
    StreamSeed streams{};
    StreamRole initial_role = StreamRole::initial;
    StreamRole brownian_role = StreamRole::brownian;
    /// When set, the coefficients use this series instead of the ensemble's own mean field.
    const MeanFieldSeries* frozen = nullptr;
    bool keep_terminal_states = false;
};

EnsembleRun evolve_ensemble(const ModelSpec& model, const EnsembleSetup& setup, WorkerPool& pool);

/// Throws DivergenceError for the lowest flagged sample, if any block flagged one.
void check_divergence(std::span<const std::size_t> bad_by_block, int level, std::size_t step);

inline constexpr std::size_t kNoSample = static_cast<std::size_t>(-1);

inline bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

}  // namespace mfmlmc::detail
