#pragma once

#include "mfmlmc/model.hpp"
#include "mfmlmc/parallel.hpp"
#include "mfmlmc/random.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace mfmlmc {

/// Vector-valued series sampled at t_n = n * dt, n = 0 .. steps. Values are stored row-major
/// (index-major, component-minor). Used for both the mean-field estimates R^l_n and the
/// payoff estimates P^l_n of a level.
struct TimeSeries {
    int level = 0;
    double dt = 0.0;
    std::size_t dim = 0;
    std::vector<double> values;

    TimeSeries() = default;
    TimeSeries(int level_, double dt_, std::size_t dim_, std::size_t points)
        : level(level_), dt(dt_), dim(dim_), values(points * dim_, 0.0) {}

    std::size_t points() const noexcept { return dim == 0 ? 0 : values.size() / dim; }
    std::size_t steps() const noexcept { return points() == 0 ? 0 : points() - 1; }
    std::span<const double> at(std::size_t n) const { return {values.data() + n * dim, dim}; }
    std::span<double> at(std::size_t n) { return {values.data() + n * dim, dim}; }
};

using MeanFieldSeries = TimeSeries;
using PayoffSeries = TimeSeries;

/// Weights of the linear interpolation at fractional index s:
/// value(s) = upper * v[ceil(s)] + lower * v[floor(s)].
struct LerpWeights {
    std::size_t floor_index;
    std::size_t ceil_index;
    double upper;
    double lower;
};

/// Throws std::out_of_range unless 0 <= s <= steps.
LerpWeights lerp_weights(double s, std::size_t steps);

void interpolate_into(const TimeSeries& series, double s, std::span<double> out);
std::vector<double> interpolate(const TimeSeries& series, double s);

/// Two consecutive fine increments summed into one coarse increment.
std::vector<double> coarsen_increments(std::span<const double> dw_even,
                                       std::span<const double> dw_odd);
void coarsen_increments_into(std::span<const double> dw_even, std::span<const double> dw_odd,
                             std::span<double> out);

/// Stream namespace of one computation: the root seed plus a restart epoch.
struct StreamSeed {
    std::uint64_t root = 0;
    std::uint32_t epoch = 0;
};

/// Terminal state of the N paired fine/coarse particles of one level.
struct CoupledEnsemble {
    int level = 1;
    std::size_t n_samples = 0;
    std::size_t state_dim = 0;
    std::vector<double> fine_states;    // n_samples x state_dim
    std::vector<double> coarse_states;  // n_samples x state_dim
    std::size_t fine_index = 0;
};

/// Per-step view handed to a StepObserver after the level-l estimate at fine index n is formed.
/// coarse_lower/coarse_upper hold the coarse states at floor(n/2) and ceil(n/2).
struct StepSnapshot {
    int level;
    std::size_t fine_index;
    std::size_t n_samples;
    std::size_t state_dim;
    std::span<const double> fine_states;
    std::span<const double> coarse_lower;
    std::span<const double> coarse_upper;
    std::span<const double> meanfield;         // R^l_n
    std::span<const double> coarse_meanfield;  // interpolate(R^{l-1}, n/2)
};

using StepObserver = std::function<void(const StepSnapshot&)>;

struct LevelOptions {
    const StepObserver* observer = nullptr;
    CoupledEnsemble* export_ensemble = nullptr;
};

struct LevelReport {
    int level = 0;
    double dt = 0.0;
    std::size_t n_samples = 0;
    PayoffSeries payoff_series;
    MeanFieldSeries meanfield_series;
    /// Max over n and components of the sample variance of P^l_n - P~^l_{n/2}
    /// (of P^0_n itself at level 0).
    double level_variance = 0.0;
    /// Same maximum restricted to even n, where fine and coarse paths share a time.
    double shared_time_variance = 0.0;
    std::vector<double> variance_by_step;
    /// max_n || P^l_n - P^{l-1}_{n/2} ||_inf; NaN at level 0.
    double level_diff = std::numeric_limits<double>::quiet_NaN();
    std::uint64_t particle_steps = 0;
};

struct RunResult {
    PayoffSeries final_payoff_series;
    std::vector<LevelReport> levels;
    std::uint64_t total_particle_steps = 0;
    double epsilon = 0.0;
    int levels_used = 0;
    std::vector<int> l_est_history;
    int restarts = 0;
    /// Times the level-count re-estimate asked for more samples at an already-computed level.
    int retro_demand_warnings = 0;
};

struct EngineConfig {
    std::size_t n0_initial = 256;
    std::size_t n1_initial = 128;
    std::size_t min_samples = 8;
    int max_level = 25;
    int max_restarts = 3;
    std::size_t workers = 1;
    StepObserver observer;

    /// Throws ConfigError on non-positive or inconsistent knobs.
    void validate() const;
};

/// Refinement hit EngineConfig::max_level before the termination test passed.
class RunawayRefinementError : public std::runtime_error {
public:
    RunawayRefinementError(const std::string& what, RunResult partial)
        : std::runtime_error(what), partial_(std::move(partial)) {}
    const RunResult& partial() const noexcept { return partial_; }

private:
    RunResult partial_;
};

/// Level 0: the single-level interacting-particle scheme with N_0 particles at base_dt.
LevelReport run_level0(const ModelSpec& model, std::size_t n_samples, StreamSeed streams,
                       WorkerPool& pool);

/// Level l >= 1: N_l coupled fine/coarse pairs fed by the completed level l-1 series.
LevelReport run_coupled_level(const ModelSpec& model, int level, std::size_t n_samples,
                              const MeanFieldSeries& coarse_meanfield,
                              const PayoffSeries& coarse_payoff, StreamSeed streams,
                              WorkerPool& pool, const LevelOptions& options = {});

/// Optimal per-level sample counts N_l = ceil(2/eps^2 sqrt(V_l dt_l) sum_m sqrt(V_m/dt_m)),
/// with variances floored at kVarianceFloor and counts floored at min_samples.
std::vector<std::size_t> compute_sample_counts(double eps, std::span<const double> variances,
                                               std::span<const double> dts,
                                               std::size_t min_samples = 1);

inline constexpr double kVarianceFloor = 1e-30;

/// ceil(2 log2(eps1/eps) + 2), floored at 1.
int estimate_levels_initial(double eps1, double eps);

/// max(L, L + 1 + ceil(2 log2(epsL/eps))).
int estimate_levels_update(int current_level, double eps_level, double eps);

/// Adaptive mean-field MLMC driver: sample, predict the level count, restart levels 0-1 at
/// the allocated counts and refine until eps_L <= eps (1 - 1/sqrt 2).
RunResult run_algorithm(const ModelSpec& model, double eps, const EngineConfig& config,
                        std::uint64_t seed);

/// Non-adaptive hierarchy with caller-fixed counts per level (counts.size() - 1 levels).
RunResult run_fixed_hierarchy(const ModelSpec& model, std::span<const std::size_t> counts,
                              const EngineConfig& config, std::uint64_t seed);

/// sum_l V_l / N_l: the independence approximation of the estimator variance.
double sampling_error_estimate(std::span<const LevelReport> levels);

/// Terminal states of an ensemble stepped at series.dt with the mean field frozen to
/// `series` (no feedback), drawn from the independent stream roles.
std::vector<double> run_frozen_ensemble(const ModelSpec& model, const MeanFieldSeries& series,
                                        std::size_t n_samples, StreamSeed streams,
                                        WorkerPool& pool);

}  // namespace mfmlmc
