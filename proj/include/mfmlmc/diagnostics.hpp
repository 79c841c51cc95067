#pragma once

#include "mfmlmc/engine.hpp"
#include "mfmlmc/single_level.hpp"

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace mfmlmc {

// ---------------------------------------------------------------------------
// Statistics helpers
// ---------------------------------------------------------------------------

/// Ordinary least-squares slope of y against x. Throws ContractError for fewer than 2 points
/// or a degenerate x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

struct MeanStd {
    double mean = 0.0;
    double std = 0.0;  // sample standard deviation (n - 1), 0 for a single value
};
MeanStd mean_std(std::span<const double> values);

struct KsResult {
    double statistic = 0.0;
    double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic Kolmogorov distribution.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Mean and variance of the Euler-Maruyama iterates of the linear model in the
/// infinite-particle limit after `steps` steps of size dt.
Moments linear_discrete_moments(const LinearModelParams& params, double dt, std::size_t steps);

// ---------------------------------------------------------------------------
// Run-level checks
// ---------------------------------------------------------------------------

/// Observer that recomputes every level correction directly from the particle states and
/// records the worst relative mismatch against the engine's telescoped estimate.
class TelescopingMonitor {
public:
    explicit TelescopingMonitor(const ModelSpec& model);

    StepObserver observer();
    double max_relative_residual() const noexcept { return state_->worst; }
    std::size_t checked_steps() const noexcept { return state_->checked; }

private:
    struct State {
        double worst = 0.0;
        std::size_t checked = 0;
    };
    const ModelSpec* model_;
    std::shared_ptr<State> state_;
};

struct CouplingCheck {
    std::vector<KsResult> per_component;  // one per state component
    std::size_t n_samples = 0;
};

/// Terminal coarse members of level `level` against an independent ensemble stepped at
/// dt_{level-1} with the same frozen coarse mean-field series.
CouplingCheck coupling_distribution_check(const ModelSpec& model, int level, std::size_t n_samples,
                                          std::uint64_t seed, std::size_t workers = 1);

// ---------------------------------------------------------------------------
// Studies
// ---------------------------------------------------------------------------

struct ReferenceSource {
    enum class Kind { oracle, cached };
    Kind kind = Kind::oracle;
    SingleLevelConfig config{};
    std::filesystem::path cache_dir = ".";
};

struct StudyConfig {
    ModelChoice model{};
    std::vector<double> eps_list{0.2, 0.1, 0.05};
    std::size_t runs_per_eps = 20;
    std::uint64_t seed_base = 1;
    EngineConfig engine{};
    ReferenceSource reference{};
    bool record_timing = false;

    void validate() const;
};

struct StudyRow {
    double eps = 0.0;
    double mean_l1_error = 0.0;
    double std_l1_error = 0.0;
    double mean_particle_steps = 0.0;
    double mean_wall_seconds = 0.0;
    double mean_levels_used = 0.0;
};

/// Seed of run `run` at ε index `eps_index`.
std::uint64_t study_seed(std::uint64_t seed_base, std::size_t eps_index, std::size_t run);

/// Terminal-payoff target per component: the exact second moment for the linear model with an
/// oracle reference, else the cached reference. Also returns the reference standard error.
struct ErrorTarget {
    std::vector<double> terminal;
    double reference_stderr = 0.0;
};
ErrorTarget resolve_target(const StudyConfig& config);

/// Mean over components of |estimate - target| at the terminal index.
double terminal_l1_error(const PayoffSeries& estimate, std::span<const double> target);

/// Rows in ascending ε.
std::vector<StudyRow> convergence_study(const StudyConfig& config);

struct VarianceRow {
    int level = 0;
    double dt = 0.0;
    double mean_variance = 0.0;
    double std_variance = 0.0;
    double mean_shared_time_variance = 0.0;
};

struct VarianceScaling {
    std::vector<VarianceRow> rows;
    /// Slope of log2(mean V_l) against l over levels 2..max_level (NaN when any mean is 0).
    double slope = 0.0;
};

/// Fixed hierarchy to max_level with `samples_per_level` at every level, repeated for
/// `runs` seeds.
VarianceScaling variance_scaling_study(const ModelSpec& model, int max_level,
                                       std::size_t samples_per_level, std::size_t runs,
                                       std::uint64_t seed_base, std::size_t workers = 1);
VarianceScaling variance_scaling_study(const StudyConfig& config, int max_level,
                                       std::size_t samples_per_level);

struct BaselinePlan {
    double eps = 0.0;
    double dt = 0.0;
    std::size_t n_samples = 0;
    std::uint64_t particle_steps = 0;
};

/// Single-level plan matched to the largest ε and scaled N ∝ ε^-2, dt ∝ ε. For the linear
/// model the largest-ε point takes the coarsest dt = T/2^k whose discrete bias is at most
/// ε/√2 and N = ceil(2 Var[X^2] / ε^2); for other models it uses the base step and a pilot
/// estimate of the terminal payoff variance.
std::vector<BaselinePlan> plan_single_level_baseline(const StudyConfig& config);

struct BaselineRow {
    BaselinePlan plan;
    double mean_l1_error = 0.0;
    double mean_wall_seconds = 0.0;
};

struct ComplexityResult {
    std::vector<StudyRow> mlmc;
    std::vector<BaselineRow> single_level;
    double mlmc_slope = 0.0;          // d log(particle steps) / d log ε
    double single_level_slope = 0.0;
};

/// `baseline_runs` single-level runs per ε (0 skips running and only reports the plan).
ComplexityResult complexity_study(const StudyConfig& config, std::size_t baseline_runs = 1);

}  // namespace mfmlmc
