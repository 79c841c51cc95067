#include "mfmlmc/diagnostics.hpp"

#include "mfmlmc/errors.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numbers>
#include <numeric>

namespace mfmlmc {

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) {
        throw ContractError("least_squares_slope: need at least two paired points");
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    if (!(sxx > 0.0)) throw ContractError("least_squares_slope: x values are all equal");
    return sxy / sxx;
}

MeanStd mean_std(std::span<const double> values) {
    if (values.empty()) throw ContractError("mean_std: no values");
    const double n = static_cast<double>(values.size());
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
    if (values.size() == 1) return {mean, 0.0};
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    return {mean, std::sqrt(ss / (n - 1.0))};
}

namespace {

// Survival function of the Kolmogorov distribution.
double kolmogorov_q(double lambda) {
    if (lambda <= 0.0) return 1.0;
    constexpr double pi = std::numbers::pi;
    if (lambda < 1.18) {
        const double w = -pi * pi / (8.0 * lambda * lambda);
        double sum = 0.0;
        for (int j = 1; j <= 9; j += 2) sum += std::exp(w * j * j);
        return std::clamp(1.0 - std::sqrt(2.0 * pi) / lambda * sum, 0.0, 1.0);
    }
    double sum = 0.0;
    for (int j = 1; j <= 100; ++j) {
        const double term = std::exp(-2.0 * j * j * lambda * lambda);
        sum += (j % 2 == 1 ? term : -term);
        if (term < 1e-18) break;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

}  // namespace

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw ContractError("ks_two_sample: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = na * nb / (na + nb);
    const double root = std::sqrt(ne);
    return {d, kolmogorov_q((root + 0.12 + 0.11 / root) * d)};
}

Moments linear_discrete_moments(const LinearModelParams& p, double dt, std::size_t steps) {
    double m = p.init_mean;
    double v = p.init_var;
    const double mean_factor = 1.0 + (p.a + p.b) * dt;
    const double dev_factor = (1.0 + p.a * dt) * (1.0 + p.a * dt);
    for (std::size_t n = 0; n < steps; ++n) {
        m *= mean_factor;
        v = dev_factor * v + p.sigma * p.sigma * dt;
    }
    return {m, v};
}

TelescopingMonitor::TelescopingMonitor(const ModelSpec& model)
    : model_(&model), state_(std::make_shared<State>()) {}

StepObserver TelescopingMonitor::observer() {
    return [model = model_, state = state_](const StepSnapshot& s) {
        const std::size_t gamma = model->meanfield_dim;
        const std::size_t d = s.state_dim;
        const double w = s.fine_index % 2 == 1 ? 0.5 : 0.0;
        std::vector<double> sum(gamma, 0.0), rf(gamma), rl(gamma), ru(gamma);
        for (std::size_t i = 0; i < s.n_samples; ++i) {
            model->meanfield_fn(s.fine_states.subspan(i * d, d), rf);
            model->meanfield_fn(s.coarse_lower.subspan(i * d, d), rl);
            model->meanfield_fn(s.coarse_upper.subspan(i * d, d), ru);
            for (std::size_t k = 0; k < gamma; ++k) sum[k] += rf[k] - (w * ru[k] + (1.0 - w) * rl[k]);
        }
        double scale = 0.0, residual = 0.0;
        for (std::size_t k = 0; k < gamma; ++k) {
            scale = std::max({scale, std::abs(s.meanfield[k]), std::abs(s.coarse_meanfield[k])});
            const double direct = sum[k] / static_cast<double>(s.n_samples);
            residual = std::max(residual, std::abs((s.meanfield[k] - s.coarse_meanfield[k]) - direct));
        }
        const double rel = scale > 0.0 ? residual / scale : residual;
        state->worst = std::max(state->worst, rel);
        ++state->checked;
    };
}

CouplingCheck coupling_distribution_check(const ModelSpec& model, int level, std::size_t n_samples,
                                          std::uint64_t seed, std::size_t workers) {
    if (level < 1) throw ConfigError("coupling check: level must be >= 1");
    EngineConfig cfg;
    cfg.workers = workers;
    const std::vector<std::size_t> counts(static_cast<std::size_t>(level), n_samples);
    const RunResult coarse = run_fixed_hierarchy(model, counts, cfg, seed);
    const LevelReport& prev = coarse.levels.back();

    WorkerPool pool(workers);
    CoupledEnsemble ensemble;
    LevelOptions opts;
    opts.export_ensemble = &ensemble;
    run_coupled_level(model, level, n_samples, prev.meanfield_series, prev.payoff_series,
                      StreamSeed{seed, 0}, pool, opts);
    const std::vector<double> independent =
        run_frozen_ensemble(model, prev.meanfield_series, n_samples, StreamSeed{seed, 0}, pool);

    CouplingCheck check;
    check.n_samples = n_samples;
    const std::size_t d = model.state_dim;
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<double> a(n_samples), b(n_samples);
        for (std::size_t i = 0; i < n_samples; ++i) {
            a[i] = ensemble.coarse_states[i * d + k];
            b[i] = independent[i * d + k];
        }
        check.per_component.push_back(ks_two_sample(std::move(a), std::move(b)));
    }
    return check;
}

void StudyConfig::validate() const {
    if (eps_list.empty()) throw ConfigError("study: eps_list must not be empty");
    for (double e : eps_list) {
        if (!(e > 0.0) || !std::isfinite(e)) throw ConfigError("study: every eps must be > 0");
    }
    if (runs_per_eps < 2) throw ConfigError("study: runs_per_eps must be >= 2");
    engine.validate();
}

std::uint64_t study_seed(std::uint64_t seed_base, std::size_t eps_index, std::size_t run) {
    return derive_seed(seed_base, eps_index, run);
}

ErrorTarget resolve_target(const StudyConfig& config) {
    ErrorTarget target;
    if (config.reference.kind == ReferenceSource::Kind::oracle) {
        if (config.model.kind != ModelKind::linear) {
            throw ConfigError("study: the exact oracle exists only for the linear model; use a "
                              "cached reference for model '" + to_string(config.model.kind) + "'");
        }
        const Moments mo = linear_exact_moments(config.model.linear, config.model.time.terminal_time);
        target.terminal = {mo.mean * mo.mean + mo.variance};
        return target;
    }
    const ReferenceRun ref =
        load_reference(config.model, config.reference.config, config.reference.cache_dir);
    const auto last = ref.payoff_series.at(ref.payoff_series.steps());
    target.terminal.assign(last.begin(), last.end());
    target.reference_stderr = ref.terminal_stderr_mean;
    return target;
}

double terminal_l1_error(const PayoffSeries& estimate, std::span<const double> target) {
    if (estimate.dim != target.size()) {
        throw ContractError("terminal_l1_error: payoff dimension does not match the reference");
    }
    const auto last = estimate.at(estimate.steps());
    double sum = 0.0;
    for (std::size_t k = 0; k < target.size(); ++k) sum += std::abs(last[k] - target[k]);
    return sum / static_cast<double>(target.size());
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<double> sorted_eps(const std::vector<double>& eps) {
    std::vector<double> out = eps;
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

std::vector<StudyRow> convergence_study(const StudyConfig& config) {
    config.validate();
    const ErrorTarget target = resolve_target(config);
    const ModelSpec model = build_model(config.model);
    const std::vector<double> eps_list = sorted_eps(config.eps_list);

    std::vector<StudyRow> rows;
    for (std::size_t e = 0; e < eps_list.size(); ++e) {
        std::vector<double> errors, steps, walls, levels;
        for (std::size_t r = 0; r < config.runs_per_eps; ++r) {
            const auto start = Clock::now();
            const RunResult res =
                run_algorithm(model, eps_list[e], config.engine, study_seed(config.seed_base, e, r));
            walls.push_back(config.record_timing ? seconds_since(start) : 0.0);
            errors.push_back(terminal_l1_error(res.final_payoff_series, target.terminal));
            steps.push_back(static_cast<double>(res.total_particle_steps));
            levels.push_back(static_cast<double>(res.levels_used));
        }
        const MeanStd err = mean_std(errors);
        rows.push_back(StudyRow{eps_list[e], err.mean, err.std, mean_std(steps).mean,
                                mean_std(walls).mean, mean_std(levels).mean});
    }
    return rows;
}

VarianceScaling variance_scaling_study(const ModelSpec& model, int max_level,
                                       std::size_t samples_per_level, std::size_t runs,
                                       std::uint64_t seed_base, std::size_t workers) {
    if (max_level < 2) throw ConfigError("variance scaling: max_level must be >= 2");
    if (runs < 1) throw ConfigError("variance scaling: runs must be >= 1");
    EngineConfig cfg;
    cfg.workers = workers;
    cfg.max_level = std::max(cfg.max_level, max_level);
    const std::vector<std::size_t> counts(static_cast<std::size_t>(max_level) + 1, samples_per_level);
    const std::size_t n_levels = counts.size();
    std::vector<std::vector<double>> v(n_levels), shared(n_levels);
    for (std::size_t r = 0; r < runs; ++r) {
        const RunResult res = run_fixed_hierarchy(model, counts, cfg, derive_seed(seed_base, r));
        for (std::size_t l = 0; l < n_levels; ++l) {
            v[l].push_back(res.levels[l].level_variance);
            shared[l].push_back(res.levels[l].shared_time_variance);
        }
    }
    VarianceScaling out;
    std::vector<double> xs, ys;
    bool degenerate = false;
    for (std::size_t l = 0; l < n_levels; ++l) {
        const MeanStd ms = mean_std(v[l]);
        out.rows.push_back(VarianceRow{static_cast<int>(l), model.dt_at_level(static_cast<int>(l)),
                                       ms.mean, ms.std, mean_std(shared[l]).mean});
        if (l >= 2) {
            if (!(ms.mean > 0.0)) degenerate = true;
            xs.push_back(static_cast<double>(l));
            ys.push_back(std::log2(ms.mean));
        }
    }
    out.slope = degenerate ? std::numeric_limits<double>::quiet_NaN() : least_squares_slope(xs, ys);
    return out;
}

VarianceScaling variance_scaling_study(const StudyConfig& config, int max_level,
                                       std::size_t samples_per_level) {
    config.engine.validate();
    return variance_scaling_study(build_model(config.model), max_level, samples_per_level,
                                  config.runs_per_eps, config.seed_base, config.engine.workers);
}

std::vector<BaselinePlan> plan_single_level_baseline(const StudyConfig& config) {
    config.validate();
    const std::vector<double> eps_list = sorted_eps(config.eps_list);
    const double eps_max = eps_list.back();
    const ModelSpec model = build_model(config.model);
    const double horizon = model.terminal_time;

    std::size_t steps0 = model.base_steps();
    double n0 = 0.0;
    if (config.model.kind == ModelKind::linear) {
        const auto& p = config.model.linear;
        const Moments exact = linear_exact_moments(p, horizon);
        const double second = exact.mean * exact.mean + exact.variance;
        for (std::size_t steps = 1;; steps *= 2) {
            const Moments disc = linear_discrete_moments(p, horizon / static_cast<double>(steps), steps);
            if (std::abs(disc.mean * disc.mean + disc.variance - second) <=
                eps_max / std::numbers::sqrt2) {
                steps0 = steps;
                break;
            }
            if (steps > (std::size_t{1} << 30)) throw ConfigError("baseline: bias calibration failed");
        }
        const double var_x2 = 4.0 * exact.mean * exact.mean * exact.variance +
                              2.0 * exact.variance * exact.variance;
        n0 = 2.0 * var_x2 / (eps_max * eps_max);
    } else {
        WorkerPool pool(config.engine.workers);
        const SingleLevelResult pilot = run_single_level(
            model, SingleLevelConfig{model.base_dt, 1000, derive_seed(config.seed_base, 0xB11D)}, pool);
        const double v = *std::max_element(pilot.terminal_variance.begin(), pilot.terminal_variance.end());
        n0 = 2.0 * v / (eps_max * eps_max);
    }

    std::vector<BaselinePlan> plans;
    for (double eps : eps_list) {
        const double ratio = eps_max / eps;
        const auto steps = static_cast<std::size_t>(
            std::max<long long>(1, std::llround(static_cast<double>(steps0) * ratio)));
        const double n_raw = n0 * ratio * ratio;
        const auto n = std::max<std::size_t>(
            2, static_cast<std::size_t>(std::ceil(n_raw - 1e-12 * std::max(1.0, n_raw))));
        plans.push_back(BaselinePlan{eps, horizon / static_cast<double>(steps), n,
                                     static_cast<std::uint64_t>(n) * steps});
    }
    return plans;
}

ComplexityResult complexity_study(const StudyConfig& config, std::size_t baseline_runs) {
    config.validate();
    if (config.eps_list.size() < 3) throw ConfigError("complexity study: need at least 3 eps values");
    ComplexityResult out;
    out.mlmc = convergence_study(config);
    const ErrorTarget target = resolve_target(config);
    const ModelSpec model = build_model(config.model);
    const auto plans = plan_single_level_baseline(config);
    WorkerPool pool(config.engine.workers);
    for (std::size_t e = 0; e < plans.size(); ++e) {
        BaselineRow row{plans[e], 0.0, 0.0};
        std::vector<double> errors, walls;
        for (std::size_t r = 0; r < baseline_runs; ++r) {
            const auto start = Clock::now();
            const SingleLevelResult res = run_single_level(
                model,
                SingleLevelConfig{plans[e].dt, plans[e].n_samples,
                                  derive_seed(study_seed(config.seed_base, e, r), 0x51)},
                pool);
            walls.push_back(config.record_timing ? seconds_since(start) : 0.0);
            errors.push_back(terminal_l1_error(res.payoff_series, target.terminal));
        }
        if (!errors.empty()) {
            row.mean_l1_error = mean_std(errors).mean;
            row.mean_wall_seconds = mean_std(walls).mean;
        }
        out.single_level.push_back(row);
    }
    std::vector<double> log_eps, log_mlmc, log_single;
    for (std::size_t e = 0; e < plans.size(); ++e) {
        log_eps.push_back(std::log(out.mlmc[e].eps));
        log_mlmc.push_back(std::log(out.mlmc[e].mean_particle_steps));
        log_single.push_back(std::log(static_cast<double>(plans[e].particle_steps)));
    }
    out.mlmc_slope = least_squares_slope(log_eps, log_mlmc);
    out.single_level_slope = least_squares_slope(log_eps, log_single);
    return out;
}

}  // namespace mfmlmc
