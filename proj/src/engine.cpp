#include "mfmlmc/engine.hpp"

#include "ensemble.hpp"
#include "kernels.hpp"
#include "mfmlmc/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace mfmlmc {

namespace {

// Guards ceil() against representation noise such as 2*log2(0.4/0.1) = 4.000000000000001.
double guarded_ceil(double x) {
    return std::ceil(x - 1e-12 * std::max(1.0, std::abs(x)));
}

}  // namespace

LerpWeights lerp_weights(double s, std::size_t steps) {
    if (!(s >= 0.0) || s > static_cast<double>(steps)) {
        throw std::out_of_range("interpolation index " + std::to_string(s) + " outside [0, " +
                                std::to_string(steps) + "]");
    }
    const double lo = std::floor(s);
    const double hi = std::ceil(s);
    return LerpWeights{static_cast<std::size_t>(lo), static_cast<std::size_t>(hi), s - lo,
                       1.0 - s + lo};
}

void interpolate_into(const TimeSeries& series, double s, std::span<double> out) {
    if (series.points() == 0) throw ContractError("interpolate: empty series");
    const LerpWeights w = lerp_weights(s, series.steps());
    const auto upper = series.at(w.ceil_index);
    const auto lower = series.at(w.floor_index);
    for (std::size_t k = 0; k < series.dim; ++k) out[k] = w.upper * upper[k] + w.lower * lower[k];
}

std::vector<double> interpolate(const TimeSeries& series, double s) {
    std::vector<double> out(series.dim);
    interpolate_into(series, s, out);
    return out;
}

void coarsen_increments_into(std::span<const double> dw_even, std::span<const double> dw_odd,
                             std::span<double> out) {
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = dw_even[k] + dw_odd[k];
}

std::vector<double> coarsen_increments(std::span<const double> dw_even,
                                       std::span<const double> dw_odd) {
    if (dw_even.size() != dw_odd.size()) {
        throw ContractError("coarsen_increments: increment dimensions differ");
    }
    std::vector<double> out(dw_even.size());
    coarsen_increments_into(dw_even, dw_odd, out);
    return out;
}

void EngineConfig::validate() const {
    if (n0_initial < 2 || n1_initial < 2) {
        throw ConfigError("engine: initial sample counts must be >= 2");
    }
    if (min_samples < 2) throw ConfigError("engine: min_samples must be >= 2");
    if (max_level < 1) throw ConfigError("engine: max_level must be >= 1");
    if (max_level > 40) throw ConfigError("engine: max_level must be <= 40");
    if (max_restarts < 0) throw ConfigError("engine: max_restarts must be >= 0");
    if (workers < 1) throw ConfigError("engine: workers must be >= 1");
}

LevelReport run_level0(const ModelSpec& model, std::size_t n_samples, StreamSeed streams,
                       WorkerPool& pool) {
    validate_model(model);
    if (n_samples < 2) throw ConfigError("run_level0: n_samples must be >= 2");
    detail::EnsembleSetup setup;
    setup.dt = model.base_dt;
    setup.steps = model.base_steps();
    setup.n_samples = n_samples;
    setup.level_tag = 0;
    setup.streams = streams;
    auto run = detail::evolve_ensemble(model, setup, pool);

    LevelReport report;
    report.level = 0;
    report.dt = setup.dt;
    report.n_samples = n_samples;
    report.payoff_series = std::move(run.payoff);
    report.meanfield_series = std::move(run.meanfield);
    report.variance_by_step = std::move(run.variance_by_step);
    report.level_variance =
        *std::max_element(report.variance_by_step.begin(), report.variance_by_step.end());
    report.shared_time_variance = report.level_variance;
    report.particle_steps = run.particle_steps;
    return report;
}

LevelReport run_coupled_level(const ModelSpec& model, int level, std::size_t n_samples,
                              const MeanFieldSeries& coarse_meanfield,
                              const PayoffSeries& coarse_payoff, StreamSeed seed,
                              WorkerPool& pool, const LevelOptions& options) {
    validate_model(model);
    if (level < 1) throw ConfigError("run_coupled_level: level must be >= 1");
    if (n_samples < 2) throw ConfigError("run_coupled_level: n_samples must be >= 2");
    const std::size_t coarse_steps = model.steps_at_level(level - 1);
    if (coarse_meanfield.points() != coarse_steps + 1 ||
        coarse_meanfield.dim != model.meanfield_dim) {
        throw ContractError("run_coupled_level: coarse mean-field series has " +
                            std::to_string(coarse_meanfield.points()) + " points, expected " +
                            std::to_string(coarse_steps + 1));
    }
    if (coarse_payoff.points() != coarse_steps + 1 || coarse_payoff.dim != model.payoff_dim) {
        throw ContractError("run_coupled_level: coarse payoff series does not match level " +
                            std::to_string(level - 1));
    }

    const std::size_t n = n_samples;
    const std::size_t d = model.state_dim;
    const std::size_t noise = model.noise_dim;
    const std::size_t gamma = model.meanfield_dim;
    const std::size_t eta = model.payoff_dim;
    const std::size_t fine_steps = 2 * coarse_steps;
    const double dt_fine = model.dt_at_level(level);
    const double dt_coarse = model.dt_at_level(level - 1);
    const double sqrt_dt = std::sqrt(dt_fine);
    const std::size_t blocks = block_count(n);

    LevelReport report;
    report.level = level;
    report.dt = dt_fine;
    report.n_samples = n;
    report.meanfield_series = MeanFieldSeries(level, dt_fine, gamma, fine_steps + 1);
    report.payoff_series = PayoffSeries(level, dt_fine, eta, fine_steps + 1);
    report.variance_by_step.assign(fine_steps + 1, 0.0);
    report.particle_steps = static_cast<std::uint64_t>(n) * (fine_steps + coarse_steps);

    std::vector<double> fine(n * d), coarse(n * d);
    std::vector<double> dw_even(n * noise), dw_odd(n * noise);
    // R and P evaluated on each coarse path at its two bracketing coarse indices.
    std::vector<double> coarse_r_lower(n * gamma), coarse_r_upper(n * gamma);
    std::vector<double> coarse_p_lower(n * eta), coarse_p_upper(n * eta);
    std::vector<double> payoff_diff(n * eta);
    std::vector<RandomStream> streams(n);
    detail::BlockSums sum_r(blocks, gamma), sum_p(blocks, eta), sum_sq(blocks, eta);
    std::vector<std::size_t> bad(blocks, detail::kNoSample);

    const bool observe = options.observer != nullptr && *options.observer;
    std::vector<double> coarse_snapshot;
    std::vector<double> coarse_interp_r(gamma), coarse_interp_p(eta);

    // Accumulates the per-sample corrections R - R~ and P - P~ at a fine index whose coarse
    // counterpart has interpolation weights w, assuming coarse R/P buffers are current.
    auto accumulate = [&](const BlockRange& br, const LerpWeights& w, detail::Scratch& s) {
        auto r_acc = sum_r.block(br.index);
        auto p_acc = sum_p.block(br.index);
        std::fill(r_acc.begin(), r_acc.end(), 0.0);
        std::fill(p_acc.begin(), p_acc.end(), 0.0);
        for (std::size_t i = br.begin; i < br.end; ++i) {
            ConstVec x{fine.data() + i * d, d};
            model.meanfield_fn(x, s.meanfield);
            model.payoff_fn(x, s.payoff);
            for (std::size_t k = 0; k < gamma; ++k) {
                const double tilde = w.upper * coarse_r_upper[i * gamma + k] +
                                     w.lower * coarse_r_lower[i * gamma + k];
                r_acc[k] += s.meanfield[k] - tilde;
            }
            for (std::size_t k = 0; k < eta; ++k) {
                const double tilde = w.upper * coarse_p_upper[i * eta + k] +
                                     w.lower * coarse_p_lower[i * eta + k];
                const double diff = s.payoff[k] - tilde;
                payoff_diff[i * eta + k] = diff;
                p_acc[k] += diff;
            }
        }
    };

    // Forms R^l_n and P^l_n at fine index n from the block sums and records the statistics.
    auto finish_index = [&](std::size_t idx) {
        const double s = 0.5 * static_cast<double>(idx);
        interpolate_into(coarse_meanfield, s, coarse_interp_r);
        interpolate_into(coarse_payoff, s, coarse_interp_p);
        auto r_hat = report.meanfield_series.at(idx);
        auto p_hat = report.payoff_series.at(idx);
        sum_r.mean_into(n, r_hat);
        sum_p.mean_into(n, p_hat);
        std::vector<double> correction_p(p_hat.begin(), p_hat.end());
        for (std::size_t k = 0; k < gamma; ++k) r_hat[k] += coarse_interp_r[k];
        double diff_norm = 0.0;
        for (std::size_t k = 0; k < eta; ++k) {
            p_hat[k] += coarse_interp_p[k];
            diff_norm = std::max(diff_norm, std::abs(p_hat[k] - coarse_interp_p[k]));
        }
        const double prev_diff = std::isnan(report.level_diff) ? 0.0 : report.level_diff;
        report.level_diff = std::max(prev_diff, diff_norm);

        pool.for_blocks(n, [&](const BlockRange& br) {
            auto acc = sum_sq.block(br.index);
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t i = br.begin; i < br.end; ++i) {
                for (std::size_t k = 0; k < eta; ++k) {
                    const double dev = payoff_diff[i * eta + k] - correction_p[k];
                    acc[k] += dev * dev;
                }
            }
        });
        std::vector<double> var(eta);
        sum_sq.sum_into(var);
        double vmax = 0.0;
        for (double v : var) vmax = std::max(vmax, v / static_cast<double>(n - 1));
        report.variance_by_step[idx] = vmax;

        if (observe) {
            const bool odd = idx % 2 == 1;
            StepSnapshot snap{level,
                              idx,
                              n,
                              d,
                              fine,
                              odd ? std::span<const double>(coarse_snapshot)
                                  : std::span<const double>(coarse),
                              coarse,
                              r_hat,
                              coarse_interp_r};
            (*options.observer)(snap);
        }
    };

    // n = 0: identical initial data on both members.
    pool.for_blocks(n, [&](const BlockRange& br) {
        detail::Scratch s(model);
        for (std::size_t i = br.begin; i < br.end; ++i) {
            RandomStream init(StreamId{seed.root, seed.epoch, level, i, StreamRole::initial});
            MutVec xf{fine.data() + i * d, d};
            model.initial_sampler(init, xf);
            std::copy(xf.begin(), xf.end(), coarse.begin() + static_cast<std::ptrdiff_t>(i * d));
            streams[i] = RandomStream(StreamId{seed.root, seed.epoch, level, i, StreamRole::brownian});
            ConstVec xc{coarse.data() + i * d, d};
            model.meanfield_fn(xc, MutVec{coarse_r_lower.data() + i * gamma, gamma});
            model.payoff_fn(xc, MutVec{coarse_p_lower.data() + i * eta, eta});
        }
        accumulate(br, lerp_weights(0.0, coarse_steps), s);
    });
    finish_index(0);

    std::vector<double> field_fine(model.field_dim), field_coarse(model.field_dim);
    for (std::size_t m = 0; m < coarse_steps; ++m) {
        const std::size_t even = 2 * m;
        const double t_even = static_cast<double>(even) * dt_fine;
        const double t_coarse = static_cast<double>(m) * dt_coarse;

        // (a)-(d): draw both fine increments, advance fine by one sub-step with R^l_{2m}, advance
        // coarse by one step with the frozen R^{l-1}_m and the summed increment.
        apply_field_transform(model, report.meanfield_series.at(even), field_fine);
        apply_field_transform(model, coarse_meanfield.at(m), field_coarse);
        if (observe) coarse_snapshot = coarse;
        std::fill(bad.begin(), bad.end(), detail::kNoSample);
        const LerpWeights half = lerp_weights(static_cast<double>(m) + 0.5, coarse_steps);
        pool.for_blocks(n, [&](const BlockRange& br) {
            detail::Scratch s(model);
            std::vector<double> dw_sum(noise);
            for (std::size_t i = br.begin; i < br.end; ++i) {
                MutVec dw1{dw_even.data() + i * noise, noise};
                MutVec dw2{dw_odd.data() + i * noise, noise};
                for (std::size_t k = 0; k < noise; ++k) dw1[k] = sqrt_dt * streams[i].normal();
                for (std::size_t k = 0; k < noise; ++k) dw2[k] = sqrt_dt * streams[i].normal();
                MutVec xf{fine.data() + i * d, d};
                detail::euler_step(model, xf, t_even, field_fine, dt_fine, dw1, s);
                coarsen_increments_into(dw1, dw2, dw_sum);
                MutVec xc{coarse.data() + i * d, d};
                detail::euler_step(model, xc, t_coarse, field_coarse, dt_coarse, dw_sum, s);
                if (bad[br.index] == detail::kNoSample && (!detail::all_finite(xf) ||
                                                           !detail::all_finite(xc))) {
                    bad[br.index] = i;
                }
                model.meanfield_fn(xc, MutVec{coarse_r_upper.data() + i * gamma, gamma});
                model.payoff_fn(xc, MutVec{coarse_p_upper.data() + i * eta, eta});
            }
            // (e): corrections at the odd fine index against the half-index coarse values.
            accumulate(br, half, s);
        });
        detail::check_divergence(bad, level, even + 1);
        finish_index(even + 1);

        // (f): second fine sub-step with R^l_{2m+1}.
        apply_field_transform(model, report.meanfield_series.at(even + 1), field_fine);
        const double t_odd = static_cast<double>(even + 1) * dt_fine;
        std::fill(bad.begin(), bad.end(), detail::kNoSample);
        coarse_r_lower.swap(coarse_r_upper);
        coarse_p_lower.swap(coarse_p_upper);
        const LerpWeights node = lerp_weights(static_cast<double>(m + 1), coarse_steps);
        pool.for_blocks(n, [&](const BlockRange& br) {
            detail::Scratch s(model);
            for (std::size_t i = br.begin; i < br.end; ++i) {
                MutVec xf{fine.data() + i * d, d};
                detail::euler_step(model, xf, t_odd, field_fine, dt_fine,
                                   ConstVec{dw_odd.data() + i * noise, noise}, s);
                if (bad[br.index] == detail::kNoSample && !detail::all_finite(xf)) bad[br.index] = i;
            }
            // At a shared index only the lower (current) coarse buffer carries weight.
            accumulate(br, LerpWeights{node.floor_index, node.ceil_index, 0.0, 1.0}, s);
        });
        detail::check_divergence(bad, level, even + 2);
        finish_index(even + 2);
    }

    report.level_variance =
        *std::max_element(report.variance_by_step.begin(), report.variance_by_step.end());
    report.shared_time_variance = 0.0;
    for (std::size_t idx = 0; idx <= fine_steps; idx += 2) {
        report.shared_time_variance = std::max(report.shared_time_variance, report.variance_by_step[idx]);
    }

    if (options.export_ensemble != nullptr) {
        auto& e = *options.export_ensemble;
        e.level = level;
        e.n_samples = n;
        e.state_dim = d;
        e.fine_index = fine_steps;
        e.fine_states = std::move(fine);
        e.coarse_states = std::move(coarse);
    }
    return report;
}

std::vector<std::size_t> compute_sample_counts(double eps, std::span<const double> variances,
                                               std::span<const double> dts,
                                               std::size_t min_samples) {
    if (variances.empty() || variances.size() != dts.size()) {
        throw ContractError("compute_sample_counts: variances and dts must be nonempty and equal length");
    }
    if (!(eps > 0.0)) throw ConfigError("compute_sample_counts: eps must be > 0");
    double total = 0.0;
    for (std::size_t l = 0; l < variances.size(); ++l) {
        if (!(dts[l] > 0.0)) throw ContractError("compute_sample_counts: dt must be > 0");
        total += std::sqrt(std::max(variances[l], kVarianceFloor) / dts[l]);
    }
    std::vector<std::size_t> counts(variances.size());
    const double scale = 2.0 / (eps * eps);
    constexpr double kMaxCount = 0x1.0p53;
    for (std::size_t l = 0; l < variances.size(); ++l) {
        const double v = std::max(variances[l], kVarianceFloor);
        const double raw = guarded_ceil(scale * std::sqrt(v * dts[l]) * total);
        const double clamped = std::min(std::max(raw, 0.0), kMaxCount);
        counts[l] = std::max(min_samples, static_cast<std::size_t>(clamped));
    }
    return counts;
}

int estimate_levels_initial(double eps1, double eps) {
    if (!(eps > 0.0)) throw ConfigError("estimate_levels_initial: eps must be > 0");
    if (!(eps1 > 0.0)) return 1;
    const double est = guarded_ceil(2.0 * std::log2(eps1 / eps) + 2.0);
    return est < 1.0 ? 1 : static_cast<int>(std::min(est, 1e6));
}

int estimate_levels_update(int current_level, double eps_level, double eps) {
    if (!(eps > 0.0)) throw ConfigError("estimate_levels_update: eps must be > 0");
    if (!(eps_level > 0.0)) return current_level;
    const double est =
        static_cast<double>(current_level) + 1.0 + guarded_ceil(2.0 * std::log2(eps_level / eps));
    return static_cast<int>(std::max(static_cast<double>(current_level), std::min(est, 1e6)));
}

namespace {

// Variances for levels 0..l_est: measured up to `known`, then extrapolated with V_l/dt_l held
// at the last measured ratio.
void extrapolated_variances(const ModelSpec& model, std::span<const LevelReport> known, int l_est,
                            std::vector<double>& variances, std::vector<double>& dts) {
    variances.clear();
    dts.clear();
    const LevelReport& last = known.back();
    const double ratio = last.level_variance / last.dt;
    for (int l = 0; l <= std::max(l_est, last.level); ++l) {
        const double dt = model.dt_at_level(l);
        dts.push_back(dt);
        if (static_cast<std::size_t>(l) < known.size()) {
            variances.push_back(known[static_cast<std::size_t>(l)].level_variance);
        } else {
            variances.push_back(ratio * dt);
        }
    }
}

LevelOptions level_options(const EngineConfig& config) {
    LevelOptions opts;
    if (config.observer) opts.observer = &config.observer;
    return opts;
}

}  // namespace

RunResult run_algorithm(const ModelSpec& model, double eps, const EngineConfig& config,
                        std::uint64_t seed) {
    validate_model(model);
    config.validate();
    if (!(eps > 0.0) || !std::isfinite(eps)) throw ConfigError("run_algorithm: eps must be > 0");

    WorkerPool pool(config.workers);
    const LevelOptions opts = level_options(config);
    const double threshold = eps * (1.0 - 1.0 / std::numbers::sqrt2);

    RunResult result;
    result.epsilon = eps;
    std::size_t n0 = std::max(config.n0_initial, config.min_samples);
    std::size_t n1 = std::max(config.n1_initial, config.min_samples);
    std::uint32_t epoch = 0;
    std::vector<double> variances, dts;

    for (;; ++epoch) {
        const StreamSeed streams{seed, epoch};
        LevelReport l0 = run_level0(model, n0, streams, pool);
        LevelReport l1 = run_coupled_level(model, 1, n1, l0.meanfield_series, l0.payoff_series,
                                           streams, pool, opts);
        result.total_particle_steps += l0.particle_steps + l1.particle_steps;
        const int l_est = estimate_levels_initial(l1.level_diff, eps);
        result.l_est_history.push_back(l_est);
        result.levels = {std::move(l0), std::move(l1)};
        extrapolated_variances(model, result.levels, l_est, variances, dts);
        const auto counts = compute_sample_counts(eps, variances, dts, config.min_samples);
        const bool undersampled = counts[0] > n0 || counts[1] > n1;
        if (!undersampled || result.restarts >= config.max_restarts) break;
        n0 = std::max(n0, counts[0]);
        n1 = std::max(n1, counts[1]);
        ++result.restarts;
    }

    const StreamSeed streams{seed, epoch};
    int level = 1;
    while (result.levels.back().level_diff > threshold) {
        if (level + 1 > config.max_level) {
            result.levels_used = level;
            result.final_payoff_series = result.levels.back().payoff_series;
            const std::string what = "run_algorithm: max_level " +
                                     std::to_string(config.max_level) +
                                     " reached with eps_L = " +
                                     std::to_string(result.levels.back().level_diff);
            throw RunawayRefinementError(what, std::move(result));
        }
        ++level;
        const LevelReport& prev = result.levels.back();
        const std::size_t n_level = std::max(config.min_samples, (prev.n_samples + 1) / 2);
        LevelReport next = run_coupled_level(model, level, n_level, prev.meanfield_series,
                                             prev.payoff_series, streams, pool, opts);
        result.total_particle_steps += next.particle_steps;
        result.levels.push_back(std::move(next));
        const int l_est = estimate_levels_update(level, result.levels.back().level_diff, eps);
        result.l_est_history.push_back(l_est);
        extrapolated_variances(model, result.levels, l_est, variances, dts);
        const auto counts = compute_sample_counts(eps, variances, dts, config.min_samples);
        if (counts[static_cast<std::size_t>(level)] > n_level) ++result.retro_demand_warnings;
    }

    result.levels_used = level;
    result.final_payoff_series = result.levels.back().payoff_series;
    return result;
}

RunResult run_fixed_hierarchy(const ModelSpec& model, std::span<const std::size_t> counts,
                              const EngineConfig& config, std::uint64_t seed) {
    validate_model(model);
    config.validate();
    if (counts.empty()) throw ConfigError("run_fixed_hierarchy: at least one level is required");
    WorkerPool pool(config.workers);
    const LevelOptions opts = level_options(config);
    const StreamSeed streams{seed, 0};
    RunResult result;
    result.levels.push_back(run_level0(model, counts[0], streams, pool));
    result.total_particle_steps += result.levels.back().particle_steps;
    for (std::size_t l = 1; l < counts.size(); ++l) {
        const LevelReport& prev = result.levels.back();
        LevelReport next = run_coupled_level(model, static_cast<int>(l), counts[l],
                                             prev.meanfield_series, prev.payoff_series, streams,
                                             pool, opts);
        result.total_particle_steps += next.particle_steps;
        result.levels.push_back(std::move(next));
    }
    result.levels_used = static_cast<int>(counts.size()) - 1;
    result.final_payoff_series = result.levels.back().payoff_series;
    return result;
}

double sampling_error_estimate(std::span<const LevelReport> levels) {
    if (levels.empty()) throw ContractError("sampling_error_estimate: no levels");
    double total = 0.0;
    for (const auto& l : levels) total += l.level_variance / static_cast<double>(l.n_samples);
    return total;
}

std::vector<double> run_frozen_ensemble(const ModelSpec& model, const MeanFieldSeries& series,
                                        std::size_t n_samples, StreamSeed streams,
                                        WorkerPool& pool) {
    validate_model(model);
    if (n_samples < 2) throw ConfigError("run_frozen_ensemble: n_samples must be >= 2");
    detail::EnsembleSetup setup;
    setup.dt = series.dt;
    setup.steps = series.steps();
    setup.n_samples = n_samples;
    setup.level_tag = series.level;
    setup.streams = streams;
    setup.initial_role = StreamRole::independent_initial;
    setup.brownian_role = StreamRole::independent_brownian;
    setup.frozen = &series;
    setup.keep_terminal_states = true;
    return detail::evolve_ensemble(model, setup, pool).terminal_states;
}

}  // namespace mfmlmc
