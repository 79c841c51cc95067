#include "ensemble.hpp"

#include "kernels.hpp"
#include "mfmlmc/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mfmlmc::detail {

void check_divergence(std::span<const std::size_t> bad_by_block, int level, std::size_t step) {
    for (std::size_t bad : bad_by_block) {
        if (bad != kNoSample) throw DivergenceError(level, step, bad);
    }
}

EnsembleRun evolve_ensemble(const ModelSpec& model, const EnsembleSetup& setup, WorkerPool& pool) {
    const std::size_t n = setup.n_samples;
    const std::size_t d = model.state_dim;
    const std::size_t noise = model.noise_dim;
    const std::size_t gamma = model.meanfield_dim;
    const std::size_t eta = model.payoff_dim;
    const std::size_t steps = setup.steps;
    const double dt = setup.dt;
    const double sqrt_dt = std::sqrt(dt);
    const std::size_t blocks = block_count(n);

    if (setup.frozen != nullptr &&
        (setup.frozen->points() != steps + 1 || setup.frozen->dim != gamma)) {
        throw ContractError("frozen mean-field series does not match the ensemble time grid");
    }

    EnsembleRun run;
    run.meanfield = MeanFieldSeries(setup.level_tag, dt, gamma, steps + 1);
    run.payoff = PayoffSeries(setup.level_tag, dt, eta, steps + 1);
    run.variance_by_step.assign(steps + 1, 0.0);
    run.particle_steps = static_cast<std::uint64_t>(n) * steps;

    std::vector<double> states(n * d);
    std::vector<RandomStream> streams(n);
    std::vector<double> payoff_values(n * eta);
    BlockSums sum_r(blocks, gamma), sum_p(blocks, eta), sum_sq(blocks, eta);
    std::vector<std::size_t> bad(blocks, kNoSample);

    // Evaluates R and P at the current states of a block and accumulates block sums.
    auto evaluate = [&](const BlockRange& br, Scratch& s) {
        auto r_acc = sum_r.block(br.index);
        auto p_acc = sum_p.block(br.index);
        std::fill(r_acc.begin(), r_acc.end(), 0.0);
        std::fill(p_acc.begin(), p_acc.end(), 0.0);
        for (std::size_t i = br.begin; i < br.end; ++i) {
            ConstVec x{states.data() + i * d, d};
            model.meanfield_fn(x, s.meanfield);
            MutVec p{payoff_values.data() + i * eta, eta};
            model.payoff_fn(x, p);
            for (std::size_t k = 0; k < gamma; ++k) r_acc[k] += s.meanfield[k];
            for (std::size_t k = 0; k < eta; ++k) p_acc[k] += p[k];
        }
    };

    auto reduce_step = [&](std::size_t step) {
        sum_r.mean_into(n, run.meanfield.at(step));
        sum_p.mean_into(n, run.payoff.at(step));
        ConstVec mean = run.payoff.at(step);
        pool.for_blocks(n, [&](const BlockRange& br) {
            auto acc = sum_sq.block(br.index);
            std::fill(acc.begin(), acc.end(), 0.0);
            for (std::size_t i = br.begin; i < br.end; ++i) {
                for (std::size_t k = 0; k < eta; ++k) {
                    const double dev = payoff_values[i * eta + k] - mean[k];
                    acc[k] += dev * dev;
                }
            }
        });
        std::vector<double> var(eta);
        sum_sq.sum_into(var);
        double vmax = 0.0;
        for (double& v : var) {
            v /= static_cast<double>(n - 1);
            vmax = std::max(vmax, v);
        }
        run.variance_by_step[step] = vmax;
        if (step == steps) run.terminal_variance = std::move(var);
    };

    pool.for_blocks(n, [&](const BlockRange& br) {
        Scratch s(model);
        for (std::size_t i = br.begin; i < br.end; ++i) {
            RandomStream init(StreamId{setup.streams.root, setup.streams.epoch, setup.level_tag, i,
                                       setup.initial_role});
            model.initial_sampler(init, MutVec{states.data() + i * d, d});
            streams[i] = RandomStream(StreamId{setup.streams.root, setup.streams.epoch,
                                               setup.level_tag, i, setup.brownian_role});
        }
        evaluate(br, s);
    });
    reduce_step(0);

    std::vector<double> field(model.field_dim);
    for (std::size_t step = 0; step < steps; ++step) {
        const ConstVec meanfield =
            setup.frozen != nullptr ? setup.frozen->at(step) : run.meanfield.at(step);
        apply_field_transform(model, meanfield, field);
        const double t = static_cast<double>(step) * dt;
        std::fill(bad.begin(), bad.end(), kNoSample);
        pool.for_blocks(n, [&](const BlockRange& br) {
            Scratch s(model);
            std::vector<double> dw(noise);
            for (std::size_t i = br.begin; i < br.end; ++i) {
                for (std::size_t k = 0; k < noise; ++k) dw[k] = sqrt_dt * streams[i].normal();
                MutVec x{states.data() + i * d, d};
                euler_step(model, x, t, field, dt, dw, s);
                if (bad[br.index] == kNoSample && !all_finite(x)) bad[br.index] = i;
            }
            evaluate(br, s);
        });
        check_divergence(bad, setup.level_tag, step + 1);
        reduce_step(step + 1);
    }

    if (setup.keep_terminal_states) run.terminal_states = std::move(states);
    return run;
}

}  // namespace mfmlmc::detail
