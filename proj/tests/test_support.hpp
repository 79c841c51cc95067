#pragma once

// Small hand-built models shared by the engine-level tests.

#include "mfmlmc/model.hpp"

#include <cmath>

namespace mfmlmc::testing {

/// dX = drift_scale * E[X] dt + noise dW with R = P = x and X_0 ~ N(init_mean, init_var).
inline ModelSpec simple_model(double drift_scale, double noise, double init_mean = 0.0,
                              double init_var = 1.0, TimeGrid time = {1.0, 0.25}) {
    ModelSpec m;
    m.name = "simple";
    m.terminal_time = time.terminal_time;
    m.base_dt = time.base_dt;
    m.drift = [drift_scale](ConstVec, double, ConstVec r, MutVec out) { out[0] = drift_scale * r[0]; };
    m.diffusion = [noise](ConstVec, double, ConstVec, MutVec out) { out[0] = noise; };
    m.meanfield_fn = [](ConstVec x, MutVec out) { out[0] = x[0]; };
    m.payoff_fn = [](ConstVec x, MutVec out) { out[0] = x[0]; };
    m.initial_sampler = [init_mean, init_var](RandomStream& rng, MutVec x) {
        x[0] = rng.normal(init_mean, init_var);
    };
    return m;
}

/// Pure additive noise: alpha = 0, constant beta.
inline ModelSpec additive_noise_model(double noise = 1.0, TimeGrid time = {1.0, 0.25}) {
    return simple_model(0.0, noise, 0.0, 1.0, time);
}

}  // namespace mfmlmc::testing
