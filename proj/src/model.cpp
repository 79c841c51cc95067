#include "mfmlmc/model.hpp"

#include "mfmlmc/errors.hpp"
#include "mfmlmc/format.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>

namespace mfmlmc {

std::size_t ModelSpec::base_steps() const {
    return static_cast<std::size_t>(std::llround(terminal_time / base_dt));
}

std::size_t ModelSpec::steps_at_level(int level) const {
    return base_steps() << static_cast<unsigned>(level);
}

double ModelSpec::dt_at_level(int level) const {
    return std::ldexp(base_dt, -level);
}

void validate_model(const ModelSpec& model) {
    if (model.state_dim == 0 || model.noise_dim == 0 || model.meanfield_dim == 0 ||
        model.payoff_dim == 0 || model.field_dim == 0) {
        throw ConfigError("model '" + model.name + "': all dimensions must be positive");
    }
    if (!model.field_transform && model.field_dim != model.meanfield_dim) {
        throw ConfigError("model '" + model.name +
                          "': field_dim must equal meanfield_dim without a field transform");
    }
    if (!model.drift || !model.diffusion || !model.meanfield_fn || !model.payoff_fn ||
        !model.initial_sampler) {
        throw ConfigError("model '" + model.name + "': coefficient functions are incomplete");
    }
    if (!(model.terminal_time > 0.0) || !(model.base_dt > 0.0)) {
        throw ConfigError("model '" + model.name + "': terminal_time and base_dt must be positive");
    }
    const double ratio = model.terminal_time / model.base_dt;
    const double rounded = std::round(ratio);
    if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * rounded) {
        throw ConfigError("model '" + model.name + "': terminal_time / base_dt = " +
                          format_double(ratio) + " is not a positive integer");
    }
}

void apply_field_transform(const ModelSpec& model, ConstVec meanfield, MutVec field) {
    if (model.field_transform) {
        model.field_transform(meanfield, field);
    } else {
        std::copy(meanfield.begin(), meanfield.end(), field.begin());
    }
}

void eval_drift(const ModelSpec& model, ConstVec x, double t, ConstVec meanfield, MutVec out) {
    std::vector<double> field(model.field_dim);
    apply_field_transform(model, meanfield, field);
    model.drift(x, t, field, out);
}

void eval_diffusion(const ModelSpec& model, ConstVec x, double t, ConstVec meanfield,
                    MutVec out) {
    std::vector<double> field(model.field_dim);
    apply_field_transform(model, meanfield, field);
    model.diffusion(x, t, field, out);
}

ModelSpec make_linear_model(const LinearModelParams& params, TimeGrid time) {
    if (!(params.sigma >= 0.0)) throw ConfigError("linear model: sigma must be >= 0");
    if (!(params.init_var >= 0.0)) throw ConfigError("linear model: init_var must be >= 0");
    ModelSpec m;
    m.name = "linear";
    m.terminal_time = time.terminal_time;
    m.base_dt = time.base_dt;
    const double a = params.a, b = params.b, sigma = params.sigma;
    m.drift = [a, b](ConstVec x, double, ConstVec r, MutVec out) { out[0] = a * x[0] + b * r[0]; };
    m.diffusion = [sigma](ConstVec, double, ConstVec, MutVec out) { out[0] = sigma; };
    m.meanfield_fn = [](ConstVec x, MutVec out) { out[0] = x[0]; };
    m.payoff_fn = [](ConstVec x, MutVec out) { out[0] = x[0] * x[0]; };
    const double mean = params.init_mean, var = params.init_var;
    m.initial_sampler = [mean, var](RandomStream& rng, MutVec x) { x[0] = rng.normal(mean, var); };
    validate_model(m);
    return m;
}

Moments linear_exact_moments(const LinearModelParams& p, double t) {
    if (p.a == 0.0) throw OracleError("linear_exact_moments: a = 0 makes sigma^2/(2a) singular");
    if (!(t >= 0.0)) throw ConfigError("linear_exact_moments: t must be >= 0");
    const double s2 = p.sigma * p.sigma;
    const double offset = s2 / (2.0 * p.a);
    return Moments{p.init_mean * std::exp((p.a + p.b) * t),
                   (p.init_var + offset) * std::exp(2.0 * p.a * t) - offset};
}

ModelSpec make_rotator_model(const RotatorModelParams& params, TimeGrid time) {
    if (!(params.temperature > 0.0)) throw ConfigError("rotator model: temperature must be > 0");
    if (!(params.init_var > 0.0)) throw ConfigError("rotator model: init_var must be > 0");
    ModelSpec m;
    m.name = "rotator";
    m.meanfield_dim = 2;
    m.field_dim = 2;
    m.terminal_time = time.terminal_time;
    m.base_dt = time.base_dt;
    const double k = params.coupling;
    const double noise = std::sqrt(2.0 * params.temperature);
    m.drift = [k](ConstVec x, double, ConstVec r, MutVec out) {
        const double s = std::sin(x[0]), c = std::cos(x[0]);
        out[0] = k * (r[0] * c - r[1] * s) - s;
    };
    m.diffusion = [noise](ConstVec, double, ConstVec, MutVec out) { out[0] = noise; };
    m.meanfield_fn = [](ConstVec x, MutVec out) {
        out[0] = std::sin(x[0]);
        out[1] = std::cos(x[0]);
    };
    m.payoff_fn = [](ConstVec x, MutVec out) { out[0] = std::sin(x[0]); };
    const double mean = params.init_mean, var = params.init_var;
    m.initial_sampler = [mean, var](RandomStream& rng, MutVec x) { x[0] = rng.normal(mean, var); };
    validate_model(m);
    return m;
}

ModelSpec make_pic_model(const pic::GridSpec& grid, double init_x_mean, double init_x_var,
                         TimeGrid time) {
    if (!(init_x_var >= 0.0)) throw ConfigError("pic model: init_x_var must be >= 0");
    ModelSpec m;
    m.name = "pic";
    m.state_dim = 2;
    m.noise_dim = 1;
    m.meanfield_dim = grid.n_cells();
    m.payoff_dim = grid.n_cells();
    m.field_dim = grid.n_cells();
    m.terminal_time = time.terminal_time;
    m.base_dt = time.base_dt;

    auto solver = std::make_shared<const pic::PoissonSolver>(grid);
    m.field_transform = [solver](ConstVec rho, MutVec e) { solver->solve(rho, e); };
    m.drift = [grid](ConstVec x, double, ConstVec e, MutVec out) {
        out[0] = x[1];
        out[1] = pic::interpolate_field(e, x[0], grid);
    };
    m.diffusion = [](ConstVec, double, ConstVec, MutVec out) {
        out[0] = 0.0;
        out[1] = 0.0;
    };
    auto density = [grid](ConstVec x, MutVec out) {
        std::fill(out.begin(), out.end(), 0.0);
        pic::deposit_into(x[0], grid, out);
    };
    m.meanfield_fn = density;
    m.payoff_fn = density;
    m.initial_sampler = [grid, init_x_mean, init_x_var](RandomStream& rng, MutVec x) {
        x[0] = grid.wrap(rng.normal(init_x_mean, init_x_var));
        x[1] = rng.normal();
    };
    validate_model(m);
    return m;
}

std::string to_string(ModelKind kind) {
    switch (kind) {
        case ModelKind::linear: return "linear";
        case ModelKind::rotator: return "rotator";
        case ModelKind::pic: return "pic";
    }
    return "unknown";
}

ModelKind parse_model_kind(const std::string& name) {
    if (name == "linear") return ModelKind::linear;
    if (name == "rotator") return ModelKind::rotator;
    if (name == "pic") return ModelKind::pic;
    throw ConfigError("unknown model '" + name + "' (expected linear, rotator or pic)");
}

TimeGrid default_time_grid(ModelKind kind) {
    switch (kind) {
        case ModelKind::linear: return kLinearDefaultTime;
        case ModelKind::rotator: return kRotatorDefaultTime;
        case ModelKind::pic: return kPicDefaultTime;
    }
    return kLinearDefaultTime;
}

ModelSpec build_model(const ModelChoice& c) {
    switch (c.kind) {
        case ModelKind::linear: return make_linear_model(c.linear, c.time);
        case ModelKind::rotator: return make_rotator_model(c.rotator, c.time);
        case ModelKind::pic:
            return make_pic_model(pic::GridSpec(c.pic.domain_length, c.pic.cell_size),
                                  c.pic.init_x_mean, c.pic.init_x_var, c.time);
    }
    throw ConfigError("unknown model kind");
}

std::string model_key(const ModelChoice& c) {
    std::string key = "model=" + to_string(c.kind);
    auto add = [&key](const char* name, double v) {
        key += ';';
        key += name;
        key += '=';
        key += format_double(v);
    };
    add("T", c.time.terminal_time);
    add("base_dt", c.time.base_dt);
    switch (c.kind) {
        case ModelKind::linear:
            add("a", c.linear.a);
            add("b", c.linear.b);
            add("sigma", c.linear.sigma);
            add("init_mean", c.linear.init_mean);
            add("init_var", c.linear.init_var);
            break;
        case ModelKind::rotator:
            add("coupling", c.rotator.coupling);
            add("temperature", c.rotator.temperature);
            add("init_mean", c.rotator.init_mean);
            add("init_var", c.rotator.init_var);
            break;
        case ModelKind::pic:
            add("domain_length", c.pic.domain_length);
            add("cell_size", c.pic.cell_size);
            add("init_x_mean", c.pic.init_x_mean);
            add("init_x_var", c.pic.init_x_var);
            break;
    }
    return key;
}

}  // namespace mfmlmc
