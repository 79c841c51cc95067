#pragma once

#include "mfmlmc/pic_field.hpp"
#include "mfmlmc/random.hpp"

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <utility>

namespace mfmlmc {

using ConstVec = std::span<const double>;
using MutVec = std::span<double>;

/// Description of one McKean-Vlasov system
///
///     dX = drift(X, t, E[R(X)]) dt + diffusion(X, t, E[R(X)]) dW,   X_0 ~ initial_sampler,
///
/// with quantity of interest E[P(X_t)].
///
/// The coefficient functions receive a *field* vector rather than the raw mean field:
/// `field_transform` maps the mean-field estimate to the field once per time step (the
/// Poisson solve for the PIC model), and the identity is used when it is empty. Use
/// eval_drift / eval_diffusion to evaluate coefficients directly from a mean-field value.
///
/// All callables must be pure and safe to call concurrently on distinct outputs.
struct ModelSpec {
    std::string name;
    std::size_t state_dim = 1;      // d
    std::size_t noise_dim = 1;      // D
    std::size_t meanfield_dim = 1;  // gamma
    std::size_t payoff_dim = 1;     // eta
    std::size_t field_dim = 1;      // length of the transformed mean field
    double terminal_time = 1.0;
    double base_dt = 1.0;

    std::function<void(ConstVec meanfield, MutVec field)> field_transform;
    std::function<void(ConstVec x, double t, ConstVec field, MutVec out)> drift;
    /// Writes the d x D matrix row-major.
    std::function<void(ConstVec x, double t, ConstVec field, MutVec out)> diffusion;
    std::function<void(ConstVec x, MutVec out)> meanfield_fn;
    std::function<void(ConstVec x, MutVec out)> payoff_fn;
    std::function<void(RandomStream& rng, MutVec x)> initial_sampler;

    /// Number of base steps T / base_dt (validated by validate_model).
    std::size_t base_steps() const;
    /// Number of steps at level l: base_steps() * 2^l.
    std::size_t steps_at_level(int level) const;
    double dt_at_level(int level) const;
};

/// Throws ConfigError if dimensions are zero, callables are missing or T/base_dt is not integral.
void validate_model(const ModelSpec& model);

void apply_field_transform(const ModelSpec& model, ConstVec meanfield, MutVec field);
void eval_drift(const ModelSpec& model, ConstVec x, double t, ConstVec meanfield, MutVec out);
void eval_diffusion(const ModelSpec& model, ConstVec x, double t, ConstVec meanfield, MutVec out);

struct TimeGrid {
    double terminal_time;
    double base_dt;
};

// ---------------------------------------------------------------------------
// Linear model  dX = (a X + b E[X]) dt + sigma dW
// ---------------------------------------------------------------------------

struct LinearModelParams {
    double a = -0.5;
    double b = 0.8;
    double sigma = 0.70710678118654752440;  // sigma^2 = 1/2
    double init_mean = 1.0;
    double init_var = 0.25;
};

inline constexpr TimeGrid kLinearDefaultTime{1.0, 0.25};

ModelSpec make_linear_model(const LinearModelParams& params, TimeGrid time = kLinearDefaultTime);

struct Moments {
    double mean;
    double variance;
};

/// Exact mean and variance of the linear McKean-Vlasov process at time t.
/// Throws OracleError when a == 0 and ConfigError when t < 0.
Moments linear_exact_moments(const LinearModelParams& params, double t);

// ---------------------------------------------------------------------------
// Plane rotator  dX = {K (E[sin X] cos X - E[cos X] sin X) - sin X} dt + sqrt(2 tau) dW
// ---------------------------------------------------------------------------

struct RotatorModelParams {
    double coupling = 1.0;
    double temperature = 0.125;
    double init_mean = 1.5707963267948966192;  // pi/2
    double init_var = 2.3561944901923449288;   // 3 pi / 4, read as a variance
};

inline constexpr TimeGrid kRotatorDefaultTime{5.0, 5.0};

ModelSpec make_rotator_model(const RotatorModelParams& params,
                             TimeGrid time = kRotatorDefaultTime);

// ---------------------------------------------------------------------------
// 1D1V electrostatic particle-in-cell (Vlasov-Poisson)
// ---------------------------------------------------------------------------

struct PicModelParams {
    double domain_length = 20.0;
    double cell_size = 1.0;
    double init_x_mean = 10.0;
    double init_x_var = 6.0;
};

inline constexpr TimeGrid kPicDefaultTime{12.0, 1.0 / 3.0};

ModelSpec make_pic_model(const pic::GridSpec& grid, double init_x_mean, double init_x_var,
                         TimeGrid time = kPicDefaultTime);

// ---------------------------------------------------------------------------
// Model selection shared by the CLI and the study harness
// ---------------------------------------------------------------------------

enum class ModelKind { linear, rotator, pic };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

struct ModelChoice {
    ModelKind kind = ModelKind::linear;
    LinearModelParams linear{};
    RotatorModelParams rotator{};
    PicModelParams pic{};
    TimeGrid time = kLinearDefaultTime;
};

TimeGrid default_time_grid(ModelKind kind);
ModelSpec build_model(const ModelChoice& choice);

/// Canonical text key of a model configuration (used for reference-cache lookups).
std::string model_key(const ModelChoice& choice);

}  // namespace mfmlmc
