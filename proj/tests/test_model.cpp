#include "mfmlmc/errors.hpp"
#include "mfmlmc/model.hpp"

#include <doctest.h>

#include <cmath>
#include <numbers>
#include <vector>

using namespace mfmlmc;

namespace {

struct Eval {
    std::vector<double> drift, diffusion, meanfield, payoff;
};

Eval evaluate(const ModelSpec& m, ConstVec x, double t, ConstVec meanfield) {
    Eval e{std::vector<double>(m.state_dim), std::vector<double>(m.state_dim * m.noise_dim),
           std::vector<double>(m.meanfield_dim), std::vector<double>(m.payoff_dim)};
    eval_drift(m, x, t, meanfield, e.drift);
    eval_diffusion(m, x, t, meanfield, e.diffusion);
    m.meanfield_fn(x, e.meanfield);
    m.payoff_fn(x, e.payoff);
    return e;
}

bool finite(const std::vector<double>& v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

std::vector<ModelSpec> builtin_models() {
    return {make_linear_model({}), make_rotator_model({}),
            make_pic_model(pic::GridSpec(20.0, 1.0), 10.0, 6.0)};
}

}  // namespace

TEST_CASE("linear model examples") {
    const ModelSpec m = make_linear_model({});
    const double x = 2.0, r = 3.0;
    std::vector<double> out(1);
    eval_drift(m, std::span(&x, 1), 0.0, std::span(&r, 1), out);
    CHECK(out[0] == doctest::Approx(1.4).epsilon(1e-15));
    eval_diffusion(m, std::span(&x, 1), 0.7, std::span(&r, 1), out);
    CHECK(out[0] == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));

    const double five = 5.0;
    m.meanfield_fn(std::span(&five, 1), out);
    CHECK(out[0] == 5.0);
    m.payoff_fn(std::span(&five, 1), out);
    CHECK(out[0] == 25.0);
    CHECK(m.state_dim == 1);
    CHECK(m.noise_dim == 1);
    CHECK(m.meanfield_dim == 1);
    CHECK(m.payoff_dim == 1);
}

TEST_CASE("linear sampler draws the configured normal") {
    LinearModelParams p;
    p.init_mean = -1.5;
    p.init_var = 4.0;
    const ModelSpec m = make_linear_model(p);
    RandomStream rng(99);
    const int n = 100000;
    double sum = 0, sq = 0, x = 0;
    for (int i = 0; i < n; ++i) {
        m.initial_sampler(rng, std::span(&x, 1));
        sum += x;
        sq += x * x;
    }
    const double mean = sum / n;
    CHECK(std::abs(mean + 1.5) < 5.0 * 2.0 / std::sqrt(n));
    CHECK(sq / n - mean * mean == doctest::Approx(4.0).epsilon(0.03));
}

TEST_CASE("exact linear moments") {
    LinearModelParams p;
    const Moments at0 = linear_exact_moments(p, 0.0);
    CHECK(at0.mean == p.init_mean);
    CHECK(at0.variance == p.init_var);

    p.init_var = 0.0;
    const Moments at1 = linear_exact_moments(p, 1.0);
    CHECK(at1.mean == doctest::Approx(std::exp(0.3)).epsilon(1e-14));
    CHECK(at1.mean == doctest::Approx(1.34986).epsilon(1e-5));
    CHECK(at1.variance == doctest::Approx(0.5 - 0.5 * std::exp(-1.0)).epsilon(1e-14));
    CHECK(at1.variance == doctest::Approx(0.31606).epsilon(1e-4));

    CHECK(linear_exact_moments(p, 200.0).variance == doctest::Approx(0.5).epsilon(1e-12));

    p.a = 0.0;
    CHECK_THROWS_AS(linear_exact_moments(p, 1.0), OracleError);
    CHECK_THROWS_AS(linear_exact_moments(LinearModelParams{}, -1.0), ConfigError);
}

TEST_CASE("exact linear moments solve the moment ODEs") {
    const LinearModelParams p;
    const double s2 = p.sigma * p.sigma;
    const double h = 1e-5;
    for (int i = 0; i < 10; ++i) {
        const double t = 0.05 + 0.1 * i;
        const Moments up = linear_exact_moments(p, t + h);
        const Moments dn = linear_exact_moments(p, t - h);
        const Moments mid = linear_exact_moments(p, t);
        const double dm = (up.mean - dn.mean) / (2 * h);
        const double dv = (up.variance - dn.variance) / (2 * h);
        const double rhs_m = (p.a + p.b) * mid.mean;
        const double rhs_v = 2 * p.a * mid.variance + s2;
        CHECK(std::abs(dm - rhs_m) <= 1e-6 * std::abs(rhs_m));
        CHECK(std::abs(dv - rhs_v) <= 1e-6 * std::abs(rhs_v));
    }
}

TEST_CASE("rotator model examples") {
    const ModelSpec m = make_rotator_model({});
    const double x0 = 0.0;
    const double r01[2] = {0.0, 1.0};
    std::vector<double> out(1);
    eval_drift(m, std::span(&x0, 1), 0.0, r01, out);
    CHECK(out[0] == 0.0);
    eval_diffusion(m, std::span(&x0, 1), 0.0, r01, out);
    CHECK(out[0] == doctest::Approx(0.5).epsilon(1e-15));

    const double half_pi = std::numbers::pi / 2;
    std::vector<double> r(2);
    m.meanfield_fn(std::span(&half_pi, 1), r);
    CHECK(r[0] == doctest::Approx(1.0));
    CHECK(std::abs(r[1]) < 1e-15);
    CHECK(m.meanfield_dim == 2);
    CHECK(m.payoff_dim == 1);
    CHECK_THROWS_AS(make_rotator_model({1.0, 0.0}), ConfigError);
}

TEST_CASE("rotator drift is 2pi-periodic") {
    const ModelSpec m = make_rotator_model({});
    RandomStream rng(1);
    std::vector<double> a(1), b(1);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.normal(0.0, 4.0);
        const double shifted = x + 2.0 * std::numbers::pi;
        const double r[2] = {rng.uniform() * 2 - 1, rng.uniform() * 2 - 1};
        eval_drift(m, std::span(&x, 1), 0.0, r, a);
        eval_drift(m, std::span(&shifted, 1), 0.0, r, b);
        CHECK(std::abs(a[0] - b[0]) < 1e-13);
    }
}

TEST_CASE("PIC model examples") {
    const pic::GridSpec grid(20.0, 1.0);
    const ModelSpec m = make_pic_model(grid, 10.0, 6.0);
    CHECK(m.state_dim == 2);
    CHECK(m.meanfield_dim == 20);
    CHECK(m.payoff_dim == 20);

    const std::vector<double> uniform(20, 0.05);
    const double x[2] = {3.2, -1.5};
    std::vector<double> out(2), diff(2);
    eval_drift(m, x, 0.0, uniform, out);
    CHECK(out[0] == -1.5);
    CHECK(std::abs(out[1]) < 1e-15);
    eval_diffusion(m, x, 0.0, uniform, diff);
    CHECK(diff[0] == 0.0);
    CHECK(diff[1] == 0.0);

    std::vector<double> r(20), p(20);
    m.meanfield_fn(x, r);
    m.payoff_fn(x, p);
    CHECK(r == p);
    CHECK(r[3] == doctest::Approx(0.8));
    CHECK(r[4] == doctest::Approx(0.2));
}

TEST_CASE("PIC sampler wraps positions into the domain") {
    const ModelSpec m = make_pic_model(pic::GridSpec(20.0, 1.0), 10.0, 6.0);
    RandomStream rng(4);
    double x[2];
    for (int i = 0; i < 10000; ++i) {
        m.initial_sampler(rng, x);
        REQUIRE(x[0] >= 0.0);
        REQUIRE(x[0] < 20.0);
    }
}

TEST_CASE("built-in models produce finite outputs of declared size") {
    RandomStream rng(2024);
    for (const ModelSpec& m : builtin_models()) {
        CAPTURE(m.name);
        for (int i = 0; i < 1000; ++i) {
            std::vector<double> x(m.state_dim), r(m.meanfield_dim);
            m.initial_sampler(rng, x);
            for (double& v : x) v += rng.normal();
            for (double& v : r) v = rng.uniform();
            const Eval e = evaluate(m, x, rng.uniform() * m.terminal_time, r);
            REQUIRE(e.drift.size() == m.state_dim);
            REQUIRE(e.diffusion.size() == m.state_dim * m.noise_dim);
            REQUIRE(e.meanfield.size() == m.meanfield_dim);
            REQUIRE(e.payoff.size() == m.payoff_dim);
            REQUIRE(finite(e.drift));
            REQUIRE(finite(e.diffusion));
            REQUIRE(finite(e.meanfield));
            REQUIRE(finite(e.payoff));
        }
    }
}

TEST_CASE("model grids and validation") {
    const ModelSpec m = make_linear_model({});
    CHECK(m.base_steps() == 4);
    CHECK(m.steps_at_level(3) == 32);
    CHECK(m.dt_at_level(2) == 0.0625);
    CHECK_THROWS_AS(make_linear_model({}, TimeGrid{1.0, 0.3}), ConfigError);
    CHECK(parse_model_kind("pic") == ModelKind::pic);
    CHECK_THROWS_AS(parse_model_kind("heston"), ConfigError);
    CHECK(default_time_grid(ModelKind::rotator).base_dt == 5.0);
    CHECK(default_time_grid(ModelKind::pic).terminal_time == 12.0);
    ModelChoice a, b;
    b.linear.b = 0.7;
    CHECK(model_key(a) != model_key(b));
}
