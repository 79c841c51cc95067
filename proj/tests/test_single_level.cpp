#include "mfmlmc/diagnostics.hpp"
#include "mfmlmc/errors.hpp"
#include "mfmlmc/single_level.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace mfmlmc;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("mfmlmc-test-" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

}  // namespace

TEST_CASE("particle-step count") {
    const ModelSpec m = make_linear_model({});
    const SingleLevelResult r = run_single_level(m, {1.0 / 64, 100, 3});
    CHECK(r.particle_steps == 6400);
    CHECK(r.payoff_series.points() == 65);
    CHECK(r.payoff_series.dt == 1.0 / 64);
}

TEST_CASE("frozen dynamics give a constant series") {
    const ModelSpec m = mfmlmc::testing::simple_model(0.0, 0.0);
    const SingleLevelResult r = run_single_level(m, {0.125, 300, 9});
    for (std::size_t n = 0; n <= r.payoff_series.steps(); ++n) {
        CHECK(r.payoff_series.at(n)[0] == r.payoff_series.at(0)[0]);
    }
}

TEST_CASE("linear single-level run matches the discrete moments") {
    const LinearModelParams p;
    const ModelSpec m = make_linear_model(p);
    const std::size_t n = 200000;
    const SingleLevelResult r = run_single_level(m, {1.0 / 16, n, 12});
    const Moments disc = linear_discrete_moments(p, 1.0 / 16, 16);
    const double target = disc.mean * disc.mean + disc.variance;
    const double stderr_ = std::sqrt(r.terminal_variance[0] / n);
    CHECK(std::abs(r.payoff_series.at(16)[0] - target) <= 4 * stderr_);
}

TEST_CASE("invalid single-level configuration") {
    const ModelSpec m = make_linear_model({});
    CHECK_THROWS_AS(run_single_level(m, {0.3, 100, 1}), ConfigError);
    CHECK_THROWS_AS(run_single_level(m, {0.25, 1, 1}), ConfigError);
    CHECK_THROWS_AS(with_base_dt(m, 0.0), ConfigError);
    CHECK(with_base_dt(m, 0.125).base_steps() == 8);
}

TEST_CASE("reference cache round trip") {
    const fs::path dir = fresh_dir("refcache");
    ModelChoice choice;
    choice.kind = ModelKind::rotator;
    choice.time = default_time_grid(ModelKind::rotator);
    const SingleLevelConfig cfg{0.625, 2000, 4};

    CHECK_THROWS_AS(load_reference(choice, cfg, dir), MissingReferenceError);
    try {
        (void)load_reference(choice, cfg, dir);
    } catch (const MissingReferenceError& e) {
        CHECK(std::string(e.what()).find("reference") != std::string::npos);
    }

    const ReferenceRun made = generate_reference(choice, cfg, dir);
    CHECK(fs::exists(reference_path(dir, choice, cfg)));
    const ReferenceRun loaded = load_reference(choice, cfg, dir);
    CHECK(loaded.key == made.key);
    CHECK(loaded.payoff_series.values == made.payoff_series.values);
    CHECK(loaded.particle_steps == 2000 * 8);
    CHECK(loaded.terminal_stderr_mean == made.terminal_stderr_mean);

    const SingleLevelResult direct = run_single_level(with_base_dt(build_model(choice), 0.625), cfg);
    CHECK(direct.payoff_series.values == made.payoff_series.values);

    // A different configuration is a different cache entry.
    const SingleLevelConfig other{0.625, 2000, 5};
    CHECK(reference_path(dir, choice, other) != reference_path(dir, choice, cfg));
    CHECK_THROWS_AS(load_reference(choice, other, dir), MissingReferenceError);
    fs::remove_all(dir);
}

TEST_CASE("reference keys change with model parameters") {
    ModelChoice a;
    ModelChoice b;
    b.linear.b = 0.7;
    const SingleLevelConfig cfg{0.25, 100, 1};
    CHECK(reference_key(a, cfg) != reference_key(b, cfg));
    CHECK(reference_key(a, cfg) == reference_key(a, cfg));
}
