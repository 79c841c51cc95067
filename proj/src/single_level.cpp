#include "mfmlmc/single_level.hpp"

#include "ensemble.hpp"
#include "mfmlmc/csv.hpp"
#include "mfmlmc/errors.hpp"
#include "mfmlmc/format.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace mfmlmc {

ModelSpec with_base_dt(const ModelSpec& model, double dt) {
    if (!(dt > 0.0)) throw ConfigError("single level: dt must be > 0");
    const double steps = model.terminal_time / dt;
    if (std::llround(steps) < 1 || std::abs(steps - std::round(steps)) > 1e-9 * steps) {
        throw ConfigError("single level: terminal_time / dt = " + format_double(steps) +
                          " is not a positive integer");
    }
    ModelSpec m = model;
    m.base_dt = dt;
    return m;
}

SingleLevelResult run_single_level(const ModelSpec& model, const SingleLevelConfig& config,
                                   WorkerPool& pool) {
    if (config.n_samples < 2) throw ConfigError("single level: n_samples must be >= 2");
    const ModelSpec m = with_base_dt(model, config.dt);
    validate_model(m);
    detail::EnsembleSetup setup;
    setup.dt = m.base_dt;
    setup.steps = m.base_steps();
    setup.n_samples = config.n_samples;
    setup.level_tag = 0;
    setup.streams = StreamSeed{config.seed, 0};
    auto run = detail::evolve_ensemble(m, setup, pool);
    return SingleLevelResult{std::move(run.payoff), std::move(run.meanfield), run.particle_steps,
                             std::move(run.terminal_variance)};
}

SingleLevelResult run_single_level(const ModelSpec& model, const SingleLevelConfig& config) {
    WorkerPool pool(1);
    return run_single_level(model, config, pool);
}

SingleLevelConfig default_reference_config(const ModelChoice& choice) {
    const double t = choice.time.terminal_time;
    switch (choice.kind) {
        case ModelKind::pic: {
            const pic::GridSpec grid(choice.pic.domain_length, choice.pic.cell_size);
            return SingleLevelConfig{choice.time.base_dt / 64.0, 10000 * grid.n_cells(), 1};
        }
        case ModelKind::rotator:
        case ModelKind::linear:
            break;
    }
    return SingleLevelConfig{t / 512.0, 1000000, 1};
}

std::string reference_key(const ModelChoice& choice, const SingleLevelConfig& config) {
    return model_key(choice) + ";ref_dt=" + format_double(config.dt) +
           ";ref_n=" + std::to_string(config.n_samples) + ";ref_seed=" + std::to_string(config.seed);
}

std::filesystem::path reference_path(const std::filesystem::path& dir, const ModelChoice& choice,
                                     const SingleLevelConfig& config) {
    // FNV-1a keeps file names stable across platforms and builds.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : reference_key(choice, config)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
    return dir / ("reference-" + to_string(choice.kind) + "-" + hex + ".csv");
}

ReferenceRun generate_reference(const ModelChoice& choice, const SingleLevelConfig& config,
                                const std::filesystem::path& dir, std::size_t workers) {
    const ModelSpec model = build_model(choice);
    WorkerPool pool(workers);
    SingleLevelResult res = run_single_level(model, config, pool);

    ReferenceRun ref;
    ref.key = reference_key(choice, config);
    ref.particle_steps = res.particle_steps;
    double stderr_sum = 0.0;
    for (double v : res.terminal_variance) {
        stderr_sum += std::sqrt(v / static_cast<double>(config.n_samples));
    }
    ref.terminal_stderr_mean = stderr_sum / static_cast<double>(res.terminal_variance.size());
    ref.payoff_series = std::move(res.payoff_series);

    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
    CsvDocument doc;
    doc.comments = {"key=" + ref.key, "particle_steps=" + std::to_string(ref.particle_steps),
                    "terminal_stderr_mean=" + format_double(ref.terminal_stderr_mean)};
    doc.header = kPayoffHeader;
    doc.rows = payoff_rows(ref.payoff_series);
    const auto path = reference_path(dir, choice, config);
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    write_csv(tmp, doc);
    std::filesystem::rename(tmp, path);
    return ref;
}

ReferenceRun load_reference(const ModelChoice& choice, const SingleLevelConfig& config,
                            const std::filesystem::path& dir) {
    const auto path = reference_path(dir, choice, config);
    if (!std::filesystem::exists(path)) {
        throw MissingReferenceError("no cached reference for model '" + to_string(choice.kind) +
                                    "' at " + path.string() +
                                    "; generate it first with the `reference` subcommand");
    }
    const CsvDocument doc = read_csv(path, kPayoffHeader);
    ReferenceRun ref;
    for (const auto& c : doc.comments) {
        const auto eq = c.find('=');
        if (eq == std::string::npos) continue;
        const std::string name = c.substr(0, eq);
        const std::string value = c.substr(eq + 1);
        if (name == "key") ref.key = value;
        if (name == "particle_steps") ref.particle_steps = static_cast<std::uint64_t>(parse_integer(value));
        if (name == "terminal_stderr_mean") ref.terminal_stderr_mean = parse_double(value);
    }
    if (ref.key != reference_key(choice, config)) {
        throw std::runtime_error(path.string() + ": cached key does not match the requested reference");
    }
    ref.payoff_series = parse_payoff_rows(doc.rows);
    return ref;
}

}  // namespace mfmlmc
