#include "mfmlmc/cli.hpp"

#include "mfmlmc/csv.hpp"
#include "mfmlmc/format.hpp"
#include "mfmlmc/single_level.hpp"

#include <CLI11.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <ostream>

namespace mfmlmc {

namespace {

struct KeySpec {
    const char* key;   // section.name in the config file
    const char* flag;  // long flag without the leading dashes
    const char* help;
};

// Every accepted setting. Flags and config keys share one namespace so precedence is a
// plain overlay of string maps.
constexpr KeySpec kKeys[] = {
    {"run.model", "model", "model: linear, rotator or pic"},
    {"run.eps", "eps", "target tolerance for `run`"},
    {"run.seed", "seed", "root seed"},
    {"run.output_dir", "output-dir", "directory for CSV output"},
    {"time.terminal_time", "terminal-time", "terminal time T"},
    {"time.base_dt", "base-dt", "level-0 time step"},
    {"linear.a", "a", "linear drift coefficient"},
    {"linear.b", "b", "linear mean-field coefficient"},
    {"linear.sigma2", "sigma2", "linear diffusion variance sigma^2"},
    {"linear.init_mean", "init-mean", "linear initial mean"},
    {"linear.init_var", "init-var", "linear initial variance"},
    {"rotator.coupling", "coupling", "rotator coupling K"},
    {"rotator.temperature", "temperature", "rotator temperature tau"},
    {"rotator.init_mean", "rotator-init-mean", "rotator initial mean"},
    {"rotator.init_var", "rotator-init-var", "rotator initial variance"},
    {"pic.domain_length", "domain-length", "PIC domain length"},
    {"pic.cell_size", "cell-size", "PIC cell size"},
    {"pic.init_x_mean", "init-x-mean", "PIC initial position mean"},
    {"pic.init_x_var", "init-x-var", "PIC initial position variance"},
    {"engine.n0", "n0", "initial level-0 sample count"},
    {"engine.n1", "n1", "initial level-1 sample count"},
    {"engine.min_samples", "min-samples", "minimum samples per level"},
    {"engine.max_level", "max-level", "refinement safety cap"},
    {"engine.max_restarts", "max-restarts", "cap on level 0-1 restarts"},
    {"engine.workers", "workers", "worker threads"},
    {"study.eps_list", "eps-list", "comma-separated tolerances for studies"},
    {"study.runs", "runs", "independent runs per tolerance (seeds for variance-scaling)"},
    {"study.levels", "levels", "finest level of the variance-scaling study"},
    {"study.samples", "samples", "samples per level in the variance-scaling study"},
    {"study.baseline_runs", "baseline-runs", "single-level runs per tolerance in `complexity`"},
    {"study.record_timing", "record-timing", "measure wall time (true/false)"},
    {"reference.dt", "ref-dt", "reference time step"},
    {"reference.samples", "ref-samples", "reference particle count"},
    {"reference.seed", "ref-seed", "reference seed"},
    {"reference.dir", "reference-dir", "reference cache directory"},
};

constexpr const char* kOutputEnv = "MFMLMC_OUTPUT_DIR";

using Settings = std::map<std::string, std::string>;

const KeySpec* find_key(const std::string& key) {
    for (const auto& k : kKeys) {
        if (key == k.key) return &k;
    }
    return nullptr;
}

struct HelpRequest {
    std::string text;
};

Settings read_config_file(const std::string& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw UsageError("config file: " + std::string(e.what()));
    }
    Settings out;
    for (const auto& [section, node] : tree) {
        if (node.empty()) {
            throw UsageError("config file " + path + ": key '" + section + "' is outside a section");
        }
        for (const auto& [name, value] : node) {
            const std::string key = section + "." + name;
            if (find_key(key) == nullptr) {
                throw UsageError("config file " + path + ": unknown key '" + key + "'");
            }
            out[key] = value.get_value<std::string>();
        }
    }
    return out;
}

class SettingReader {
public:
    explicit SettingReader(const Settings& s) : s_(s) {}

    bool has(const std::string& key) const { return s_.count(key) != 0; }

    double real(const std::string& key, double fallback) const {
        if (!has(key)) return fallback;
        try {
            const double v = parse_double(s_.at(key));
            if (!std::isfinite(v)) throw std::invalid_argument("non-finite");
            return v;
        } catch (const std::invalid_argument&) {
            throw UsageError(label(key) + ": '" + s_.at(key) + "' is not a finite number");
        }
    }

    double positive(const std::string& key, double fallback) const {
        const double v = real(key, fallback);
        if (!(v > 0.0)) throw UsageError(label(key) + " must be > 0");
        return v;
    }

    double nonnegative(const std::string& key, double fallback) const {
        const double v = real(key, fallback);
        if (!(v >= 0.0)) throw UsageError(label(key) + " must be >= 0");
        return v;
    }

    long long integer(const std::string& key, long long fallback, long long min_value) const {
        long long v = fallback;
        if (has(key)) {
            try {
                v = parse_integer(s_.at(key));
            } catch (const std::invalid_argument&) {
                throw UsageError(label(key) + ": '" + s_.at(key) + "' is not an integer");
            }
        }
        if (v < min_value) throw UsageError(label(key) + " must be >= " + std::to_string(min_value));
        return v;
    }

    std::uint64_t seed(const std::string& key, std::uint64_t fallback) const {
        if (!has(key)) return fallback;
        const std::string& text = s_.at(key);
        std::uint64_t v = 0;
        const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
        if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
            throw UsageError(label(key) + ": '" + text + "' is not a nonnegative integer");
        }
        return v;
    }

    bool boolean(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        const std::string& v = s_.at(key);
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        throw UsageError(label(key) + ": '" + v + "' is not true/false");
    }

    std::string text(const std::string& key, const std::string& fallback) const {
        return has(key) ? s_.at(key) : fallback;
    }

    std::vector<double> real_list(const std::string& key, const std::vector<double>& fallback) const {
        if (!has(key)) return fallback;
        std::vector<double> out;
        const std::string& text = s_.at(key);
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = text.find(',', start);
            const std::string item = text.substr(start, comma == std::string::npos ? comma : comma - start);
            try {
                out.push_back(parse_double(item));
            } catch (const std::invalid_argument&) {
                throw UsageError(label(key) + ": '" + item + "' is not a number");
            }
            if (!(out.back() > 0.0) || !std::isfinite(out.back())) {
                throw UsageError(label(key) + ": every value must be > 0");
            }
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return out;
    }

    static std::string label(const std::string& key) {
        const KeySpec* k = find_key(key);
        return "--" + std::string(k != nullptr ? k->flag : key.c_str()) + " (" + key + ")";
    }

private:
    const Settings& s_;
};

CliConfig build_config(Subcommand cmd, const Settings& settings) {
    const SettingReader r(settings);
    CliConfig c;
    c.subcommand = cmd;
    try {
        c.model.kind = parse_model_kind(r.text("run.model", "linear"));
    } catch (const ConfigError&) {
        throw UsageError(SettingReader::label("run.model") + ": unknown model '" +
                         r.text("run.model", "") + "'");
    }
    const TimeGrid grid = default_time_grid(c.model.kind);
    c.model.time = TimeGrid{r.positive("time.terminal_time", grid.terminal_time),
                            r.positive("time.base_dt", grid.base_dt)};

    auto& lin = c.model.linear;
    lin.a = r.real("linear.a", lin.a);
    lin.b = r.real("linear.b", lin.b);
    lin.sigma = std::sqrt(r.nonnegative("linear.sigma2", lin.sigma * lin.sigma));
    lin.init_mean = r.real("linear.init_mean", lin.init_mean);
    lin.init_var = r.nonnegative("linear.init_var", lin.init_var);

    auto& rot = c.model.rotator;
    rot.coupling = r.real("rotator.coupling", rot.coupling);
    rot.temperature = r.positive("rotator.temperature", rot.temperature);
    rot.init_mean = r.real("rotator.init_mean", rot.init_mean);
    rot.init_var = r.positive("rotator.init_var", rot.init_var);

    auto& pic = c.model.pic;
    pic.domain_length = r.positive("pic.domain_length", pic.domain_length);
    pic.cell_size = r.positive("pic.cell_size", pic.cell_size);
    pic.init_x_mean = r.real("pic.init_x_mean", pic.init_x_mean);
    pic.init_x_var = r.nonnegative("pic.init_x_var", pic.init_x_var);

    try {
        (void)build_model(c.model);
    } catch (const ConfigError& e) {
        throw UsageError(std::string("model configuration: ") + e.what());
    }

    c.eps = r.positive("run.eps", c.eps);
    c.seed = r.seed("run.seed", c.seed);
    c.output_dir = r.text("run.output_dir", c.output_dir.string());
    if (c.output_dir.empty()) throw UsageError(SettingReader::label("run.output_dir") + " is empty");

    auto& e = c.engine;
    e.n0_initial = static_cast<std::size_t>(r.integer("engine.n0", static_cast<long long>(e.n0_initial), 2));
    e.n1_initial = static_cast<std::size_t>(r.integer("engine.n1", static_cast<long long>(e.n1_initial), 2));
    e.min_samples = static_cast<std::size_t>(r.integer("engine.min_samples", static_cast<long long>(e.min_samples), 2));
    e.max_level = static_cast<int>(r.integer("engine.max_level", e.max_level, 1));
    e.max_restarts = static_cast<int>(r.integer("engine.max_restarts", e.max_restarts, 0));
    e.workers = static_cast<std::size_t>(r.integer("engine.workers", static_cast<long long>(e.workers), 1));
    try {
        e.validate();
    } catch (const ConfigError& err) {
        throw UsageError(err.what());
    }

    c.eps_list = r.real_list("study.eps_list", c.eps_list);
    c.runs = static_cast<std::size_t>(r.integer("study.runs", static_cast<long long>(c.runs), 2));
    c.study_levels = static_cast<int>(r.integer("study.levels", c.study_levels, 2));
    c.study_samples = static_cast<std::size_t>(r.integer("study.samples", static_cast<long long>(c.study_samples), 2));
    c.baseline_runs = static_cast<std::size_t>(r.integer("study.baseline_runs", static_cast<long long>(c.baseline_runs), 0));
    c.record_timing = r.boolean("study.record_timing", c.record_timing);
    if (cmd == Subcommand::complexity && c.eps_list.size() < 3) {
        throw UsageError(SettingReader::label("study.eps_list") + ": complexity needs at least 3 values");
    }

    const SingleLevelConfig ref = default_reference_config(c.model);
    c.reference.dt = r.positive("reference.dt", ref.dt);
    c.reference.n_samples = static_cast<std::size_t>(r.integer("reference.samples", static_cast<long long>(ref.n_samples), 2));
    c.reference.seed = r.seed("reference.seed", ref.seed);
    try {
        (void)with_base_dt(build_model(c.model), c.reference.dt);
    } catch (const ConfigError& err) {
        throw UsageError(SettingReader::label("reference.dt") + ": " + err.what());
    }
    c.reference_dir = r.text("reference.dir", c.output_dir.string());
    return c;
}

StudyConfig study_config(const CliConfig& c) {
    StudyConfig s;
    s.model = c.model;
    s.eps_list = c.eps_list;
    s.runs_per_eps = c.runs;
    s.seed_base = c.seed;
    s.engine = c.engine;
    s.record_timing = c.record_timing;
    if (c.model.kind == ModelKind::linear) {
        s.reference.kind = ReferenceSource::Kind::oracle;
    } else {
        s.reference.kind = ReferenceSource::Kind::cached;
        s.reference.config = c.reference;
        s.reference.cache_dir = c.reference_dir;
    }
    return s;
}

void ensure_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

std::string fmt(double v) { return format_double(v); }

int do_run(const CliConfig& c, std::ostream& out) {
    const ModelSpec model = build_model(c.model);
    const auto start = std::chrono::steady_clock::now();
    const RunResult result = run_algorithm(model, c.eps, c.engine, c.seed);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    emit_run_csv(result, c.output_dir, RunCsvOptions{c.record_timing ? wall : 0.0});
    out << "run: model=" << to_string(c.model.kind) << " eps=" << fmt(c.eps)
        << " L=" << result.levels_used << " particle_steps=" << result.total_particle_steps
        << " restarts=" << result.restarts << " -> " << c.output_dir.string() << "\n";
    return 0;
}

int do_convergence(const CliConfig& c, std::ostream& out) {
    const auto rows = convergence_study(study_config(c));
    ensure_dir(c.output_dir);
    CsvDocument doc{{},
                    {"eps", "mean_l1_error", "std_l1_error", "mean_particle_steps",
                     "mean_wall_seconds", "mean_levels_used"},
                    {}};
    for (const auto& r : rows) {
        doc.rows.push_back({fmt(r.eps), fmt(r.mean_l1_error), fmt(r.std_l1_error),
                            fmt(r.mean_particle_steps), fmt(r.mean_wall_seconds),
                            fmt(r.mean_levels_used)});
        out << "convergence: eps=" << fmt(r.eps) << " mean_l1_error=" << fmt(r.mean_l1_error)
            << " mean_levels_used=" << fmt(r.mean_levels_used) << "\n";
    }
    write_csv(c.output_dir / "convergence.csv", doc);
    return 0;
}

int do_variance_scaling(const CliConfig& c, std::ostream& out) {
    const auto vs = variance_scaling_study(study_config(c), c.study_levels, c.study_samples);
    ensure_dir(c.output_dir);
    CsvDocument doc{{}, {"level", "dt", "mean_V", "std_V", "mean_shared_time_V"}, {}};
    for (const auto& r : vs.rows) {
        doc.rows.push_back({std::to_string(r.level), fmt(r.dt), fmt(r.mean_variance),
                            fmt(r.std_variance), fmt(r.mean_shared_time_variance)});
    }
    write_csv(c.output_dir / "variance_scaling.csv", doc);
    write_csv(c.output_dir / "variance_fit.csv",
              {{}, {"first_level", "last_level", "slope_log2_V_per_level"},
               {{"2", std::to_string(c.study_levels), fmt(vs.slope)}}});
    out << "variance-scaling: model=" << to_string(c.model.kind) << " slope=" << fmt(vs.slope) << "\n";
    return 0;
}

int do_complexity(const CliConfig& c, std::ostream& out) {
    const auto res = complexity_study(study_config(c), c.baseline_runs);
    ensure_dir(c.output_dir);
    CsvDocument doc{{},
                    {"method", "eps", "mean_particle_steps", "mean_l1_error", "mean_wall_seconds"},
                    {}};
    for (const auto& r : res.mlmc) {
        doc.rows.push_back({"mlmc", fmt(r.eps), fmt(r.mean_particle_steps), fmt(r.mean_l1_error),
                            fmt(r.mean_wall_seconds)});
    }
    CsvDocument plan{{}, {"eps", "dt", "n_samples", "particle_steps"}, {}};
    for (const auto& r : res.single_level) {
        doc.rows.push_back({"single_level", fmt(r.plan.eps),
                            fmt(static_cast<double>(r.plan.particle_steps)), fmt(r.mean_l1_error),
                            fmt(r.mean_wall_seconds)});
        plan.rows.push_back({fmt(r.plan.eps), fmt(r.plan.dt), std::to_string(r.plan.n_samples),
                             std::to_string(r.plan.particle_steps)});
    }
    write_csv(c.output_dir / "complexity.csv", doc);
    write_csv(c.output_dir / "baseline_plan.csv", plan);
    write_csv(c.output_dir / "complexity_fit.csv",
              {{}, {"method", "slope_log_steps_per_log_eps"},
               {{"mlmc", fmt(res.mlmc_slope)}, {"single_level", fmt(res.single_level_slope)}}});
    out << "complexity: mlmc_slope=" << fmt(res.mlmc_slope)
        << " single_level_slope=" << fmt(res.single_level_slope) << "\n";
    return 0;
}

int do_reference(const CliConfig& c, std::ostream& out) {
    const ReferenceRun ref = generate_reference(c.model, c.reference, c.reference_dir, c.engine.workers);
    out << "reference: " << reference_path(c.reference_dir, c.model, c.reference).string()
        << " particle_steps=" << ref.particle_steps
        << " terminal_stderr_mean=" << fmt(ref.terminal_stderr_mean) << "\n";
    return 0;
}

}  // namespace

std::string to_string(Subcommand cmd) {
    switch (cmd) {
        case Subcommand::run: return "run";
        case Subcommand::convergence: return "convergence";
        case Subcommand::variance_scaling: return "variance-scaling";
        case Subcommand::complexity: return "complexity";
        case Subcommand::reference: return "reference";
    }
    return "?";
}

EnvLookup process_env() {
    return [](const std::string& name) -> std::optional<std::string> {
        const char* v = std::getenv(name.c_str());
        if (v == nullptr) return std::nullopt;
        return std::string(v);
    };
}

CliConfig parse_config(const std::vector<std::string>& args, const EnvLookup& env) {
    CLI::App app{"Mean-field multilevel Monte Carlo for McKean-Vlasov processes", "mfmlmc"};
    app.require_subcommand(1, 1);
    std::map<std::string, std::string> flag_values;
    std::string config_path;
    bool record_timing = false;

    const Subcommand commands[] = {Subcommand::run, Subcommand::convergence,
                                   Subcommand::variance_scaling, Subcommand::complexity,
                                   Subcommand::reference};
    std::vector<std::pair<CLI::App*, Subcommand>> subs;
    std::vector<std::pair<CLI::Option*, std::string>> options;
    for (Subcommand cmd : commands) {
        CLI::App* sub = app.add_subcommand(to_string(cmd));
        sub->add_option("--config", config_path, "INI config file");
        for (const auto& k : kKeys) {
            if (std::string(k.key) == "study.record_timing") {
                options.emplace_back(sub->add_flag("--record-timing", record_timing, k.help), k.key);
                continue;
            }
            options.emplace_back(sub->add_option("--" + std::string(k.flag), flag_values[k.key], k.help),
                                 k.key);
        }
        subs.emplace_back(sub, cmd);
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        throw HelpRequest{app.help()};
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what());
    }

    Subcommand cmd = Subcommand::run;
    for (const auto& [sub, c] : subs) {
        if (sub->parsed()) cmd = c;
    }

    Settings settings;
    if (!config_path.empty()) settings = read_config_file(config_path);
    if (env) {
        if (auto dir = env(kOutputEnv)) settings["run.output_dir"] = *dir;
    }
    for (const auto& [opt, key] : options) {
        if (opt->count() == 0) continue;
        settings[key] = key == "study.record_timing" ? (record_timing ? "true" : "false")
                                                     : flag_values[key];
    }
    return build_config(cmd, settings);
}

int execute(const CliConfig& c, std::ostream& out, std::ostream& err) {
    try {
        switch (c.subcommand) {
            case Subcommand::run: return do_run(c, out);
            case Subcommand::convergence: return do_convergence(c, out);
            case Subcommand::variance_scaling: return do_variance_scaling(c, out);
            case Subcommand::complexity: return do_complexity(c, out);
            case Subcommand::reference: return do_reference(c, out);
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err,
            const EnvLookup& env) {
    std::vector<std::string> args;
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    CliConfig config;
    try {
        config = parse_config(args, env);
    } catch (const HelpRequest& h) {
        out << h.text;
        return 0;
    } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }
    return execute(config, out, err);
}

}  // namespace mfmlmc
