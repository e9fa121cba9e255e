#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "io.hpp"

namespace opinionlab::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kRuntimeError = 3, kBudgetError = 4 };

/// Raised for anything wrong with the configuration itself.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Options {
    std::string command;
    std::string config_path;
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;
    unsigned jobs = 1;
    bool quiet = false;
    std::vector<std::string> overrides;
    std::size_t stride = 1;
};

namespace detail {

inline json parse_override_value(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception&) {
        return json(text);
    }
}

/// Applies "a.b.c=value" onto the config; value is JSON when it parses, else a string.
inline void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "' is not key.path=value");
    std::string pointer;
    std::stringstream path(assignment.substr(0, eq));
    for (std::string part; std::getline(path, part, '.');) {
        if (part.empty()) throw ConfigError("empty segment in override key '" + assignment + "'");
        pointer += "/" + part;
    }
    config[json::json_pointer(pointer)] = parse_override_value(assignment.substr(eq + 1));
}

inline json load_config(const Options& opt) {
    json config = json::object();
    if (!opt.config_path.empty()) {
        std::ifstream in(opt.config_path);
        if (!in) throw ConfigError("cannot open config file '" + opt.config_path + "'");
        try {
            config = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError("malformed config '" + opt.config_path + "': " + e.what());
        }
        if (!config.is_object()) throw ConfigError("config root must be a JSON object");
    }
    for (const auto& o : opt.overrides) apply_override(config, o);
    return config;
}

inline void check_top_level(const json& config, std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : config.items()) {
        bool ok = false;
        for (auto a : allowed) ok = ok || key == a;
        if (!ok) throw ConfigError("unknown config key '" + key + "' for this command");
    }
}

inline std::filesystem::path prepare_out_dir(const Options& opt) {
    std::filesystem::path dir = opt.out_dir;
    if (const char* env = std::getenv("OPINIONLAB_OUT"); env && *env) dir = env;
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir))
        throw ConfigError("cannot create output directory '" + dir.string() + "'");
    return dir;
}

inline void write_json(const std::filesystem::path& file, const json& j) {
    std::ofstream out(file);
    if (!out) throw Error(Errc::invalid_argument, "cannot write " + file.string());
    out << j.dump(2) << '\n';
}

struct Common {
    SystemParams params;
    PlatformFunction function = PlatformFunction::sgn_eps(0.05);
    Topology topology = TwoAgent{};
    IntegratorConfig integrator;
};

inline Common parse_common(const json& config) {
    Common c;
    if (config.contains("params")) c.params = params_from_json(config.at("params"));
    if (!config.contains("function")) throw ConfigError("config is missing 'function'");
    c.function = function_from_json(config.at("function"));
    if (config.contains("topology")) c.topology = topology_from_json(config.at("topology"));
    if (config.contains("integrator")) c.integrator = integrator_from_json(config.at("integrator"));
    validate_integrator(c.integrator, c.integrator.max_time.value_or(default_max_time(c.params)));
    return c;
}

template <class T>
T config_value(const json& config, const char* key, T fallback) {
    if (!config.contains(key)) return fallback;
    try {
        return config.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key '") + key + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Commands. Each splits into a parse step (config errors) and a run step.
// ---------------------------------------------------------------------------

inline std::function<int()> prepare_simulate(const json& config, const Options& opt, std::ostream& log) {
    check_top_level(config, {"params", "function", "topology", "integrator", "x0"});
    const Common c = parse_common(config);
    if (!config.contains("x0")) throw ConfigError("simulate needs an initial state 'x0'");
    OpinionState x0{config_value<std::vector<double>>(config, "x0", {}), 0.0};
    check_dimension(x0.x.size(), c.topology);
    validate_opinions(x0.x);
    const auto dir = prepare_out_dir(opt);
    return [=, &log] {
        const auto traj = integrate(x0, c.topology, c.function, c.params, c.integrator);
        const auto report = classify_state(OpinionState{traj.final_sample().x, traj.final_sample().t}, c.topology,
                                           c.function, c.params);
        {
            std::ofstream csv(dir / "trajectory.csv");
            write_trajectory_csv(csv, traj, opt.stride);
        }
        json summary{{"converged", traj.converged},
                     {"final_state", traj.final_sample().x},
                     {"t_final", traj.final_sample().t},
                     {"final_residual", traj.final_residual},
                     {"classification", to_json(report)},
                     {"max_excursion", traj.max_excursion},
                     {"clamp_events", traj.clamp_events},
                     {"accepted_steps", traj.accepted_steps},
                     {"rejected_steps", traj.rejected_steps},
                     {"params", to_json(c.params)},
                     {"function", to_json(c.function)},
                     {"topology", to_json(c.topology)},
                     {"integrator", to_json(c.integrator)}};
        write_json(dir / "summary.json", summary);
        if (!opt.quiet)
            log << "simulate: " << to_string(report.classification) << " at t=" << traj.final_sample().t
                << (traj.converged ? " (converged)" : " (not converged)") << '\n';
        return int(kOk);
    };
}

inline CertificateOptions parse_certificate_options(const json& config) {
    CertificateOptions o;
    if (!config.contains("certificate")) return o;
    const auto& j = config.at("certificate");
    opinionlab::detail::check_keys(j, {"max_depth", "max_cells", "origin_radius"}, "certificate");
    o.max_depth = opinionlab::detail::get_or(j, "max_depth", o.max_depth, "certificate");
    o.max_cells = opinionlab::detail::get_or(j, "max_cells", o.max_cells, "certificate");
    o.origin_radius = opinionlab::detail::get_or(j, "origin_radius", o.origin_radius, "certificate");
    return o;
}

inline std::function<int()> prepare_classify(const json& config, const Options& opt, std::ostream& log) {
    check_top_level(config, {"params", "function", "grid_resolution", "certificate"});
    const Common c = parse_common(config);
    const int grid = config_value(config, "grid_resolution", 64);
    if (grid < 16) throw ConfigError("grid_resolution must be >= 16");
    const auto copts = parse_certificate_options(config);
    const auto dir = prepare_out_dir(opt);
    return [=, &log] {
        const auto cert = harmonizing_certificate(c.function, c.params, grid, copts);
        json j = to_json(cert);
        j["function"] = to_json(c.function);
        j["params"] = to_json(c.params);
        j["properties"] = to_json(c.function.properties());
        write_json(dir / "certificate.json", j);
        if (!opt.quiet) log << "classify-function: " << to_string(cert.verdict) << '\n';
        return int(kOk);
    };
}

inline json state_entry(const std::vector<double>& x, const Common& c, const char* family = nullptr, int k = 0) {
    std::vector<double> clamped(x.size());
    std::transform(x.begin(), x.end(), clamped.begin(), [](double v) { return std::clamp(v, -1.0, 1.0); });
    const auto report = classify_state(OpinionState{clamped, 0.0}, c.topology, c.function, c.params);
    json j = to_json(report);
    j["state"] = x;
    if (family) {
        j["family"] = family;
        j["k"] = k;
    }
    return j;
}

inline std::function<int()> prepare_enumerate(const json& config, const Options& opt, std::ostream& log) {
    check_top_level(config, {"params", "function", "topology", "search_budget"});
    const Common c = parse_common(config);
    if (std::holds_alternative<Graph>(c.topology))
        throw ConfigError("enumerate supports two_agent and complete topologies only");
    const auto budget = config_value<std::size_t>(config, "search_budget", 1'000'000);
    const auto dir = prepare_out_dir(opt);
    return [=, &log] {
        const Tolerances tol;
        const std::size_t n = agent_count(c.topology);
        const bool sign = std::holds_alternative<SgnEps>(c.function.kind());

        json closed = json::array();
        json diff = json::array();
        json audit = nullptr;
        if (sign) {
            if (std::holds_alternative<TwoAgent>(c.topology)) {
                for (const auto& s : enumerate_sign_two_agent(c.params)) closed.push_back(state_entry(s.x, c));
            } else {
                for (const auto& s : enumerate_sign_complete(static_cast<int>(n), c.params))
                    closed.push_back(state_entry(s.x, c, to_string(s.family), s.k));
            }
            for (const auto& s : closed)
                if (s.at("residual").get<double>() > tol.eq_tol) diff.push_back(s);
        }

        const auto oracle = oracle_equilibria(c.topology, c.function, c.params, budget, tol);
        json oracle_json = json::array();
        for (const auto& e : oracle) oracle_json.push_back(to_json(e));
        if (sign && std::holds_alternative<Complete>(c.topology))
            audit = to_json(audit_sign_complete(static_cast<int>(n), c.params,
                                                std::get<SgnEps>(c.function.kind()).epsilon, budget));

        json out{{"params", to_json(c.params)},
                 {"function", to_json(c.function)},
                 {"topology", to_json(c.topology)},
                 {"closed_form", sign ? closed : json(nullptr)},
                 {"oracle", oracle_json},
                 {"oracle_epsilon_independent", epsilon_independent(oracle).size()},
                 {"diff", diff},
                 {"audit", audit}};
        write_json(dir / "equilibria.json", out);
        if (!opt.quiet)
            log << "enumerate: " << oracle.size() << " oracle equilibria, " << diff.size()
                << " closed-form states failing residual check\n";
        return int(kOk);
    };
}

inline std::function<int()> prepare_vector_field(const json& config, const Options& opt, std::ostream& log) {
    check_top_level(config, {"params", "function", "topology", "resolution", "search_budget"});
    const Common c = parse_common(config);
    if (!std::holds_alternative<TwoAgent>(c.topology)) throw ConfigError("vector-field needs the two_agent topology");
    const int resolution = config_value(config, "resolution", 41);
    if (resolution < 2) throw ConfigError("vector-field resolution must be >= 2");
    const auto budget = config_value<std::size_t>(config, "search_budget", 1'000'000);
    const auto dir = prepare_out_dir(opt);
    return [=, &log] {
        const auto grid = vector_field_grid(c.function, c.params, resolution);
        {
            std::ofstream csv(dir / "vector_field.csv");
            write_vector_field_csv(csv, grid);
        }
        const auto all = oracle_equilibria(c.topology, c.function, c.params, budget);
        json eqs = json::array(), band = json::array();
        for (const auto& e : all) {
            json j = to_json(e);
            j["label"] = e.report.classification == Classification::PersistentDisagreement ? "red" : "green";
            (e.band_interior ? band : eqs).push_back(std::move(j));
        }
        json sidecar{{"params", to_json(c.params)},
                     {"function", to_json(c.function)},
                     {"resolution", resolution},
                     {"equilibria", eqs},
                     {"band_interior_equilibria", band},
                     {"legend", {{"green", "consensus"}, {"red", "persistent disagreement"}}}};
        write_json(dir / "vector_field.json", sidecar);
        if (!opt.quiet) log << "vector-field: " << grid.size() << " points, " << eqs.size() << " equilibria\n";
        return int(kOk);
    };
}

inline std::vector<std::uint64_t> parse_seeds(const json& config, const SbmConfig& base,
                                              std::optional<std::uint64_t> seed_flag) {
    const std::uint64_t first = seed_flag.value_or(base.seed);
    if (!config.contains("seeds")) return {first};
    const auto& s = config.at("seeds");
    try {
        if (s.is_array()) return s.get<std::vector<std::uint64_t>>();
        const auto count = s.get<std::uint64_t>();
        if (count == 0) throw ConfigError("seeds must be positive");
        std::vector<std::uint64_t> out(count);
        for (std::uint64_t i = 0; i < count; ++i) out[i] = first + i;
        return out;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config key 'seeds': ") + e.what());
    }
}

inline std::function<int()> prepare_sbm(const json& config, const Options& opt, std::ostream& log) {
    check_top_level(config, {"params", "function", "integrator", "sbm", "seeds", "t_eval"});
    const Common c = parse_common(config);
    if (!config.contains("sbm")) throw ConfigError("sbm command needs an 'sbm' section");
    const SbmConfig base = sbm_config_from_json(config.at("sbm"));
    const auto seeds = parse_seeds(config, base, opt.seed);
    const double t_eval = config_value(config, "t_eval", 100.0);
    if (!(t_eval > 0.0)) throw ConfigError("t_eval must be > 0");
    require_monotone(c.function);
    const auto dir = prepare_out_dir(opt);
    const unsigned jobs = std::max(1u, opt.jobs);
    return [=, &log] {
        if (!opt.quiet)
            for (const auto& w : validate_sbm(base)) log << "warning: " << w << '\n';
        std::vector<std::string> lines(seeds.size());
        std::vector<std::exception_ptr> failures(seeds.size());
        std::atomic<std::size_t> next{0};
        auto worker = [&] {
            for (std::size_t i = next++; i < seeds.size(); i = next++) {
                try {
                    SbmConfig cfg = base;
                    cfg.seed = seeds[i];
                    auto r = run_sbm_experiment(cfg, c.function, c.params, c.integrator, t_eval);
                    lines[i] = to_json(r).dump();
                } catch (...) {
                    failures[i] = std::current_exception();
                }
            }
        };
        std::vector<std::thread> pool;
        for (unsigned t = 1; t < std::min<std::size_t>(jobs, seeds.size()); ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
        for (const auto& f : failures)
            if (f) std::rethrow_exception(f);

        std::ofstream out(dir / "sbm_results.jsonl");
        for (const auto& l : lines) out << l << '\n';
        if (!opt.quiet) log << "sbm: wrote " << lines.size() << " result lines\n";
        return int(kOk);
    };
}

} // namespace detail

/// Runs the command line and returns the process exit status:
/// 0 success, 2 configuration error, 3 runtime failure, 4 budget exceeded.
inline int run(int argc, const char* const* argv, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    Options opt;
    CLI::App app{"Opinion dynamics under platform influence"};
    app.require_subcommand(1);
    app.add_option("--config", opt.config_path, "JSON run configuration");
    app.add_option("--out", opt.out_dir, "Output directory (OPINIONLAB_OUT overrides)");
    app.add_option("--seed", opt.seed, "Base seed for sbm runs");
    app.add_option("--jobs", opt.jobs, "Worker threads for sbm seeds")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", opt.quiet, "Suppress progress output");
    app.add_option("--set", opt.overrides, "Override a config value: key.path=value");

    const char* names[] = {"simulate", "classify-function", "enumerate", "vector-field", "sbm"};
    for (const char* name : names) {
        auto* sub = app.add_subcommand(name);
        sub->fallthrough();
        sub->callback([&opt, name] { opt.command = name; });
        if (std::string_view(name) == "simulate")
            sub->add_option("--stride", opt.stride, "Keep every stride-th trajectory sample")
                ->check(CLI::PositiveNumber);
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, log, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, log, err);
        return kConfigError;
    }

    std::function<int()> job;
    try {
        const json config = detail::load_config(opt);
        if (opt.command == "simulate")
            job = detail::prepare_simulate(config, opt, log);
        else if (opt.command == "classify-function")
            job = detail::prepare_classify(config, opt, log);
        else if (opt.command == "enumerate")
            job = detail::prepare_enumerate(config, opt, log);
        else if (opt.command == "vector-field")
            job = detail::prepare_vector_field(config, opt, log);
        else
            job = detail::prepare_sbm(config, opt, log);
    } catch (const std::exception& e) {
        err << "config error: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        return job();
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.code() == Errc::budget_exceeded ? kBudgetError : kRuntimeError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kRuntimeError;
    }
}

} // namespace opinionlab::cli
