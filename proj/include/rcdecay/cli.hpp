// cli.hpp — the rcdecay command line: run, compare, peaks, fit, sweep.
//
// Exit codes: 0 success, 2 configuration error, 3 numerical failure,
// 1 anything unexpected.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rcdecay/analysis.hpp"
#include "rcdecay/eigensolver.hpp"
#include "rcdecay/errors.hpp"
#include "rcdecay/io.hpp"
#include "rcdecay/laplace_series.hpp"
#include "rcdecay/model.hpp"
#include "rcdecay/presets.hpp"
#include "rcdecay/propagator.hpp"

namespace rcdecay::cli {

using json = nlohmann::json;

inline constexpr const char* version = "1.0.0";

enum class Method { eigen, ode, series };
enum class PopulationMode { automatic, on, off };

inline Method parse_method(const std::string& s) {
    if (s == "eigen") return Method::eigen;
    if (s == "ode") return Method::ode;
    if (s == "series") return Method::series;
    throw ConfigError("unknown method '" + s + "' (eigen, ode, series)");
}

inline std::string to_string(Method m) {
    switch (m) {
    case Method::eigen: return "eigen";
    case Method::ode: return "ode";
    case Method::series: return "series";
    }
    return "?";
}

inline PopulationMode parse_population_mode(const std::string& s) {
    if (s == "auto") return PopulationMode::automatic;
    if (s == "on") return PopulationMode::on;
    if (s == "off") return PopulationMode::off;
    throw ConfigError("--populations must be auto, on or off");
}

// Eigen-route populations cost ~levels²·samples; above this they are skipped
// in auto mode.
inline constexpr double population_budget = 2e10;

// tau: revival time 2π/Δ of the first band before any --refine.
// T: period of the first harmonic band.
struct TimeUnits {
    double tau{0.0};
    std::optional<double> period;
};

inline TimeUnits time_units(const ModelSpec& m) {
    TimeUnits u;
    u.tau = numeric::two_pi / m.bands.front().delta;
    for (const auto& b : m.bands) {
        if (const auto* h = std::get_if<HarmonicCoupling>(&b.profile)) {
            u.period = h->period;
            break;
        }
    }
    return u;
}

// One fully specified run.
struct RunRequest {
    std::string preset;
    std::string config_path;
    std::optional<json> inline_model;
    Method method{Method::eigen};
    std::string t_max;   // number or "<x>tau" / "<x>T"
    std::string dt;
    double tol{1e-8};
    int n_half{0};
    int refine{1};
    PopulationMode populations{PopulationMode::automatic};
    bool rotating_frame{false};
};

struct ResolvedModel {
    ModelSpec model;
    ModelSpec unrefined;  // time suffixes refer to this model's τ and T
    io::TruncationReport truncation;
    std::string origin;
    double default_t_max{0.0};
    double default_dt{0.0};
};

struct RunOutcome {
    TimeSeries series;
    ModelSpec model;
    TimeUnits units;
    json manifest;
};

// ------------------------------- model setup --------------------------------

inline double parse_time(const std::string& text, const TimeUnits& units, const char* what) {
    std::string s = text;
    double unit = 1.0;
    if (s.size() > 3 && s.compare(s.size() - 3, 3, "tau") == 0) {
        if (!(units.tau > 0.0)) throw ConfigError(std::string(what) + ": 'tau' suffix needs a model");
        unit = units.tau;
        s.resize(s.size() - 3);
    } else if (s.size() > 1 && s.back() == 'T') {
        if (!units.period) throw ConfigError(std::string(what) + ": 'T' suffix needs a harmonic band");
        unit = *units.period;
        s.pop_back();
    }
    double v = 0.0;
    try {
        v = io::parse_double(s);
    } catch (const InvalidArgument&) {
        throw ConfigError(std::string(what) + ": cannot parse '" + text + "' (number, <x>tau or <x>T)");
    }
    if (!std::isfinite(v) || v <= 0.0) throw ConfigError(std::string(what) + " must be positive");
    return v * unit;
}

inline ResolvedModel resolve_model(const RunRequest& req) {
    const int sources = !req.preset.empty() + !req.config_path.empty() + req.inline_model.has_value();
    if (sources != 1) throw ConfigError("give exactly one of --preset or --config");
    ResolvedModel r;
    if (!req.preset.empty()) {
        auto p = make_preset(req.preset);
        r.model = std::move(p.model);
        r.origin = "preset:" + req.preset;
        r.default_t_max = p.t_max;
        r.default_dt = p.sample_dt;
    } else {
        r.model = req.inline_model ? io::parse_model(*req.inline_model) : io::load_model(req.config_path);
        r.origin = req.inline_model ? "inline" : "config:" + req.config_path;
    }
    if (req.refine < 1) throw ConfigError("--refine must be >= 1");
    if (req.n_half < 0) throw ConfigError("--n-half must be >= 1");
    r.truncation = io::resolve_truncation(r.model, req.n_half);
    r.unrefined = r.model;
    if (req.refine > 1) {
        for (auto& b : r.model.bands) b = refine_band(b, req.refine);
    }
    if (r.default_t_max <= 0.0) {
        double dt = INFINITY;
        for (const auto& b : r.unrefined.bands) dt = std::min(dt, numeric::two_pi / b.delta / 1000.0);
        r.default_t_max = 3.0 * numeric::two_pi / r.unrefined.bands.front().delta;
        r.default_dt = dt;
    }
    return r;
}

inline json derived_json(const ModelSpec& m) {
    json d;
    d["gamma"] = json::array();
    d["tau"] = json::array();
    d["half_width"] = json::array();
    double total = 0.0;
    for (const auto& b : m.bands) {
        const double g = effective_rate(b);
        total += g;
        d["gamma"].push_back(g);
        d["tau"].push_back(numeric::two_pi / b.delta);
        d["half_width"].push_back(b.n_half * b.delta);
        if (const auto* h = std::get_if<HarmonicCoupling>(&b.profile)) {
            json hj;
            hj["T"] = h->period;
            hj["gamma_harmonic"] = numeric::two_pi * h->beta * h->beta / b.delta;
            if (auto order = harmonic_order(b.delta, h->period)) hj["M"] = *order;
            d["harmonic"].push_back(hj);
        }
    }
    d["gamma_total"] = total;
    d["tau_pairs"] = json::array();
    for (std::size_t i = 0; i < m.bands.size(); ++i) {
        for (std::size_t j = i + 1; j < m.bands.size(); ++j) {
            d["tau_pairs"].push_back(numeric::two_pi / m.bands[i].delta + numeric::two_pi / m.bands[j].delta);
        }
    }
    d["note"] = "gamma of a harmonic or explicit band is 2*pi*<|beta_n|^2>/delta";
    return d;
}

// ---------------------------------- running ----------------------------------

inline RunOutcome execute(const RunRequest& req) {
    const auto start = std::chrono::steady_clock::now();
    auto resolved = resolve_model(req);
    const auto& model = resolved.model;
    const double t_max = req.t_max.empty() ? resolved.default_t_max : parse_time(req.t_max, time_units(resolved.unrefined), "--t-max");
    const double dt = req.dt.empty() ? resolved.default_dt : parse_time(req.dt, time_units(resolved.unrefined), "--dt");
    const auto grid = uniform_grid(t_max, dt);

    json man;
    man["tool"] = {{"name", "rcdecay"}, {"version", version}};
    man["origin"] = resolved.origin;
    man["model"] = io::model_to_json(model);
    man["derived"] = derived_json(model);
    man["method"] = to_string(req.method);
    man["time_grid"] = {{"t_max", t_max}, {"dt", dt}, {"samples", grid.size()}};
    json trunc;
    trunc["n_half"] = json::array();
    trunc["defaulted"] = json::array();
    for (std::size_t i = 0; i < model.bands.size(); ++i) {
        trunc["n_half"].push_back(model.bands[i].n_half);
        trunc["defaulted"].push_back(static_cast<bool>(resolved.truncation.defaulted[i]));
    }
    trunc["default_rule"] = "n_half*delta >= max(40*gamma_total, 100*delta)";
    trunc["n_half_override"] = req.n_half;
    trunc["refine"] = req.refine;
    man["truncation"] = trunc;

    RunOutcome out;
    out.model = model;
    out.units = time_units(resolved.unrefined);
    man["time_units"] = {{"tau", out.units.tau}, {"T", out.units.period ? json(*out.units.period) : json(nullptr)}};
    const auto sys = assemble(model);
    man["levels_coupled"] = sys.size();

    if (req.method == Method::eigen) {
        const SolveOptions opts;
        const auto eig = solve_eigenvalues(sys, opts);
        const double cost = static_cast<double>(sys.size()) * static_cast<double>(sys.size()) *
                            static_cast<double>(grid.size());
        const bool pops = req.populations == PopulationMode::on ||
                          (req.populations == PopulationMode::automatic && cost <= population_budget);
        out.series = eigen_time_series(eig, grid, pops);
        man["tolerances"] = {{"weight_floor", opts.weight_floor},
                             {"merge_tolerance", opts.merge_tolerance},
                             {"root_tolerance", "1e-13 relative to the bracket width"}};
        man["eigen"] = {{"roots", eig.size()},
                        {"weight_sum", eig.weight_sum()},
                        {"dropped_weight", eig.dropped_weight}};
        man["populations"] = pops ? "computed"
                                  : "skipped (levels^2*samples = " + io::format_double(cost) +
                                        " exceeds budget; use --populations on)";
    } else if (req.method == Method::ode) {
        PropagateOptions popts;
        popts.rotating_frame = req.rotating_frame;
        auto res = propagate_system(sys, grid.back() > 0.0 ? grid.back() : t_max, dt, req.tol, popts);
        out.series = std::move(res.series);
        man["tolerances"] = {{"tol", req.tol},
                             {"norm_budget", Dopri5::norm_budget * req.tol},
                             {"integrator", "Dormand-Prince 5(4), PI control, 4th-order dense output"},
                             {"rotating_frame", req.rotating_frame}};
        man["ode"] = {{"accepted_steps", res.stats.accepted},
                      {"rejected_steps", res.stats.rejected},
                      {"rhs_calls", res.stats.rhs_calls}};
        man["populations"] = "computed";
    } else {
        auto res = series_time_series(model, grid);
        out.series = std::move(res.series);
        man["series"] = {{"formula", res.plan.description},
                         {"first_time_outside_window",
                          res.first_invalid_time < 0.0 ? json(nullptr) : json(res.first_invalid_time)}};
        man["populations"] = "not available for the series method";
    }
    man["norm_drift"] = out.series.has_populations() ? json(out.series.norm_drift) : json(nullptr);
    man["columns"] = json::array({"t", "re_a", "im_a", "abs_a", "abs_a2"});
    for (std::size_t b = 0; b < model.bands.size(); ++b) man["columns"].push_back("P_" + std::to_string(b + 1));
    man["columns"].push_back("norm");
    man["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    out.manifest = std::move(man);
    return out;
}

inline std::filesystem::path manifest_path(const std::filesystem::path& csv) {
    auto p = csv;
    p.replace_extension(".json");
    if (p == csv) p += ".json";
    return p;
}

inline void write_outputs(RunOutcome& run, const std::filesystem::path& csv_path) {
    run.manifest["csv"] = csv_path.filename().string();
    io::write_csv(csv_path, run.series, run.model.bands.size());
    io::write_atomic(manifest_path(csv_path), run.manifest.dump(2) + "\n");
}

inline json peaks_json(const PeakList& peaks) {
    json j;
    j["source"] = peaks.source;
    j["peaks"] = json::array();
    for (const auto& p : peaks.peaks) j["peaks"].push_back({{"time", p.time}, {"height", p.height}, {"window", p.window}});
    return j;
}

inline json fit_json(const FitResult& f) {
    return {{"kind", f.kind == FitResult::Kind::exponential ? "exponential" : "powerlaw"},
            {"parameter", f.parameter},
            {"intercept", f.intercept},
            {"r_squared", f.r_squared},
            {"window", {f.window.first, f.window.second}},
            {"points", f.points}};
}

inline void emit(const json& doc, const std::string& out_path, std::ostream& out) {
    if (out_path.empty()) {
        out << doc.dump(2) << "\n";
    } else {
        io::write_atomic(out_path, doc.dump(2) + "\n");
    }
}

// ------------------------------------ sweep ------------------------------------

inline RunRequest request_from_json(const json& j) {
    io::detail::check_keys(j, {"name", "preset", "config", "model", "method", "t_max", "dt", "tol", "n_half", "refine",
                               "populations", "rotating_frame"},
                           "sweep run");
    RunRequest r;
    auto str = [&](const char* k) -> std::string {
        if (!j.contains(k)) return {};
        if (j[k].is_string()) return j[k].get<std::string>();
        if (j[k].is_number()) return io::format_double(j[k].get<double>());
        throw ConfigError(std::string("sweep run: '") + k + "' must be a string or number");
    };
    r.preset = str("preset");
    r.config_path = str("config");
    if (j.contains("model")) r.inline_model = j["model"];
    if (j.contains("method")) r.method = parse_method(str("method"));
    r.t_max = str("t_max");
    r.dt = str("dt");
    if (j.contains("tol")) r.tol = j["tol"].get<double>();
    if (j.contains("n_half")) r.n_half = j["n_half"].get<int>();
    if (j.contains("refine")) r.refine = j["refine"].get<int>();
    if (j.contains("populations")) r.populations = parse_population_mode(str("populations"));
    if (j.contains("rotating_frame")) r.rotating_frame = j["rotating_frame"].get<bool>();
    return r;
}

// ------------------------------------ main ------------------------------------

inline int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
    if (dynamic_cast<const NumericalFailure*>(&e) != nullptr) return 3;
    if (dynamic_cast<const nlohmann::json::exception*>(&e) != nullptr) return 2;
    return 1;
}

inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Decay and revival dynamics of a state coupled to discrete bands"};
    app.set_version_flag("--version", version);
    app.require_subcommand(1);

    RunRequest req;
    std::string method = "eigen";
    std::string populations = "auto";
    std::string out_path;

    auto add_model_options = [&](CLI::App* sub, bool with_method) {
        sub->add_option("--preset", req.preset, "Built-in parameter set")
            ->check(CLI::IsMember(std::vector<std::string>(preset_names.begin(), preset_names.end())));
        sub->add_option("--config", req.config_path, "Model JSON file");
        if (with_method) sub->add_option("--method", method, "eigen | ode | series")->capture_default_str();
        sub->add_option("--t-max", req.t_max, "End time: number, <x>tau or <x>T");
        sub->add_option("--dt", req.dt, "Sample spacing: number, <x>tau or <x>T");
        sub->add_option("--tol", req.tol, "Relative tolerance of the ode method")->capture_default_str();
        sub->add_option("--n-half", req.n_half, "Override the half-width N of every non-explicit band");
        sub->add_option("--refine", req.refine, "Densify constant bands by this factor")->capture_default_str();
        sub->add_option("--populations", populations, "auto | on | off")->capture_default_str();
        sub->add_flag("--rotating-frame", req.rotating_frame, "Integrate in the interaction picture (ode)");
    };

    auto* run = app.add_subcommand("run", "Simulate one model and write CSV plus JSON manifest");
    add_model_options(run, true);
    run->add_option("--out", out_path, "CSV path (manifest goes next to it)")->required();

    auto* compare = app.add_subcommand("compare", "Run a model with several methods and report deviations");
    add_model_options(compare, false);
    std::string methods = "eigen,ode";
    std::string out_dir;
    compare->add_option("--methods", methods, "Comma-separated methods")->capture_default_str();
    compare->add_option("--out", out_path, "Report JSON (default: stdout)");
    compare->add_option("--csv-dir", out_dir, "Also write each method's CSV here");

    auto* peaks = app.add_subcommand("peaks", "Detect revival peaks of |a|^2");
    add_model_options(peaks, true);
    std::string input;
    double min_height = 1e-3;
    std::string min_sep = "0.5tau";
    std::string period;
    peaks->add_option("--input", input, "Read a CSV written by 'run' instead of simulating");
    peaks->add_option("--min-height", min_height, "Smallest |a|^2 reported")->capture_default_str();
    peaks->add_option("--min-separation", min_sep, "Smallest spacing between peaks")->capture_default_str();
    peaks->add_option("--period", period, "Window length for the window index (default tau)");
    peaks->add_option("--out", out_path, "Peak JSON (default: stdout)");

    auto* fit = app.add_subcommand("fit", "Fit exponential decay or power-law peak decay");
    add_model_options(fit, true);
    std::string kind = "exponential";
    std::string window;
    int skip_first = 1;
    int max_peaks = 0;
    fit->add_option("--input", input, "Read a CSV written by 'run' instead of simulating");
    fit->add_option("--kind", kind, "exponential | powerlaw")->capture_default_str();
    fit->add_option("--window", window, "lo,hi for the exponential fit (default 0,0.5tau)");
    fit->add_option("--skip-first", skip_first, "Peaks skipped by the power-law fit")->capture_default_str();
    fit->add_option("--max-peaks", max_peaks, "Use at most this many peaks (0 = all)");
    fit->add_option("--min-height", min_height, "Peak threshold")->capture_default_str();
    fit->add_option("--min-separation", min_sep, "Peak spacing")->capture_default_str();
    fit->add_option("--period", period, "Window length for the peak index (default tau)");
    fit->add_option("--out", out_path, "Fit JSON (default: stdout)");

    auto* sweep = app.add_subcommand("sweep", "Run every entry of a sweep file in parallel");
    std::string sweep_file;
    sweep->add_option("spec", sweep_file, "Sweep JSON: {\"runs\": [{\"name\": ..., \"preset\"|\"config\"|\"model\": ...}]}")
        ->required();
    sweep->add_option("--out", out_dir, "Output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        req.populations = parse_population_mode(populations);

        if (run->parsed()) {
            req.method = parse_method(method);
            auto result = execute(req);
            write_outputs(result, out_path);
            out << "wrote " << out_path << " and " << manifest_path(out_path).string() << "\n";
            return 0;
        }

        if (compare->parsed()) {
            std::vector<Method> list;
            std::stringstream ms(methods);
            for (std::string m; std::getline(ms, m, ',');) list.push_back(parse_method(m));
            if (list.size() < 2) throw ConfigError("--methods needs at least two methods");
            std::vector<RunOutcome> runs;
            for (auto m : list) {
                auto r = req;
                r.method = m;
                runs.push_back(execute(r));
                if (!out_dir.empty()) write_outputs(runs.back(), std::filesystem::path(out_dir) / (to_string(m) + ".csv"));
            }
            json rep;
            rep["model"] = runs.front().manifest["model"];
            rep["pairs"] = json::array();
            for (std::size_t i = 0; i < runs.size(); ++i) {
                for (std::size_t j = i + 1; j < runs.size(); ++j) {
                    const auto c = compare_methods(runs[i].series, runs[j].series);
                    rep["pairs"].push_back({{"a", to_string(list[i])},
                                            {"b", to_string(list[j])},
                                            {"max_abs_amplitude_deviation", c.max_amplitude_deviation},
                                            {"max_abs_probability_deviation", c.max_probability_deviation},
                                            {"time_of_max", c.time_of_max}});
                }
            }
            rep["norm_drift"] = json::object();
            for (std::size_t i = 0; i < runs.size(); ++i) rep["norm_drift"][to_string(list[i])] = runs[i].manifest["norm_drift"];
            emit(rep, out_path, out);
            return 0;
        }

        if (peaks->parsed() || fit->parsed()) {
            req.method = parse_method(method);
            TimeSeries ts;
            TimeUnits units;  // tau = 0 when unknown
            if (!input.empty()) {
                if (!req.preset.empty() || !req.config_path.empty()) {
                    throw ConfigError("--input replaces --preset/--config; give one or the other");
                }
                ts = io::load_csv(input);
                // A manifest next to the CSV provides τ and T for suffixed times.
                const auto man = manifest_path(input);
                if (std::filesystem::exists(man)) {
                    const auto doc = json::parse(io::read_file(man));
                    if (doc.contains("time_units")) {
                        units.tau = doc["time_units"].at("tau").get<double>();
                        if (!doc["time_units"].at("T").is_null()) units.period = doc["time_units"]["T"].get<double>();
                    }
                }
            } else {
                if (req.populations == PopulationMode::automatic) req.populations = PopulationMode::off;
                auto r = execute(req);
                ts = std::move(r.series);
                units = r.units;
            }
            auto time_arg = [&](const std::string& s, const char* what) { return parse_time(s, units, what); };
            // Only peak detection needs the separation and period.
            auto find_peaks = [&] {
                const double sep = time_arg(min_sep, "--min-separation");
                const double per = period.empty() ? units.tau : time_arg(period, "--period");
                return detect_peaks(ts, min_height, sep, per);
            };

            if (peaks->parsed()) {
                emit(peaks_json(find_peaks()), out_path, out);
                return 0;
            }
            if (kind == "exponential") {
                double lo = 0.0;
                double hi = 0.0;
                if (window.empty()) {
                    if (!(units.tau > 0.0)) throw ConfigError("--window is required when no model is known");
                    hi = 0.5 * units.tau;
                } else {
                    const auto comma = window.find(',');
                    if (comma == std::string::npos) throw ConfigError("--window expects lo,hi");
                    const auto lo_s = window.substr(0, comma);
                    lo = lo_s == "0" ? 0.0 : time_arg(lo_s, "--window");
                    hi = time_arg(window.substr(comma + 1), "--window");
                }
                emit(fit_json(decay_rate_fit(ts, lo, hi)), out_path, out);
            } else if (kind == "powerlaw") {
                auto pk = find_peaks();
                if (max_peaks > 0 && pk.peaks.size() > static_cast<std::size_t>(max_peaks)) pk.peaks.resize(max_peaks);
                auto doc = fit_json(fit_powerlaw(pk, skip_first));
                doc["peaks"] = peaks_json(pk)["peaks"];
                emit(doc, out_path, out);
            } else {
                throw ConfigError("--kind must be exponential or powerlaw");
            }
            return 0;
        }

        if (sweep->parsed()) {
            json spec;
            try {
                spec = json::parse(io::read_file(sweep_file));
            } catch (const json::parse_error& e) {
                throw InvalidSpec(sweep_file + ": " + e.what());
            }
            io::detail::check_keys(spec, {"runs"}, "sweep");
            if (!spec.contains("runs") || !spec["runs"].is_array() || spec["runs"].empty()) {
                throw InvalidSpec("sweep: 'runs' must be a non-empty array");
            }
            if (!std::filesystem::is_directory(out_dir)) throw ConfigError("sweep: --out must be an existing directory");
            const auto& list = spec["runs"];
            std::vector<RunRequest> reqs;
            std::vector<std::string> names;
            for (std::size_t i = 0; i < list.size(); ++i) {
                reqs.push_back(request_from_json(list[i]));
                names.push_back(list[i].contains("name") ? list[i]["name"].get<std::string>() : "run" + std::to_string(i + 1));
                if (names.back().find('/') != std::string::npos) throw InvalidSpec("sweep: run names must not contain '/'");
            }
            std::vector<int> codes(reqs.size(), 0);
            std::vector<std::string> messages(reqs.size());
#pragma omp parallel for schedule(dynamic, 1)
            for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(reqs.size()); ++ii) {
                const auto i = static_cast<std::size_t>(ii);
                try {
                    auto r = execute(reqs[i]);
                    write_outputs(r, std::filesystem::path(out_dir) / (names[i] + ".csv"));
                } catch (const std::exception& e) {
                    codes[i] = exit_code_for(e);
                    messages[i] = e.what();
                }
            }
            json summary = json::array();
            int worst = 0;
            for (std::size_t i = 0; i < reqs.size(); ++i) {
                summary.push_back({{"name", names[i]}, {"exit_code", codes[i]}, {"error", messages[i]}});
                worst = std::max(worst, codes[i]);
            }
            out << summary.dump(2) << "\n";
            return worst;
        }
    } catch (const std::exception& e) {
        err << "rcdecay: " << e.what() << "\n";
        return exit_code_for(e);
    }
    return 1;
}

} // namespace rcdecay::cli
