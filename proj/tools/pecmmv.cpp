// Command-line front end: synthetic data, MMV / LSM / improved-LSM imaging,
// image metrics and Fresnel import.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "pecmmv/errors.hpp"
#include "pecmmv/forward.hpp"
#include "pecmmv/io.hpp"
#include "pecmmv/lsm.hpp"
#include "pecmmv/reconstruct.hpp"

using namespace pecmmv;
using json = nlohmann::ordered_json;

namespace {

using Defaults = std::vector<std::pair<std::string, std::string>>;

const Defaults kLayoutKeys = {
    {"num_tx", "18"},
    {"radius_tx", "3"},
    {"radius_rx", "3"},
    {"rx_step_deg", "5"},
    {"dead_zone_deg", "30"},
    {"cv_fraction", "0.2"},
    {"cv_arc", "0.5"},
};

const Defaults kGridKeys = {
    {"x_min", "-1"}, {"x_max", "1"}, {"y_min", "-0.4"}, {"y_max", "1.6"},
    {"dx", "auto"}, // lambda/20, shrunk so the x extent holds a whole number of cells
};

const Defaults kImageKeys = {
    {"out_map", "image.map"},
    {"out_pgm", ""},
    {"db_lo", "-30"},
    {"db_hi", "0"},
    {"summary", "-"},
};

Defaults concat(std::initializer_list<Defaults> parts) {
    Defaults all;
    for (const auto& p : parts) all.insert(all.end(), p.begin(), p.end());
    return all;
}

std::string dashed(std::string key) {
    for (char& c : key)
        if (c == '_') c = '-';
    return key;
}

// Wires config file, --set and one --flag per key into a subcommand.
struct Command {
    CLI::App* app = nullptr;
    Config config;
    Defaults defaults;
    std::string config_file;
    std::vector<std::string> sets;
    std::map<std::string, std::string> flags;
    bool dump = false;
    std::function<int(const Config&)> run;

    Command(CLI::App& parent, const std::string& name, const std::string& help, Defaults keys)
        : config(keys), defaults(std::move(keys)) {
        app = parent.add_subcommand(name, help);
        app->add_option("-c,--config", config_file, "key = value settings file");
        app->add_option("--set", sets, "override one setting, key=value (repeatable)");
        app->add_flag("--dump-config", dump, "print the effective settings and exit");
        for (const auto& [key, value] : defaults) {
            if (value == "true" || value == "false") {
                app->add_flag_callback("--" + dashed(key), [this, k = key] { flags[k] = "true"; }, "set " + key);
                app->add_flag_callback("--no-" + dashed(key), [this, k = key] { flags[k] = "false"; }, "clear " + key);
            } else {
                app->add_option_function<std::string>(
                    "--" + dashed(key), [this, k = key](const std::string& v) { flags[k] = v; },
                    "default: " + (value.empty() ? std::string("(none)") : value));
            }
        }
    }

    int execute() {
        if (!config_file.empty()) config.load_file(config_file);
        for (const auto& s : sets) {
            const auto eq = s.find('=');
            if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + s + "'");
            config.set(s.substr(0, eq), s.substr(eq + 1));
        }
        for (const auto& [k, v] : flags) config.set(k, v);
        if (dump) {
            config.dump(std::cout);
            return 0;
        }
        return run(config);
    }
};

std::optional<double> optional_real(const Config& c, const std::string& key) {
    if (c.get(key) == "none" || c.get(key).empty()) return std::nullopt;
    return c.get_double(key);
}

double deg(const Config& c, const std::string& key) { return deg_to_rad(c.get_double(key)); }

ImagingGrid grid_from(const Config& c, const Wavenumber& w) {
    const double x0 = c.get_double("x_min"), x1 = c.get_double("x_max");
    const double y0 = c.get_double("y_min"), y1 = c.get_double("y_max");
    double dx = 0;
    if (c.get("dx") == "auto") {
        const double cells = std::ceil((x1 - x0) / (w.wavelength() / 20.0) - 1e-9);
        dx = (x1 - x0) / cells;
        // y extent must also be a whole number of cells; widen y_max if needed
        const double ny = std::ceil((y1 - y0) / dx - 1e-6);
        return build_grid(x0, x1, y0, y0 + ny * dx, dx);
    }
    dx = c.get_double("dx");
    return build_grid(x0, x1, y0, y1, dx);
}

TransceiverLayout layout_from(const Config& c) {
    CircularLayoutSpec spec;
    spec.num_tx = c.get_int("num_tx");
    spec.radius_tx = c.get_double("radius_tx");
    spec.radius_rx = c.get_double("radius_rx");
    spec.rx_step = deg(c, "rx_step_deg");
    spec.dead_zone = deg(c, "dead_zone_deg");
    return split_cv(build_circular_layout(spec), c.get_double("cv_fraction"), c.get_double("cv_arc"));
}

void emit_summary(const Config& c, const json& summary) {
    const std::string& path = c.get("summary");
    if (path.empty()) return;
    if (path == "-") {
        std::cout << summary.dump(2) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw DataError("cannot write summary '" + path + "'");
    out << summary.dump(2) << '\n';
}

void export_image(const Config& c, const IndicatorMap& map) {
    if (!c.get("out_map").empty()) save_raster(c.get("out_map"), map);
    if (!c.get("out_pgm").empty()) save_pgm(c.get("out_pgm"), map, c.get_double("db_lo"), c.get_double("db_hi"));
}

json problem_size(const MeasurementSet& d, const ImagingGrid& g) {
    return json{{"Q", d.layout.num_rx()}, {"P", d.layout.num_tx()}, {"N", g.size()},
                {"polarization", to_string(d.mode)}};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

int run_synth(const Config& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const Wavenumber w = Wavenumber::from_frequency(c.get_double("frequency"));
    const TransceiverLayout layout = layout_from(c);
    const std::optional<double> snr = optional_real(c, "snr");
    const auto result = synth_dataset(reference_scene(c.get("scene")), layout,
                                      polarization_from_string(c.get("polarization")), w, snr,
                                      c.get_uint64("seed"));
    save_dataset(c.get("out"), result.data);
    json s{{"command", "synth"},
           {"scene", c.get("scene")},
           {"engine", result.engine == ForwardEngine::CircleSeries ? "series" : "mom"},
           {"Q", layout.num_rx()},
           {"P", layout.num_tx()},
           {"cv_receivers", layout.num_cv()},
           {"snr_db", snr ? json(*snr) : json(nullptr)},
           {"runtime_s", seconds_since(t0)},
           {"out", c.get("out")}};
    emit_summary(c, s);
    return 0;
}

int run_invert_mmv(const Config& c) {
    const auto t0 = std::chrono::steady_clock::now();
    const MeasurementSet data = load_dataset(c.get("data"));
    const Wavenumber w = Wavenumber::from_frequency(data.frequency);
    const ImagingGrid grid = grid_from(c, w);

    SolverConfig sc;
    sc.max_iterations = c.get_int("max_iterations");
    sc.patience = c.get_int("patience");
    sc.history = c.get_int("history");
    sc.gamma = c.get_double("gamma");
    sc.gap_tol = c.get_double("gap_tol");
    sc.root_tol = c.get_double("root_tol");
    sc.first_gap_tol = c.get_double("first_gap_tol");
    const bool cv = c.get_bool("cv");
    const std::optional<double> sigma = optional_real(c, "sigma");
    // A known noise level takes precedence over cross-validation.
    if (!cv && !sigma) throw UsageError("without cv a noise level sigma is required");
    sc.sigma = sigma;

    const MmvResult r = invert_mmv(data, grid, sc);
    export_image(c, r.image);
    if (!c.get("out_trace").empty()) save_trace(c.get("out_trace"), r.trace);

    json s{{"command", "invert-mmv"}, {"runtime_s", seconds_since(t0)}, {"L", r.trace.iterations()}};
    s.update(problem_size(data, grid));
    s["n_opt"] = r.trace.n_opt;
    s["newton_steps"] = r.steps.size();
    s["cross_validated"] = r.cross_validated;
    s["patience_triggered"] = r.patience_triggered;
    s["r_rec"] = r.r_rec;
    s["r_cv"] = std::isfinite(r.r_cv) ? json(r.r_cv) : json(nullptr);
    emit_summary(c, s);
    return 0;
}

int run_invert_lsm(const Config& c, bool improved) {
    const auto t0 = std::chrono::steady_clock::now();
    const MeasurementSet data = load_dataset(c.get("data"));
    const Wavenumber w = Wavenumber::from_frequency(data.frequency);
    const ImagingGrid grid = grid_from(c, w);
    IndicatorMap map = lsm_indicator(data, grid, w);
    json s{{"command", improved ? "invert-ilsm" : "invert-lsm"}};
    if (improved) {
        const std::optional<double> given = optional_real(c, "radius");
        const double a = given ? *given : cover_radius(map, c.get_double("cover_threshold_db"));
        map = improved_lsm_indicator(data, grid, w, a);
        s["radius"] = a;
        s["order"] = improved_lsm_order(w, a);
    }
    export_image(c, map);
    s["runtime_s"] = seconds_since(t0);
    s.update(problem_size(data, grid));
    s["saturated"] = map.saturated;
    emit_summary(c, s);
    return 0;
}

int run_metrics(const Config& c) {
    const IndicatorMap ref = load_raster(c.get("ref"));
    const IndicatorMap img = load_raster(c.get("img"));
    std::cout << format_real(corr_coeff(ref, img)) << '\n';
    return 0;
}

int run_import(const Config& c) {
    const auto t0 = std::chrono::steady_clock::now();
    FresnelOptions o;
    o.columns = parse_column_map(c.get("columns"));
    o.frequency = c.get_double("frequency");
    o.frequency_unit = c.get_double("frequency_unit");
    o.radius_tx = c.get_double("radius_tx");
    o.radius_rx = c.get_double("radius_rx");
    o.rx_relative = c.get_bool("rx_relative");
    o.tx_stride = c.get_int("tx_stride");
    o.conjugate = c.get_bool("conjugate");
    o.mode = polarization_from_string(c.get("polarization"));
    FresnelImport imp = import_fresnel(c.get("input"), o);
    imp.data.layout = split_cv(imp.data.layout, c.get_double("cv_fraction"), c.get_double("cv_arc"));
    save_dataset(c.get("out"), imp.data);
    json s{{"command", "import-fresnel"},
           {"runtime_s", seconds_since(t0)},
           {"Q", imp.data.layout.num_rx()},
           {"P", imp.data.layout.num_tx()},
           {"rows_used", imp.rows_used},
           {"rows_skipped", imp.rows_skipped},
           {"flagged", imp.flagged},
           {"out", c.get("out")}};
    emit_summary(c, s);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"PEC boundary imaging by group-sparse MMV inversion, with LSM baselines"};
    app.require_subcommand(1);

    Command synth(app, "synth", "synthesize a canonical dataset for a reference scene",
                  concat({{{"scene", "sim1"}, {"polarization", "TM"}, {"frequency", "500e6"},
                           {"snr", "30"}, {"seed", "7"}},
                          kLayoutKeys,
                          {{"out", "dataset.txt"}, {"summary", "-"}}}));
    synth.run = run_synth;

    Command mmv(app, "invert-mmv", "group-sparse MMV reconstruction",
                concat({{{"data", "dataset.txt"}, {"cv", "true"}, {"sigma", "none"},
                         {"max_iterations", "600"}, {"patience", "30"}, {"history", "3"},
                         {"gamma", "1e-4"}, {"gap_tol", "1e-6"}, {"root_tol", "1e-5"},
                         {"first_gap_tol", "1e-2"}, {"out_trace", "trace.txt"}},
                        kGridKeys, kImageKeys}));
    mmv.run = run_invert_mmv;

    Command lsm(app, "invert-lsm", "linear sampling method indicator",
                concat({{{"data", "dataset.txt"}}, kGridKeys, kImageKeys}));
    lsm.run = [](const Config& c) { return run_invert_lsm(c, false); };

    Command ilsm(app, "invert-ilsm", "improved linear sampling indicator (TM)",
                 concat({{{"data", "dataset.txt"}, {"radius", "none"}, {"cover_threshold_db", "-6"}},
                         kGridKeys, kImageKeys}));
    ilsm.run = [](const Config& c) { return run_invert_lsm(c, true); };

    Command metrics(app, "metrics", "correlation coefficient of two indicator rasters",
                    {{"ref", "reference.map"}, {"img", "image.map"}});
    metrics.run = run_metrics;

    Command import(app, "import-fresnel", "convert a Fresnel measurement file to a canonical dataset",
                   {{"input", "data.txt"},
                    {"out", "dataset.txt"},
                    {"columns", "0,1,2,3,4,5,6"},
                    {"frequency", "4e9"},
                    {"frequency_unit", "1e9"},
                    {"radius_tx", "0.72"},
                    {"radius_rx", "0.76"},
                    {"rx_relative", "true"},
                    {"tx_stride", "2"},
                    {"conjugate", "false"},
                    {"polarization", "TM"},
                    {"cv_fraction", "0.2"},
                    {"cv_arc", "0.1"},
                    {"summary", "-"}});
    import.run = run_import;

    try {
        app.parse(argc, argv);
        for (Command* cmd : {&synth, &mmv, &lsm, &ilsm, &metrics, &import})
            if (cmd->app->parsed()) return cmd->execute();
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        std::cerr << "usage error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 4;
    }
}
