#include "nshawkes/cli.hpp"

#include "nshawkes/baselines.hpp"
#include "nshawkes/checkpoint.hpp"
#include "nshawkes/errors.hpp"
#include "nshawkes/eval.hpp"
#include "nshawkes/model.hpp"
#include "nshawkes/parallel.hpp"
#include "nshawkes/simulate.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace nshawkes::cli {

namespace fs = std::filesystem;

namespace {

struct MissingInput : IoError {
    using IoError::IoError;
};

void require_file(const std::string& path, const char* what) {
    if (path.empty()) throw ConfigError(std::string("no ") + what + " file given");
    if (!fs::exists(path)) throw MissingInput(std::string(what) + " file not found: " + path);
}

struct Options {
    // global
    std::uint64_t seed = 0;
    int workers = 0;
    std::string out = ".";
    // inputs
    std::string events;
    std::string regions;
    std::string checkpoint;
    std::vector<std::string> covariates;
    std::string origin;
    double horizon = -1.0;
    // model
    int components = 3;
    int hidden = 32;
    double area = 0.35;
    double focus_bound = 0.1;
    double bandwidth = 1.0;
    double grid_spacing = 0.01;
    // fitting
    double learning_rate = 0.1;
    std::size_t iterations = 2000;
    double tolerance = 1e-6;
    bool step_halving = false;
    // simulate
    double base_rate = 1.0;
    double magnitude = 0.1;
    double time_scale = 1.0;
    double cov_scale = 1.0;
    double start = 0.0;
    // evaluation
    std::string from;
    std::string to;
    std::string mode = "frozen";
    std::string at;
    std::string split;
    std::vector<std::string> models{"neural", "etas", "ar", "persistent"};
    bool insample = false;
    double time_step = eval::kDefaultTimeStep;
    int ar_p = 2;
    int ar_d = 1;
    std::size_t samples = 200;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
    if (!out) throw IoError("failed writing " + path.string());
}

/// Plain numbers are days since the origin; anything else is a timestamp.
double parse_time(const std::string& text, const std::string& origin) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used == text.size()) return v;
    } catch (const std::exception&) {
    }
    return data::days_between(data::parse_timestamp(origin), data::parse_timestamp(text));
}

struct Loaded {
    Checkpoint checkpoint;
    geo::RegionSet regions;  // standardized with the checkpoint statistics
};

Loaded load_model(const Options& o) {
    require_file(o.checkpoint, "checkpoint");
    require_file(o.regions, "regions");
    Loaded l;
    l.checkpoint = load_checkpoint(o.checkpoint);
    l.regions = data::apply_standardization(geo::load_regions(o.regions, l.checkpoint.stats.names),
                                            l.checkpoint.stats);
    return l;
}

data::LoadedEvents load_events_for(const Options& o, const Loaded& l) {
    require_file(o.events, "events");
    data::LoadOptions lo;
    lo.origin = l.checkpoint.time_origin;
    if (o.horizon >= 0.0) lo.horizon = o.horizon;
    return data::load_events(o.events, l.regions.bounds(), lo);
}

int cmd_fit(const Options& o) {
    require_file(o.events, "events");
    require_file(o.regions, "regions");
    const geo::RegionSet raw = geo::load_regions(o.regions, o.covariates);
    auto [regions, stats] = data::standardize(raw);

    data::LoadOptions lo;
    if (!o.origin.empty()) lo.origin = o.origin;
    if (o.horizon >= 0.0) lo.horizon = o.horizon;
    const data::LoadedEvents loaded = data::load_events(o.events, regions.bounds(), lo);
    if (loaded.dropped > 0) {
        std::cerr << "dropped " << loaded.dropped << " events outside the domain or window\n";
    }

    model::ModelConfig mc;
    mc.components = o.components;
    mc.hidden = o.hidden;
    mc.ellipse_area = o.area;
    mc.focus_bound = o.focus_bound;
    mc.bandwidth = o.bandwidth;
    model::FitConfig fc;
    fc.learning_rate = o.learning_rate;
    fc.max_iterations = o.iterations;
    fc.tolerance = o.tolerance;
    fc.seed = o.seed;
    fc.grid_spacing = o.grid_spacing;
    fc.step_halving = o.step_halving;

    const model::FitResult result = model::fit(loaded.sequence, regions, mc, fc);

    Checkpoint cp;
    cp.params = result.params;
    cp.config = mc;
    cp.stats = stats;
    cp.domain = regions.bounds();
    cp.time_origin = loaded.origin;
    cp.horizon = loaded.sequence.horizon;

    const fs::path out(o.out);
    save_checkpoint(out / "checkpoint.json", cp);

    std::ostringstream trace;
    trace << "iteration,log_likelihood\n";
    for (std::size_t k = 0; k < result.trace.size(); ++k) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%zu,%.17g\n", k, result.trace[k]);
        trace << buf;
    }
    write_text(out / "trace.csv", trace.str());

    std::ostringstream gamma;
    gamma << "covariate,gamma,sign\n";
    std::cout << "covariate              gamma\n";
    const auto& g = result.params.background.gamma;
    for (std::size_t l = 0; l < g.size(); ++l) {
        const char* sign = g[l] > 0.0 ? "+" : (g[l] < 0.0 ? "-" : "0");
        gamma << stats.names[l] << ',' << fmt(g[l]) << ',' << sign << '\n';
        char buf[128];
        std::snprintf(buf, sizeof buf, "%-20s %+9.4f\n", stats.names[l].c_str(), g[l]);
        std::cout << buf;
    }
    write_text(out / "gamma.csv", gamma.str());

    const auto& k = result.params.kernel;
    std::cout << "events " << loaded.sequence.size() << ", iterations " << result.iterations
              << (result.converged ? " (converged)" : " (iteration limit)") << "\n"
              << "log-likelihood " << fmt(result.trace.back()) << "\n"
              << "C " << fmt(k.magnitude()) << ", sigma0 " << fmt(k.time_scale()) << ", tau_z "
              << fmt(k.cov_scale()) << ", mu0 " << fmt(result.params.background.base_rate())
              << "\n";
    return 0;
}

int cmd_simulate(const Options& o) {
    if (o.horizon < 0.0) throw ConfigError("simulate needs --horizon (days)");
    Loaded l;
    if (!o.checkpoint.empty()) {
        l = load_model(o);
    } else {
        require_file(o.regions, "regions");
        // Stationary special case: constant networks, zero covariate effect.
        l.regions = geo::load_regions(o.regions, o.covariates);
        model::ModelParams& p = l.checkpoint.params;
        p.kernel.nets = neural::FeatureNet(o.components, o.hidden, o.focus_bound, l.regions.bounds());
        p.kernel.ellipse_area = o.area;
        p.kernel.set_magnitude(o.magnitude);
        p.kernel.set_time_scale(o.time_scale);
        p.kernel.set_cov_scale(o.cov_scale);
        p.background.set_base_rate(o.base_rate);
        p.background.gamma.assign(l.regions.covariate_count(), 0.0);
        p.background.bandwidth = o.bandwidth;
        l.checkpoint.time_origin = "2020-01-01T00:00:00";
    }
    const std::string origin = o.origin.empty() ? l.checkpoint.time_origin : o.origin;
    simulate::SimConfig sc;
    sc.horizon = o.horizon;
    sc.start = o.start;
    sc.seed = o.seed;
    const data::EventSequence events = simulate::simulate(l.checkpoint.params, l.regions, sc);
    data::save_events(fs::path(o.out) / "events.csv", events, origin);
    std::cout << "simulated " << events.size() << " events on (" << fmt(o.start) << ", "
              << fmt(o.horizon) << "] days\n";
    return 0;
}

int cmd_predict(const Options& o) {
    const Loaded l = load_model(o);
    const auto events = load_events_for(o, l);
    if (o.from.empty() || o.to.empty()) throw ConfigError("predict needs --from and --to");
    const double t1 = parse_time(o.from, l.checkpoint.time_origin);
    const double t2 = parse_time(o.to, l.checkpoint.time_origin);
    eval::HistoryMode mode;
    if (o.mode == "frozen") {
        mode = eval::HistoryMode::Frozen;
    } else if (o.mode == "insample") {
        mode = eval::HistoryMode::InSample;
    } else {
        throw ConfigError("unknown history mode '" + o.mode + "' (frozen or insample)");
    }
    const geo::IntensityGrid grid = geo::build_grid(l.regions, o.grid_spacing);
    const model::NeuralSurface surface(l.checkpoint.params, l.regions);
    const eval::CountIntegrator integrator(surface, l.regions, grid, o.time_step);
    const auto counts = integrator.expected_counts(t1, t2, events.sequence, mode);

    std::ostringstream csv;
    csv << "region,expected\n";
    double total = 0.0;
    for (std::size_t j = 0; j < counts.size(); ++j) {
        char buf[64];
        std::snprintf(buf, sizeof buf, ",%.12g\n", counts[j]);
        csv << l.regions[j].id << buf;
        total += counts[j];
    }
    write_text(fs::path(o.out) / "prediction.csv", csv.str());
    std::cout << "expected events on [" << fmt(t1) << ", " << fmt(t2) << "]: " << fmt(total) << "\n";
    return 0;
}

int cmd_evaluate(const Options& o) {
    const Loaded l = load_model(o);
    const auto loaded = load_events_for(o, l);
    if (o.split.empty()) throw ConfigError("evaluate needs --split");
    const double t_split = parse_time(o.split, l.checkpoint.time_origin);
    const auto [train, test] = data::split(loaded.sequence, t_split);
    const geo::IntensityGrid grid = geo::build_grid(l.regions, o.grid_spacing);

    nlohmann::json summary;
    const fs::path out(o.out);
    auto record = [&](const std::string& name, const eval::PredictionReport& r) {
        eval::write_report_csv(out / ("report_" + name + ".csv"), r);
        summary[name] = nlohmann::json::parse(eval::report_summary_json(r));
        std::printf("%-12s MAE(rare) %.4f  MAE(frequent) %.4f  MAE(total) %.4f\n", name.c_str(),
                    r.mae_rare, r.mae_frequent, r.mae_total);
    };

    for (const std::string& m : o.models) {
        if (m == "neural") {
            const model::NeuralSurface surface(l.checkpoint.params, l.regions);
            const eval::CountIntegrator integrator(surface, l.regions, grid, o.time_step);
            record("neural", eval::oos_predict(integrator, train, test, l.regions));
            if (o.insample) {
                record("neural_insample", eval::insample_series(integrator, train, l.regions));
            }
        } else if (m == "etas") {
            model::FitConfig fc;
            fc.learning_rate = o.learning_rate;
            fc.max_iterations = o.iterations;
            fc.tolerance = o.tolerance;
            fc.grid_spacing = o.grid_spacing;
            fc.step_halving = o.step_halving;
            const auto fitted = baselines::etas_fit(train, l.regions, fc);
            const baselines::EtasSurface surface(fitted.params);
            const eval::CountIntegrator integrator(surface, l.regions, grid, o.time_step);
            record("etas", eval::oos_predict(integrator, train, test, l.regions));
        } else if (m == "ar") {
            const int p = o.ar_p, d = o.ar_d;
            record("ar", eval::oos_predict_series(
                             [p, d](const baselines::WeeklySeries& s) {
                                 return baselines::ar_predict_next(s, p, d);
                             },
                             train, test, l.regions));
        } else if (m == "persistent") {
            record("persistent",
                   eval::oos_predict_series(baselines::persistent_predict, train, test, l.regions));
        } else {
            throw ConfigError("unknown model '" + m + "' (neural, etas, ar, persistent)");
        }
    }
    write_text(out / "summary.json", summary.dump(2) + "\n");
    return 0;
}

int cmd_render(const Options& o) {
    const Loaded l = load_model(o);
    data::EventSequence history;
    if (!o.events.empty()) history = load_events_for(o, l).sequence;
    if (o.at.empty()) throw ConfigError("render needs --at");
    const double t = parse_time(o.at, l.checkpoint.time_origin);
    const geo::IntensityGrid grid = geo::build_grid(l.regions, o.grid_spacing);
    const model::NeuralSurface surface(l.checkpoint.params, l.regions);
    eval::write_raster_csv(fs::path(o.out) / "intensity.csv",
                           eval::render_intensity(surface, grid, t, history));
    return 0;
}

int cmd_kernel_viz(const Options& o) {
    const Loaded l = load_model(o);
    eval::write_kernel_csv(
        fs::path(o.out) / "kernel_viz.csv",
        eval::kernel_samples(l.checkpoint.params.kernel, l.regions, o.samples, o.seed));
    return 0;
}

} // namespace

int run(int argc, char** argv) {
    Options o;
    CLI::App app{"Hawkes point process with neural spatial kernels"};
    app.set_config("--config", "", "Config file (TOML or INI); command-line flags win");
    app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
    app.add_option("--workers", o.workers, "Worker threads (0 = all cores)")->capture_default_str();
    app.add_option("--out", o.out, "Output directory")->capture_default_str();
    app.require_subcommand(1);

    auto inputs = [&](CLI::App* c, bool events, bool checkpoint) {
        c->add_option("--regions", o.regions, "Region GeoJSON file");
        if (events) c->add_option("--events", o.events, "Event CSV file (timestamp,lon,lat)");
        if (checkpoint) c->add_option("--checkpoint", o.checkpoint, "Model checkpoint");
        c->add_option("--horizon", o.horizon, "Observation horizon T in days");
    };
    auto grid_opt = [&](CLI::App* c) {
        c->add_option("--grid-spacing", o.grid_spacing, "Grid spacing (degrees)")->capture_default_str();
    };
    auto fit_opts = [&](CLI::App* c) {
        c->add_option("--learning-rate", o.learning_rate)->capture_default_str();
        c->add_option("--iterations", o.iterations)->capture_default_str();
        c->add_option("--tolerance", o.tolerance)->capture_default_str();
        c->add_flag("--step-halving", o.step_halving, "Halve the step after a non-finite update");
    };
    auto arch_opts = [&](CLI::App* c) {
        c->add_option("--components", o.components, "R")->capture_default_str();
        c->add_option("--hidden", o.hidden, "H")->capture_default_str();
        c->add_option("--area", o.area, "Ellipse area A")->capture_default_str();
        c->add_option("--focus-bound", o.focus_bound, "c")->capture_default_str();
        c->add_option("--bandwidth", o.bandwidth, "Background weight bandwidth")->capture_default_str();
    };

    CLI::App* fit = app.add_subcommand("fit", "Fit the model and write a checkpoint");
    inputs(fit, true, false);
    fit->add_option("--covariates", o.covariates, "Covariate names (default: all numeric)")
        ->delimiter(',');
    fit->add_option("--origin", o.origin, "Timestamp of t = 0 (default: first event)");
    arch_opts(fit);
    grid_opt(fit);
    fit_opts(fit);

    CLI::App* sim = app.add_subcommand("simulate", "Sample events by thinning");
    inputs(sim, false, true);
    sim->add_option("--covariates", o.covariates)->delimiter(',');
    sim->add_option("--origin", o.origin, "Timestamp of t = 0 in the output");
    sim->add_option("--start", o.start, "Start time in days")->capture_default_str();
    sim->add_option("--base-rate", o.base_rate, "mu0 (without a checkpoint)")->capture_default_str();
    sim->add_option("--magnitude", o.magnitude, "C (without a checkpoint)")->capture_default_str();
    sim->add_option("--time-scale", o.time_scale, "sigma0 in days (without a checkpoint)")
        ->capture_default_str();
    sim->add_option("--cov-scale", o.cov_scale, "tau_z (without a checkpoint)")->capture_default_str();
    arch_opts(sim);

    CLI::App* pred = app.add_subcommand("predict", "Expected counts per region over an interval");
    inputs(pred, true, true);
    pred->add_option("--from", o.from, "Interval start (days or timestamp)");
    pred->add_option("--to", o.to, "Interval end (days or timestamp)");
    pred->add_option("--mode", o.mode, "History mode: frozen or insample")->capture_default_str();
    pred->add_option("--time-step", o.time_step, "Temporal sub-step in days (0 = exact)")
        ->capture_default_str();
    grid_opt(pred);

    CLI::App* ev = app.add_subcommand("evaluate", "Weekly out-of-sample comparison");
    inputs(ev, true, true);
    ev->add_option("--split", o.split, "Train/test split (days or timestamp)");
    ev->add_option("--models", o.models, "Subset of neural,etas,ar,persistent")->delimiter(',');
    ev->add_flag("--insample", o.insample, "Also write the monthly in-sample report");
    ev->add_option("--time-step", o.time_step)->capture_default_str();
    ev->add_option("--ar-p", o.ar_p)->capture_default_str();
    ev->add_option("--ar-d", o.ar_d)->capture_default_str();
    grid_opt(ev);
    fit_opts(ev);

    CLI::App* ren = app.add_subcommand("render", "Intensity raster at one time");
    inputs(ren, true, true);
    ren->add_option("--at", o.at, "Time (days or timestamp)");
    grid_opt(ren);

    CLI::App* kv = app.add_subcommand("kernel-viz", "Focus vectors and weights at sampled sites");
    inputs(kv, false, true);
    kv->add_option("--samples", o.samples)->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (o.workers < 0) throw ConfigError("--workers must be nonnegative");
        if (o.workers > 0) set_worker_count(o.workers);
        fs::create_directories(o.out);
        if (fit->parsed()) return cmd_fit(o);
        if (sim->parsed()) return cmd_simulate(o);
        if (pred->parsed()) return cmd_predict(o);
        if (ev->parsed()) return cmd_evaluate(o);
        if (ren->parsed()) return cmd_render(o);
        if (kv->parsed()) return cmd_kernel_viz(o);
    } catch (const MissingInput& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitMissingInput;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitFailure;
}

int run(const std::vector<std::string>& args) {
    std::vector<std::string> copy = args;
    std::vector<char*> argv;
    for (std::string& a : copy) argv.push_back(a.data());
    argv.push_back(nullptr);
    return run(static_cast<int>(copy.size()), argv.data());
}

} // namespace nshawkes::cli
