#include "nshawkes/eval.hpp"

#include "nshawkes/errors.hpp"
#include "nshawkes/parallel.hpp"
#include "nshawkes/random.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

namespace nshawkes::eval {

namespace {

std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

} // namespace

CountIntegrator::CountIntegrator(const IntensitySurface& surface, const geo::RegionSet& regions,
                                 const geo::IntensityGrid& grid, double time_step)
    : surface_(&surface), regions_(&regions), grid_(&grid), time_step_(time_step) {
    if (!(time_step >= 0.0) || !std::isfinite(time_step)) {
        throw ConfigError("temporal quadrature step must be finite and nonnegative");
    }
    const auto& cells = grid.cells();
    cell_sites_.resize(cells.size());
    std::vector<double> bg(cells.size(), 0.0);
    const auto& active = grid.active_cells();
    parallel_for(active.size(), [&](std::size_t k) {
        const std::size_t c = active[k];
        cell_sites_[c] = surface.prepare(cells[c].center);
        bg[c] = surface.background(cells[c]);
    }, 64);
    background_mass_.assign(regions.size(), 0.0);
    for (std::size_t c : active) background_mass_[*cells[c].region] += bg[c] * grid.cell_area();
}

std::vector<double> CountIntegrator::spatial_mass(geo::Point s) const {
    std::vector<double> mass(regions_->size(), 0.0);
    const kernel::SiteFeatures src = surface_->prepare(s);
    const double cutoff = surface_->spatial_cutoff();
    const double h = grid_->spacing();
    const geo::Point o = grid_->origin();
    const auto nx = static_cast<long>(grid_->nx());
    const auto ny = static_cast<long>(grid_->ny());
    const long i0 = std::max(0L, static_cast<long>(std::floor((s.x - cutoff - o.x) / h)));
    const long i1 = std::min(nx - 1, static_cast<long>(std::floor((s.x + cutoff - o.x) / h)));
    const long j0 = std::max(0L, static_cast<long>(std::floor((s.y - cutoff - o.y) / h)));
    const long j1 = std::min(ny - 1, static_cast<long>(std::floor((s.y + cutoff - o.y) / h)));
    for (long j = j0; j <= j1; ++j) {
        for (long i = i0; i <= i1; ++i) {
            const auto c = static_cast<std::size_t>(j * nx + i);
            const geo::GridCell& cell = grid_->cell(c);
            if (!cell.region || geo::distance(cell.center, s) > cutoff) continue;
            mass[*cell.region] += surface_->spatial(cell_sites_[c], src) * grid_->cell_area();
        }
    }
    return mass;
}

double CountIntegrator::temporal_mass(double t_src, double t1, double t2) const {
    const double lo = std::max(t1 - t_src, 0.0);
    const double hi = std::min(t2 - t_src, surface_->window());
    if (!(hi > lo)) return 0.0;
    if (time_step_ == 0.0) return surface_->temporal_integral(lo, hi);
    const auto steps = static_cast<std::size_t>(std::ceil((hi - lo) / time_step_ - 1e-12));
    const double dt = (hi - lo) / static_cast<double>(std::max<std::size_t>(steps, 1));
    double total = 0.0;
    for (std::size_t k = 0; k < std::max<std::size_t>(steps, 1); ++k) {
        total += surface_->temporal(lo + (static_cast<double>(k) + 0.5) * dt);
    }
    return total * dt;
}

std::vector<double> CountIntegrator::expected_counts(double t1, double t2,
                                                     const data::EventSequence& events,
                                                     HistoryMode mode) const {
    if (!(t2 >= t1)) throw ContractError("interval end precedes its start");
    const std::size_t J = regions_->size();
    std::vector<double> out(J);
    for (std::size_t j = 0; j < J; ++j) out[j] = background_mass_[j] * (t2 - t1);

    const double window = surface_->window();
    const double last = mode == HistoryMode::Frozen ? t1 : t2;
    std::vector<std::size_t> sources;
    for (std::size_t i = 0; i < events.size(); ++i) {
        const double t = events[i].t;
        if (t < last && t1 - t <= window) sources.push_back(i);
    }
    std::vector<std::vector<double>> contrib(sources.size());
    parallel_for(sources.size(), [&](std::size_t k) {
        const data::Event& e = events[sources[k]];
        const double tm = temporal_mass(e.t, t1, t2);
        if (tm == 0.0) return;
        contrib[k] = spatial_mass(e.s);
        for (double& v : contrib[k]) v *= tm;
    }, 8);
    for (const auto& c : contrib) {
        for (std::size_t j = 0; j < c.size(); ++j) out[j] += c[j];
    }
    return out;
}

double CountIntegrator::expected_count(double t1, double t2, const std::string& region_id,
                                       const data::EventSequence& events, HistoryMode mode) const {
    const auto idx = regions_->index_of(region_id);
    if (!idx) throw ContractError("unknown region id '" + region_id + "'");
    return expected_counts(t1, t2, events, mode)[*idx];
}

std::vector<std::vector<double>> observed_counts(const data::EventSequence& events,
                                                 const geo::RegionSet& regions,
                                                 const std::vector<double>& edges) {
    if (edges.size() < 2) return {};
    std::vector<std::vector<double>> out(edges.size() - 1, std::vector<double>(regions.size(), 0.0));
    for (const data::Event& e : events) {
        if (e.t < edges.front() || e.t > edges.back()) continue;
        auto k = static_cast<std::size_t>(std::upper_bound(edges.begin(), edges.end(), e.t) -
                                          edges.begin()) - 1;
        k = std::min(k, out.size() - 1);
        if (const auto r = geo::region_of(e.s, regions)) out[k][*r] += 1.0;
    }
    return out;
}

std::vector<std::size_t> frequent_regions(const std::vector<double>& counts, double fraction) {
    std::vector<std::size_t> order(counts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return counts[a] > counts[b]; });
    const auto k = static_cast<std::size_t>(
        std::ceil(fraction * static_cast<double>(counts.size()) - 1e-9));
    order.resize(std::min(k, order.size()));
    std::sort(order.begin(), order.end());
    return order;
}

void score(PredictionReport& r) {
    const std::size_t K = r.predicted.size();
    const std::size_t J = r.region_ids.size();
    std::vector<char> is_frequent(J, 0);
    for (std::size_t j : r.frequent) is_frequent[j] = 1;
    double sum_rare = 0.0, sum_freq = 0.0;
    std::size_t n_rare = 0, n_freq = 0;
    double city = 0.0, rel = 0.0;
    std::size_t n_rel = 0;
    for (std::size_t k = 0; k < K; ++k) {
        double tp = 0.0, to = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            const double err = std::abs(r.predicted[k][j] - r.observed[k][j]);
            if (is_frequent[j]) {
                sum_freq += err;
                ++n_freq;
            } else {
                sum_rare += err;
                ++n_rare;
            }
            tp += r.predicted[k][j];
            to += r.observed[k][j];
        }
        city += std::abs(tp - to);
        if (to > 0.0) {
            rel += std::abs(tp - to) / to;
            ++n_rel;
        }
    }
    r.mae_rare = n_rare ? sum_rare / static_cast<double>(n_rare) : 0.0;
    r.mae_frequent = n_freq ? sum_freq / static_cast<double>(n_freq) : 0.0;
    r.mae_total = n_rare + n_freq ? (sum_rare + sum_freq) / static_cast<double>(n_rare + n_freq) : 0.0;
    r.city_mae = K ? city / static_cast<double>(K) : 0.0;
    r.mre = n_rel ? rel / static_cast<double>(n_rel) : 0.0;
}

namespace {

std::vector<std::string> ids(const geo::RegionSet& regions) {
    std::vector<std::string> out;
    for (const auto& r : regions.regions()) out.push_back(r.id);
    return out;
}

std::vector<double> region_totals(const data::EventSequence& events, const geo::RegionSet& regions,
                                  double t0, double t1) {
    const auto counts = observed_counts(events, regions, {t0, t1});
    return counts.empty() ? std::vector<double>(regions.size(), 0.0) : counts.front();
}

} // namespace

PredictionReport insample_series(const CountIntegrator& integrator,
                                 const data::EventSequence& events,
                                 const geo::RegionSet& regions, double bin_days) {
    if (!(bin_days > 0.0)) throw ConfigError("bin width must be positive");
    PredictionReport r;
    r.region_ids = ids(regions);
    r.edges.push_back(0.0);
    while (r.edges.back() < events.horizon) {
        r.edges.push_back(std::min(r.edges.back() + bin_days, events.horizon));
    }
    for (std::size_t k = 0; k + 1 < r.edges.size(); ++k) {
        r.predicted.push_back(integrator.expected_counts(r.edges[k], r.edges[k + 1], events,
                                                         HistoryMode::InSample));
    }
    r.observed = observed_counts(events, regions, r.edges);
    r.frequent = frequent_regions(region_totals(events, regions, 0.0, events.horizon));
    score(r);
    return r;
}

std::vector<double> test_weeks(double t_split, double horizon, double week_days) {
    if (!(week_days > 0.0)) throw ConfigError("week length must be positive");
    std::vector<double> edges{t_split};
    while (edges.back() + week_days <= horizon + 1e-9) edges.push_back(edges.back() + week_days);
    if (edges.size() < 2) throw ContractError("test window holds no full week");
    return edges;
}

baselines::WeeklySeries training_series(const data::EventSequence& train,
                                        const geo::RegionSet& regions, double week_days) {
    const double t_split = train.horizon;
    const auto weeks = static_cast<std::size_t>(std::floor(t_split / week_days + 1e-9));
    std::vector<double> edges;
    for (std::size_t k = 0; k <= weeks; ++k) {
        edges.push_back(t_split - week_days * static_cast<double>(weeks - k));
    }
    baselines::WeeklySeries s;
    s.counts.assign(regions.size(), {});
    const auto counts = observed_counts(train, regions, edges);
    for (const auto& week : counts) {
        for (std::size_t j = 0; j < regions.size(); ++j) s.counts[j].push_back(week[j]);
    }
    return s;
}

namespace {

PredictionReport oos_frame(const data::EventSequence& train, const data::EventSequence& test,
                           const geo::RegionSet& regions, double week_days) {
    PredictionReport r;
    r.region_ids = ids(regions);
    r.edges = test_weeks(train.horizon, test.horizon, week_days);
    r.observed = observed_counts(test, regions, r.edges);
    r.frequent = frequent_regions(region_totals(train, regions, 0.0, train.horizon));
    return r;
}

} // namespace

PredictionReport oos_predict(const CountIntegrator& integrator, const data::EventSequence& train,
                             const data::EventSequence& test, const geo::RegionSet& regions,
                             double week_days) {
    PredictionReport r = oos_frame(train, test, regions, week_days);
    data::EventSequence history;
    history.events = train.events;
    history.events.insert(history.events.end(), test.events.begin(), test.events.end());
    history.horizon = test.horizon;
    for (std::size_t k = 0; k + 1 < r.edges.size(); ++k) {
        r.predicted.push_back(
            integrator.expected_counts(r.edges[k], r.edges[k + 1], history, HistoryMode::Frozen));
    }
    score(r);
    return r;
}

PredictionReport oos_predict_series(const SeriesPredictor& predictor,
                                    const data::EventSequence& train,
                                    const data::EventSequence& test,
                                    const geo::RegionSet& regions, double week_days) {
    PredictionReport r = oos_frame(train, test, regions, week_days);
    baselines::WeeklySeries series = training_series(train, regions, week_days);
    for (std::size_t k = 0; k + 1 < r.edges.size(); ++k) {
        auto p = predictor(series);
        if (p.size() != regions.size()) throw ContractError("predictor returned the wrong size");
        r.predicted.push_back(std::move(p));
        for (std::size_t j = 0; j < regions.size(); ++j) series.counts[j].push_back(r.observed[k][j]);
    }
    score(r);
    return r;
}

void write_report_csv(const std::filesystem::path& path, const PredictionReport& r) {
    auto out = open_out(path);
    out << "interval_start,interval_end,region,predicted,observed\n";
    for (std::size_t k = 0; k < r.predicted.size(); ++k) {
        for (std::size_t j = 0; j < r.region_ids.size(); ++j) {
            out << num(r.edges[k]) << ',' << num(r.edges[k + 1]) << ',' << r.region_ids[j] << ','
                << num(r.predicted[k][j]) << ',' << num(r.observed[k][j]) << '\n';
        }
    }
    if (!out) throw IoError("failed writing " + path.string());
}

std::string report_summary_json(const PredictionReport& r) {
    nlohmann::json j;
    j["mae_rare"] = r.mae_rare;
    j["mae_frequent"] = r.mae_frequent;
    j["mae_total"] = r.mae_total;
    j["city_mae"] = r.city_mae;
    j["mre"] = r.mre;
    j["intervals"] = r.predicted.size();
    j["regions"] = r.region_ids.size();
    std::vector<std::string> freq;
    for (std::size_t k : r.frequent) freq.push_back(r.region_ids[k]);
    j["frequent_regions"] = freq;
    return j.dump(2);
}

std::vector<RasterCell> render_intensity(const IntensitySurface& surface,
                                         const geo::IntensityGrid& grid, double t,
                                         const data::EventSequence& history) {
    struct Src {
        double nu;
        kernel::SiteFeatures site;
    };
    std::vector<Src> sources;
    for (const data::Event& e : history) {
        if (!(e.t < t) || t - e.t > surface.window()) continue;
        sources.push_back({surface.temporal(t - e.t), surface.prepare(e.s)});
    }
    const double cutoff = surface.spatial_cutoff();
    const auto& active = grid.active_cells();
    std::vector<RasterCell> out(active.size());
    parallel_for(active.size(), [&](std::size_t k) {
        const geo::GridCell& cell = grid.cell(active[k]);
        double v = surface.background(cell);
        if (!sources.empty()) {
            const kernel::SiteFeatures here = surface.prepare(cell.center);
            for (const Src& s : sources) {
                if (s.nu == 0.0 || geo::distance(cell.center, s.site.location) > cutoff) continue;
                v += s.nu * surface.spatial(here, s.site);
            }
        }
        out[k] = {cell.center, v};
    }, 64);
    return out;
}

void write_raster_csv(const std::filesystem::path& path, const std::vector<RasterCell>& raster) {
    auto out = open_out(path);
    out << "lon,lat,intensity\n";
    for (const RasterCell& c : raster) {
        out << num(c.center.x) << ',' << num(c.center.y) << ',' << num(c.intensity) << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

std::vector<KernelSample> kernel_samples(const kernel::KernelParams& params,
                                         const geo::RegionSet& regions, std::size_t count,
                                         std::uint64_t seed) {
    if (regions.empty()) throw ConfigError("cannot sample locations on an empty region set");
    std::mt19937_64 rng(stream_seed(seed, "kernel-viz"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const geo::Box& b = regions.bounds();
    std::vector<KernelSample> out;
    std::size_t drawn = 0;
    while (drawn < count) {
        const geo::Point s{b.min_x + b.width() * unit(rng), b.min_y + b.height() * unit(rng)};
        if (!geo::region_of(s, regions)) continue;
        ++drawn;
        const neural::FeatureOutput f = params.nets.forward(s);
        for (std::size_t r = 0; r < f.focus.size(); ++r) {
            out.push_back({s, f.focus[r], f.weight[r], static_cast<int>(r)});
        }
    }
    return out;
}

void write_kernel_csv(const std::filesystem::path& path, const std::vector<KernelSample>& samples) {
    auto out = open_out(path);
    out << "lon,lat,psi_x,psi_y,weight,r\n";
    for (const KernelSample& k : samples) {
        out << num(k.location.x) << ',' << num(k.location.y) << ',' << num(k.focus.x) << ','
            << num(k.focus.y) << ',' << num(k.weight) << ',' << k.component << '\n';
    }
    if (!out) throw IoError("failed writing " + path.string());
}

} // namespace nshawkes::eval
