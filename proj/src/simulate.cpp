#include "nshawkes/simulate.hpp"

#include "nshawkes/errors.hpp"
#include "nshawkes/parallel.hpp"
#include "nshawkes/random.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <random>
#include <string>

namespace nshawkes::simulate {

namespace {

struct Source {
    double t;
    kernel::SiteFeatures site;
};

} // namespace

data::EventSequence simulate(const IntensitySurface& surface, const geo::RegionSet& regions,
                             const SimConfig& config) {
    if (!(config.horizon >= 0.0) || !std::isfinite(config.horizon)) {
        throw ConfigError("simulation horizon must be a finite non-negative number");
    }
    if (config.start < 0.0 || config.start > config.horizon) {
        throw ConfigError("simulation start must lie in [0, T]");
    }
    if (regions.empty()) throw ConfigError("cannot simulate on an empty region set");
    for (const data::Event& e : config.history) {
        if (!(e.t < config.start)) {
            throw ContractError("simulation history must precede the start time");
        }
    }

    data::EventSequence out;
    out.horizon = config.horizon;
    if (config.horizon <= config.start) return out;

    const geo::Box box = regions.bounds();
    const double box_area = box.width() * box.height();
    const double window = surface.window();
    const double refresh = config.refresh_interval > 0.0 ? config.refresh_interval : window;
    const double cutoff = surface.spatial_cutoff();
    const double bg_bound = surface.background_bound(regions);
    const double spatial_bound = surface.spatial_bound();

    std::mt19937_64 rng(stream_seed(config.seed, "simulation"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    // Sources that can still trigger, oldest first.
    std::deque<Source> active;
    for (const data::Event& e : config.history) {
        if (config.start - e.t <= window) active.push_back({e.t, surface.prepare(e.s)});
    }

    double t = config.start;
    while (true) {
        while (!active.empty() && t - active.front().t > window) active.pop_front();
        // Temporal kernels do not increase with lag, so each source's current
        // value bounds it until the next acceptance.
        double excite = 0.0;
        for (const Source& src : active) {
            excite += surface.temporal(std::max(t - src.t, std::numeric_limits<double>::denorm_min()));
        }
        const double bound = 1.01 * (bg_bound + spatial_bound * excite);
        const double valid_until = t + refresh;
        const double rate = bound * box_area;
        t += std::exponential_distribution<double>(rate)(rng);
        if (t > valid_until) {
            // Memorylessness: restart from the refresh point with a fresh bound.
            t = valid_until;
            if (t >= config.horizon) break;
            continue;
        }
        if (t > config.horizon) break;
        const geo::Point s{box.min_x + box.width() * unit(rng), box.min_y + box.height() * unit(rng)};
        const double u = unit(rng);
        if (!geo::region_of(s, regions)) continue;

        const kernel::SiteFeatures here = surface.prepare(s);
        double lambda = surface.background(s);
        for (const Source& src : active) {
            const double nu = surface.temporal(t - src.t);
            if (nu == 0.0 || geo::distance(s, src.site.location) > cutoff) continue;
            lambda += nu * surface.spatial(here, src.site);
        }
        if (!(lambda <= bound)) {
            throw Error("thinning bound " + std::to_string(bound) + " below intensity " +
                        std::to_string(lambda) + " at t=" + std::to_string(t));
        }
        if (u * bound < lambda) {
            out.events.push_back({t, s});
            if (config.self_exciting) active.push_back({t, here});
        }
    }
    return out;
}

data::EventSequence simulate(const model::ModelParams& params, const geo::RegionSet& regions,
                             const SimConfig& config) {
    const model::NeuralSurface surface(params, regions);
    return simulate(surface, regions, config);
}

std::vector<data::EventSequence> replicate(const IntensitySurface& surface,
                                           const geo::RegionSet& regions,
                                           const SimConfig& config, std::size_t count) {
    std::vector<data::EventSequence> out(count);
    parallel_for(count, [&](std::size_t k) {
        SimConfig c = config;
        c.seed = stream_seed(config.seed, "replication-" + std::to_string(k));
        out[k] = simulate(surface, regions, c);
    }, 1);
    return out;
}

} // namespace nshawkes::simulate
