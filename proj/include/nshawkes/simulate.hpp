#pragma once

#include "nshawkes/data.hpp"
#include "nshawkes/geo.hpp"
#include "nshawkes/model.hpp"
#include "nshawkes/surface.hpp"

#include <cstddef>
#include <cstdint>
#include <vector>

namespace nshawkes::simulate {

struct SimConfig {
    double horizon = 0.0;             // T, days
    double start = 0.0;               // events are drawn on (start, T]
    std::uint64_t seed = 0;
    data::EventSequence history;      // earlier events, all before `start`
    /// When false only `history` triggers: new events do not excite each
    /// other (an inhomogeneous Poisson replay of a frozen history).
    bool self_exciting = true;
    /// Longest stretch of time (days) before the intensity bound is
    /// recomputed even without an acceptance; 0 means the triggering window.
    double refresh_interval = 0.0;
};

/// Ogata thinning on the region set. Returns the new events only, sorted,
/// with horizon T.
data::EventSequence simulate(const IntensitySurface& surface, const geo::RegionSet& regions,
                             const SimConfig& config);
data::EventSequence simulate(const model::ModelParams& params, const geo::RegionSet& regions,
                             const SimConfig& config);

/// Independent replications, run in parallel; replication k is seeded from
/// (config.seed, k).
std::vector<data::EventSequence> replicate(const IntensitySurface& surface,
                                           const geo::RegionSet& regions,
                                           const SimConfig& config, std::size_t count);

} // namespace nshawkes::simulate
