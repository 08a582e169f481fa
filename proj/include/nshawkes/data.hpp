#pragma once

#include "nshawkes/geo.hpp"

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace nshawkes::data {

/// One incident: time in days since the dataset origin, location in lon/lat.
struct Event {
    double t = 0.0;
    geo::Point s;
};

/// Time-ordered events observed on [0, horizon].
struct EventSequence {
    std::vector<Event> events;
    double horizon = 0.0;

    std::size_t size() const { return events.size(); }
    bool empty() const { return events.empty(); }
    const Event& operator[](std::size_t i) const { return events[i]; }
    auto begin() const { return events.begin(); }
    auto end() const { return events.end(); }
};

/// Throws ContractError unless times are non-decreasing and within [0, horizon].
void validate(const EventSequence& sequence);

using TimePoint = std::chrono::sys_time<std::chrono::microseconds>;

/// Accepts `YYYY-MM-DD`, `YYYY-MM-DDTHH:MM:SS[.ffffff][Z]` (space also allowed
/// as the separator). Throws ParseError.
TimePoint parse_timestamp(const std::string& text);
/// ISO-8601 with microseconds, no zone suffix.
std::string format_timestamp(TimePoint tp);
double days_between(TimePoint origin, TimePoint tp);
TimePoint add_days(TimePoint origin, double days);

struct LoadOptions {
    std::optional<std::string> origin;  // default: earliest retained event
    std::optional<double> horizon;      // default: latest retained event time
};

struct LoadedEvents {
    EventSequence sequence;
    std::size_t dropped = 0;  // rows outside the domain box or the time window
    std::string origin;       // timestamp that maps to t = 0
};

/// Reads `timestamp,lon,lat` rows (header required, column order free).
LoadedEvents load_events(const std::filesystem::path& path, const geo::Box& domain,
                         const LoadOptions& options = {});

void save_events(const std::filesystem::path& path, const EventSequence& sequence,
                 const std::string& origin);

/// Per-covariate mean and sample standard deviation (denominator n - 1).
struct CovariateStats {
    std::vector<std::string> names;
    std::vector<double> mean;
    std::vector<double> sd;
};

std::pair<geo::RegionSet, CovariateStats> standardize(const geo::RegionSet& regions);
/// Standardizes with previously computed statistics.
geo::RegionSet apply_standardization(const geo::RegionSet& regions, const CovariateStats& stats);
geo::RegionSet unstandardize(const geo::RegionSet& regions, const CovariateStats& stats);

/// Chronological holdout: train gets t < t_split with horizon t_split, test
/// gets the rest with the original horizon. Requires 0 < t_split <= horizon.
std::pair<EventSequence, EventSequence> split(const EventSequence& sequence, double t_split);

} // namespace nshawkes::data
