#include "nshawkes/data.hpp"

#include "nshawkes/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace nshawkes::data {

namespace chr = std::chrono;

void validate(const EventSequence& sequence) {
    double prev = 0.0;
    for (std::size_t i = 0; i < sequence.size(); ++i) {
        const double t = sequence[i].t;
        if (!(t >= prev) || t > sequence.horizon) {
            throw ContractError("event " + std::to_string(i) + " at t=" + std::to_string(t) +
                                " breaks ordering or lies outside [0, " +
                                std::to_string(sequence.horizon) + "]");
        }
        prev = t;
    }
}

TimePoint parse_timestamp(const std::string& raw) {
    std::string text = raw;
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.pop_back();
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.erase(0, 1);
    if (!text.empty() && (text.back() == 'Z' || text.back() == 'z')) text.pop_back();

    int y = 0, mo = 0, d = 0, h = 0, mi = 0;
    double sec = 0.0;
    int consumed = 0;
    bool ok = false;
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d%n", &y, &mo, &d, &consumed) == 3) {
        if (static_cast<std::size_t>(consumed) == text.size()) {
            ok = true;
        } else if (text[consumed] == 'T' || text[consumed] == ' ') {
            int rest = 0;
            ok = std::sscanf(text.c_str() + consumed + 1, "%2d:%2d:%lf%n", &h, &mi, &sec, &rest) == 3 &&
                 static_cast<std::size_t>(consumed + 1 + rest) == text.size();
        }
    }
    const chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(mo)},
                                  chr::day{static_cast<unsigned>(d)}};
    if (!ok || !ymd.ok() || h < 0 || h > 23 || mi < 0 || mi > 59 || !(sec >= 0.0) || sec >= 61.0) {
        throw ParseError("unparseable timestamp '" + raw + "'");
    }
    const auto micros = static_cast<long long>(std::llround(sec * 1e6));
    return TimePoint{chr::sys_days{ymd}} + chr::hours{h} + chr::minutes{mi} +
           chr::microseconds{micros};
}

std::string format_timestamp(TimePoint tp) {
    const auto days = chr::floor<chr::days>(tp);
    const chr::year_month_day ymd{days};
    auto rem = tp - days;
    const auto h = chr::duration_cast<chr::hours>(rem);
    rem -= h;
    const auto m = chr::duration_cast<chr::minutes>(rem);
    rem -= m;
    const auto s = chr::duration_cast<chr::seconds>(rem);
    rem -= s;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%06lld", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                  static_cast<int>(h.count()), static_cast<int>(m.count()),
                  static_cast<int>(s.count()), static_cast<long long>(rem.count()));
    return buf;
}

double days_between(TimePoint origin, TimePoint tp) {
    return static_cast<double>((tp - origin).count()) / 86400e6;
}

TimePoint add_days(TimePoint origin, double days) {
    return origin + chr::microseconds{std::llround(days * 86400e6)};
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) {
        while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
        while (!field.empty() && field.front() == ' ') field.erase(0, 1);
        out.push_back(field);
    }
    return out;
}

bool less_event(const Event& a, const Event& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.s.x != b.s.x) return a.s.x < b.s.x;
    return a.s.y < b.s.y;
}

} // namespace

LoadedEvents load_events(const std::filesystem::path& path, const geo::Box& domain,
                         const LoadOptions& options) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open event file " + path.string());

    std::string line;
    std::size_t line_no = 0;
    int col_t = -1, col_x = -1, col_y = -1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
        const auto header = split_row(line);
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (header[c] == "timestamp") col_t = static_cast<int>(c);
            if (header[c] == "lon") col_x = static_cast<int>(c);
            if (header[c] == "lat") col_y = static_cast<int>(c);
        }
        break;
    }
    if (line_no == 0) throw ParseError("event file " + path.string() + " is empty");
    if (col_t < 0 || col_x < 0 || col_y < 0) {
        throw SchemaError("event file " + path.string() + " needs a timestamp,lon,lat header");
    }
    const auto width = static_cast<std::size_t>(std::max({col_t, col_x, col_y}));

    struct Raw {
        TimePoint when;
        geo::Point s;
    };
    std::vector<Raw> rows;
    std::size_t dropped = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \r\t") == std::string::npos) continue;
        const auto fields = split_row(line);
        try {
            if (fields.size() <= width) throw ParseError("too few columns");
            Raw r;
            r.when = parse_timestamp(fields[col_t]);
            std::size_t used = 0;
            r.s.x = std::stod(fields[col_x], &used);
            if (used != fields[col_x].size()) throw ParseError("bad lon");
            r.s.y = std::stod(fields[col_y], &used);
            if (used != fields[col_y].size()) throw ParseError("bad lat");
            if (!std::isfinite(r.s.x) || !std::isfinite(r.s.y)) throw ParseError("non-finite");
            if (!domain.contains(r.s)) {
                ++dropped;
                continue;
            }
            rows.push_back(r);
        } catch (const std::exception& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) +
                             ": unparseable row '" + line + "' (" + e.what() + ")");
        }
    }
    if (rows.empty() && dropped == 0) {
        throw ParseError("event file " + path.string() + " has no data rows");
    }

    LoadedEvents result;
    TimePoint origin;
    if (options.origin) {
        origin = parse_timestamp(*options.origin);
    } else if (!rows.empty()) {
        origin = std::min_element(rows.begin(), rows.end(), [](const Raw& a, const Raw& b) {
                     return a.when < b.when;
                 })->when;
    }
    result.origin = format_timestamp(origin);

    auto& events = result.sequence.events;
    for (const Raw& r : rows) {
        const double t = days_between(origin, r.when);
        if (t < 0.0 || (options.horizon && t > *options.horizon)) {
            ++dropped;
            continue;
        }
        events.push_back({t, r.s});
    }
    std::sort(events.begin(), events.end(), less_event);
    result.sequence.horizon =
        options.horizon ? *options.horizon : (events.empty() ? 0.0 : events.back().t);
    result.dropped = dropped;
    return result;
}

void save_events(const std::filesystem::path& path, const EventSequence& sequence,
                 const std::string& origin) {
    const TimePoint base = parse_timestamp(origin);
    std::ofstream out(path);
    if (!out) throw IoError("cannot write event file " + path.string());
    out << "timestamp,lon,lat\n";
    char buf[64];
    for (const Event& e : sequence) {
        std::snprintf(buf, sizeof buf, ",%.17g,%.17g\n", e.s.x, e.s.y);
        out << format_timestamp(add_days(base, e.t)) << buf;
    }
}

std::pair<geo::RegionSet, CovariateStats> standardize(const geo::RegionSet& regions) {
    const std::size_t n = regions.size();
    if (n < 2) throw ContractError("standardization needs at least two regions");
    CovariateStats stats;
    stats.names = regions.covariate_names();
    for (std::size_t l = 0; l < regions.covariate_count(); ++l) {
        double mean = 0.0;
        for (std::size_t j = 0; j < n; ++j) mean += regions[j].covariates[l];
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = regions[j].covariates[l] - mean;
            ss += d * d;
        }
        const double sd = std::sqrt(ss / static_cast<double>(n - 1));
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            throw ContractError("constant covariate '" + stats.names[l] + "'");
        }
        stats.mean.push_back(mean);
        stats.sd.push_back(sd);
    }
    return {apply_standardization(regions, stats), stats};
}

geo::RegionSet apply_standardization(const geo::RegionSet& regions, const CovariateStats& stats) {
    if (stats.names != regions.covariate_names()) {
        throw SchemaError("covariate statistics do not match the region covariates");
    }
    std::vector<std::vector<double>> rows;
    rows.reserve(regions.size());
    for (const geo::Region& r : regions.regions()) {
        std::vector<double> row(r.covariates.size());
        for (std::size_t l = 0; l < row.size(); ++l) {
            row[l] = (r.covariates[l] - stats.mean[l]) / stats.sd[l];
        }
        rows.push_back(std::move(row));
    }
    return regions.with_covariates(rows);
}

geo::RegionSet unstandardize(const geo::RegionSet& regions, const CovariateStats& stats) {
    std::vector<std::vector<double>> rows;
    rows.reserve(regions.size());
    for (const geo::Region& r : regions.regions()) {
        std::vector<double> row(r.covariates.size());
        for (std::size_t l = 0; l < row.size(); ++l) {
            row[l] = r.covariates[l] * stats.sd[l] + stats.mean[l];
        }
        rows.push_back(std::move(row));
    }
    return regions.with_covariates(rows);
}

std::pair<EventSequence, EventSequence> split(const EventSequence& sequence, double t_split) {
    if (!(t_split > 0.0) || t_split > sequence.horizon) {
        throw ContractError("split time " + std::to_string(t_split) + " outside (0, " +
                            std::to_string(sequence.horizon) + "]");
    }
    EventSequence train;
    EventSequence test;
    train.horizon = t_split;
    test.horizon = sequence.horizon;
    for (const Event& e : sequence) {
        (e.t < t_split ? train : test).events.push_back(e);
    }
    return {std::move(train), std::move(test)};
}

} // namespace nshawkes::data
