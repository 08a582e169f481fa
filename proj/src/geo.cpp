#include "nshawkes/geo.hpp"

#include "nshawkes/errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

namespace nshawkes::geo {

using nlohmann::json;

double distance(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

double signed_area(const Ring& ring) {
    const std::size_t n = ring.size();
    double twice = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point& a = ring[i];
        const Point& b = ring[(i + 1) % n];
        twice += a.x * b.y - b.x * a.y;
    }
    return 0.5 * twice;
}

Point ring_centroid(const Ring& ring) {
    const std::size_t n = ring.size();
    // Shift to the first vertex to limit cancellation with large coordinates.
    const Point o = ring.front();
    double twice_area = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = ring[i] - o;
        const Point b = ring[(i + 1) % n] - o;
        const double cross = a.x * b.y - b.x * a.y;
        twice_area += cross;
        cx += (a.x + b.x) * cross;
        cy += (a.y + b.y) * cross;
    }
    if (twice_area == 0.0) {
        Point mean;
        for (const Point& p : ring) mean = mean + p;
        return (1.0 / static_cast<double>(n)) * mean;
    }
    return {o.x + cx / (3.0 * twice_area), o.y + cy / (3.0 * twice_area)};
}

bool ring_contains(const Ring& ring, Point p) {
    bool inside = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Point& a = ring[i];
        const Point& b = ring[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double x_cross = (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x;
            if (p.x < x_cross) inside = !inside;
        }
    }
    return inside;
}

namespace {

double distance_to_segment(Point p, Point a, Point b) {
    const Point ab = b - a;
    const double len2 = ab.x * ab.x + ab.y * ab.y;
    double t = 0.0;
    if (len2 > 0.0) {
        t = std::clamp(((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2, 0.0, 1.0);
    }
    return distance(p, a + t * ab);
}

double orient(Point a, Point b, Point c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

bool segments_cross(Point a, Point b, Point c, Point d) {
    const double o1 = orient(a, b, c);
    const double o2 = orient(a, b, d);
    const double o3 = orient(c, d, a);
    const double o4 = orient(c, d, b);
    if (((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) &&
        ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0))) {
        return true;
    }
    auto on_segment = [](Point p, Point q, Point r) {
        return std::min(p.x, q.x) <= r.x && r.x <= std::max(p.x, q.x) &&
               std::min(p.y, q.y) <= r.y && r.y <= std::max(p.y, q.y);
    };
    return (o1 == 0 && on_segment(a, b, c)) || (o2 == 0 && on_segment(a, b, d)) ||
           (o3 == 0 && on_segment(c, d, a)) || (o4 == 0 && on_segment(c, d, b));
}

bool self_intersects(const Ring& ring) {
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point a = ring[i];
        const Point b = ring[(i + 1) % n];
        for (std::size_t j = i + 1; j < n; ++j) {
            // Consecutive edges share a vertex by construction.
            if (j == i + 1 || (i == 0 && j == n - 1)) continue;
            if (segments_cross(a, b, ring[j], ring[(j + 1) % n])) return true;
        }
    }
    return false;
}

Box ring_bounds(const std::vector<Ring>& rings) {
    Box b{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
          -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const Ring& r : rings) {
        for (const Point& p : r) {
            b.min_x = std::min(b.min_x, p.x);
            b.min_y = std::min(b.min_y, p.y);
            b.max_x = std::max(b.max_x, p.x);
            b.max_y = std::max(b.max_y, p.y);
        }
    }
    return b;
}

bool boxes_touch(const Box& a, const Box& b, double tol) {
    return a.min_x <= b.max_x + tol && b.min_x <= a.max_x + tol && a.min_y <= b.max_y + tol &&
           b.min_y <= a.max_y + tol;
}

bool on_boundary(const Region& region, Point p, double tol) {
    for (const Ring& ring : region.rings) {
        if (distance_to_ring(ring, p) <= tol) return true;
    }
    return false;
}

bool contains(const Region& region, Point p) {
    const Box& b = region.bounds;
    constexpr double tol = 1e-12;
    if (p.x < b.min_x - tol || p.x > b.max_x + tol || p.y < b.min_y - tol || p.y > b.max_y + tol) {
        return false;
    }
    for (const Ring& ring : region.rings) {
        if (ring_contains(ring, p)) return true;
    }
    return on_boundary(region, p, tol);
}

// Any vertex of one region within tolerance of an edge of the other covers
// both shared vertices and shared (possibly partially overlapping) segments.
bool regions_touch(const Region& a, const Region& b) {
    if (!boxes_touch(a.bounds, b.bounds, kAdjacencyTolerance)) return false;
    auto vertices_near = [](const Region& from, const Region& to) {
        for (const Ring& ring : from.rings) {
            for (const Point& p : ring) {
                if (!boxes_touch(Box{p.x, p.y, p.x, p.y}, to.bounds, kAdjacencyTolerance)) continue;
                if (on_boundary(to, p, kAdjacencyTolerance)) return true;
            }
        }
        return false;
    };
    return vertices_near(a, b) || vertices_near(b, a);
}

bool id_less(const std::string& a, const std::string& b) {
    long long na = 0;
    long long nb = 0;
    const auto ra = std::from_chars(a.data(), a.data() + a.size(), na);
    const auto rb = std::from_chars(b.data(), b.data() + b.size(), nb);
    const bool a_num = ra.ec == std::errc{} && ra.ptr == a.data() + a.size();
    const bool b_num = rb.ec == std::errc{} && rb.ptr == b.data() + b.size();
    if (a_num && b_num && na != nb) return na < nb;
    if (a_num != b_num) return a_num;
    return a < b;
}

} // namespace

double distance_to_ring(const Ring& ring, Point p) {
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n; ++i) {
        best = std::min(best, distance_to_segment(p, ring[i], ring[(i + 1) % n]));
    }
    return best;
}

RegionSet::RegionSet(std::vector<Region> regions, std::vector<std::string> covariate_names)
    : regions_(std::move(regions)), covariate_names_(std::move(covariate_names)) {
    std::stable_sort(regions_.begin(), regions_.end(),
                     [](const Region& a, const Region& b) { return id_less(a.id, b.id); });
    for (std::size_t i = 1; i < regions_.size(); ++i) {
        if (regions_[i].id == regions_[i - 1].id) {
            throw SchemaError("duplicate region id '" + regions_[i].id + "'");
        }
    }
    bounds_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
               -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (Region& r : regions_) {
        if (r.rings.empty()) throw ParseError("region '" + r.id + "' has no polygon ring");
        for (const Ring& ring : r.rings) {
            if (ring.size() < 3) throw ParseError("region '" + r.id + "' has a degenerate ring");
        }
        if (r.covariates.size() != covariate_names_.size()) {
            throw SchemaError("region '" + r.id + "' has " + std::to_string(r.covariates.size()) +
                              " covariates, expected " + std::to_string(covariate_names_.size()));
        }
        r.bounds = ring_bounds(r.rings);
        double total = 0.0;
        Point weighted;
        for (const Ring& ring : r.rings) {
            const double a = std::abs(signed_area(ring));
            weighted = weighted + a * ring_centroid(ring);
            total += a;
        }
        r.centroid = total > 0.0 ? (1.0 / total) * weighted : ring_centroid(r.rings.front());
        bounds_.min_x = std::min(bounds_.min_x, r.bounds.min_x);
        bounds_.min_y = std::min(bounds_.min_y, r.bounds.min_y);
        bounds_.max_x = std::max(bounds_.max_x, r.bounds.max_x);
        bounds_.max_y = std::max(bounds_.max_y, r.bounds.max_y);
    }
    adjacency_.assign(regions_.size(), {});
    for (std::size_t i = 0; i < regions_.size(); ++i) {
        for (std::size_t j = i + 1; j < regions_.size(); ++j) {
            if (regions_touch(regions_[i], regions_[j])) {
                adjacency_[i].push_back(j);
                adjacency_[j].push_back(i);
            }
        }
    }
    for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
}

std::optional<std::size_t> RegionSet::index_of(const std::string& id) const {
    for (std::size_t i = 0; i < regions_.size(); ++i) {
        if (regions_[i].id == id) return i;
    }
    return std::nullopt;
}

RegionSet RegionSet::with_covariates(const std::vector<std::vector<double>>& rows) const {
    if (rows.size() != regions_.size()) {
        throw ContractError("covariate row count does not match region count");
    }
    RegionSet copy = *this;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != covariate_names_.size()) {
            throw ContractError("covariate row width does not match covariate count");
        }
        copy.regions_[i].covariates = rows[i];
    }
    return copy;
}

double RegionSet::area() const {
    double total = 0.0;
    for (const Region& r : regions_) {
        for (const Ring& ring : r.rings) total += std::abs(signed_area(ring));
    }
    return total;
}

std::optional<std::size_t> region_of(Point p, const RegionSet& regions) {
    for (std::size_t i = 0; i < regions.size(); ++i) {
        if (contains(regions[i], p)) return i;
    }
    return std::nullopt;
}

std::size_t nearest_region(Point p, const RegionSet& regions) {
    if (regions.empty()) throw ContractError("nearest_region on an empty region set");
    if (auto inside = region_of(p, regions)) return *inside;
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < regions.size(); ++i) {
        for (const Ring& ring : regions[i].rings) {
            const double d = distance_to_ring(ring, p);
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
    }
    return best;
}

namespace {

std::string feature_name(const json& feature, std::size_t index) {
    if (feature.contains("properties") && feature["properties"].is_object()) {
        const json& props = feature["properties"];
        if (props.contains("id")) {
            return props["id"].is_string() ? props["id"].get<std::string>() : props["id"].dump();
        }
    }
    if (feature.contains("id")) {
        return feature["id"].is_string() ? feature["id"].get<std::string>() : feature["id"].dump();
    }
    return "#" + std::to_string(index);
}

Ring parse_ring(const json& coords, const std::string& name) {
    if (!coords.is_array() || coords.size() < 4) {
        throw ParseError("feature '" + name + "': ring needs at least four positions");
    }
    Ring ring;
    ring.reserve(coords.size());
    for (const json& pos : coords) {
        if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
            throw ParseError("feature '" + name + "': malformed position " + pos.dump());
        }
        const Point p{pos[0].get<double>(), pos[1].get<double>()};
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) {
            throw ParseError("feature '" + name + "': non-finite coordinate");
        }
        ring.push_back(p);
    }
    if (!(ring.front() == ring.back())) {
        throw ParseError("feature '" + name + "': ring is not closed");
    }
    ring.pop_back();
    if (self_intersects(ring)) {
        throw ParseError("feature '" + name + "': ring is self-intersecting");
    }
    return ring;
}

std::vector<Ring> parse_geometry(const json& geometry, const std::string& name) {
    if (!geometry.is_object() || !geometry.contains("type") || !geometry.contains("coordinates")) {
        throw ParseError("feature '" + name + "': missing geometry");
    }
    const std::string type = geometry["type"].get<std::string>();
    const json& coords = geometry["coordinates"];
    std::vector<Ring> rings;
    if (type == "Polygon") {
        if (!coords.is_array() || coords.empty()) {
            throw ParseError("feature '" + name + "': empty polygon");
        }
        rings.push_back(parse_ring(coords[0], name));
    } else if (type == "MultiPolygon") {
        if (!coords.is_array() || coords.empty()) {
            throw ParseError("feature '" + name + "': empty multipolygon");
        }
        for (const json& poly : coords) {
            if (!poly.is_array() || poly.empty()) {
                throw ParseError("feature '" + name + "': empty multipolygon part");
            }
            rings.push_back(parse_ring(poly[0], name));
        }
    } else {
        throw ParseError("feature '" + name + "': unsupported geometry type " + type);
    }
    return rings;
}

} // namespace

RegionSet load_regions(const std::filesystem::path& path,
                       const std::vector<std::string>& covariate_names) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open region file " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw ParseError("region file " + path.string() + ": " + e.what());
    }
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" ||
        !doc.contains("features") || !doc["features"].is_array()) {
        throw ParseError("region file " + path.string() + " is not a FeatureCollection");
    }
    const json& features = doc["features"];
    if (features.empty()) throw SchemaError("region file " + path.string() + " has no features");

    std::vector<std::string> names = covariate_names;
    if (names.empty()) {
        const json& props = features[0].value("properties", json::object());
        for (auto it = props.begin(); it != props.end(); ++it) {
            if (it.key() != "id" && it.value().is_number()) names.push_back(it.key());
        }
    }

    std::vector<Region> regions;
    regions.reserve(features.size());
    for (std::size_t f = 0; f < features.size(); ++f) {
        const json& feature = features[f];
        const std::string name = feature_name(feature, f);
        Region region;
        region.id = name;
        region.rings = parse_geometry(feature.value("geometry", json{}), name);
        const json props = feature.value("properties", json::object());
        for (const std::string& cov : names) {
            if (!props.contains(cov)) {
                throw SchemaError("feature '" + name + "' is missing covariate column '" + cov + "'");
            }
            if (!props[cov].is_number()) {
                throw SchemaError("feature '" + name + "' covariate '" + cov + "' is not numeric");
            }
            region.covariates.push_back(props[cov].get<double>());
        }
        regions.push_back(std::move(region));
    }
    return RegionSet(std::move(regions), std::move(names));
}

void save_regions(const std::filesystem::path& path, const RegionSet& regions) {
    json features = json::array();
    for (const Region& r : regions.regions()) {
        json props = json::object();
        props["id"] = r.id;
        for (std::size_t l = 0; l < regions.covariate_count(); ++l) {
            props[regions.covariate_names()[l]] = r.covariates[l];
        }
        json polys = json::array();
        for (const Ring& ring : r.rings) {
            json coords = json::array();
            for (const Point& p : ring) coords.push_back({p.x, p.y});
            coords.push_back({ring.front().x, ring.front().y});
            polys.push_back(json::array({coords}));
        }
        json geometry = polys.size() == 1
                            ? json{{"type", "Polygon"}, {"coordinates", polys[0]}}
                            : json{{"type", "MultiPolygon"}, {"coordinates", polys}};
        features.push_back({{"type", "Feature"}, {"properties", props}, {"geometry", geometry}});
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write region file " + path.string());
    out << json{{"type", "FeatureCollection"}, {"features", features}}.dump(1) << '\n';
}

RegionSet rectangular_partition(
    const Box& box, int nx, int ny, std::vector<std::string> covariate_names,
    const std::function<std::vector<double>(Point)>& covariates) {
    if (nx < 1 || ny < 1) throw ConfigError("partition needs at least one cell per axis");
    const double dx = box.width() / nx;
    const double dy = box.height() / ny;
    std::vector<Region> regions;
    for (int j = 0; j < ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const double x0 = box.min_x + i * dx;
            const double y0 = box.min_y + j * dy;
            const double x1 = i + 1 == nx ? box.max_x : x0 + dx;
            const double y1 = j + 1 == ny ? box.max_y : y0 + dy;
            Region r;
            char id[16];
            std::snprintf(id, sizeof id, "r%04d", j * nx + i);
            r.id = id;
            r.rings.push_back(Ring{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}});
            r.covariates = covariates(Point{0.5 * (x0 + x1), 0.5 * (y0 + y1)});
            regions.push_back(std::move(r));
        }
    }
    return RegionSet(std::move(regions), std::move(covariate_names));
}

IntensityGrid::IntensityGrid(double spacing, std::size_t nx, std::size_t ny, Point origin,
                             std::vector<GridCell> cells)
    : spacing_(spacing), nx_(nx), ny_(ny), origin_(origin), cells_(std::move(cells)) {
    for (std::size_t i = 0; i < cells_.size(); ++i) {
        if (cells_[i].region) active_.push_back(i);
    }
}

IntensityGrid build_grid(const RegionSet& regions, double spacing) {
    if (!(spacing > 0.0) || !std::isfinite(spacing)) {
        throw ConfigError("grid spacing must be positive");
    }
    if (regions.empty()) throw ConfigError("cannot build a grid over an empty region set");
    const Box& b = regions.bounds();
    if (spacing > b.width() || spacing > b.height()) {
        throw ConfigError("grid spacing " + std::to_string(spacing) +
                          " exceeds the domain extent");
    }
    const auto nx = static_cast<std::size_t>(std::ceil(b.width() / spacing - 1e-9));
    const auto ny = static_cast<std::size_t>(std::ceil(b.height() / spacing - 1e-9));
    std::vector<GridCell> cells(nx * ny);
    for (std::size_t j = 0; j < ny; ++j) {
        for (std::size_t i = 0; i < nx; ++i) {
            GridCell& cell = cells[j * nx + i];
            cell.center = {b.min_x + (static_cast<double>(i) + 0.5) * spacing,
                           b.min_y + (static_cast<double>(j) + 0.5) * spacing};
            cell.region = region_of(cell.center, regions);
            if (!cell.region) continue;
            cell.neighbors.push_back(*cell.region);
            for (std::size_t n : regions.neighbors(*cell.region)) cell.neighbors.push_back(n);
            for (std::size_t n : cell.neighbors) {
                cell.distances.push_back(distance(cell.center, regions[n].centroid));
            }
        }
    }
    return IntensityGrid(spacing, nx, ny, Point{b.min_x, b.min_y}, std::move(cells));
}

} // namespace nshawkes::geo
