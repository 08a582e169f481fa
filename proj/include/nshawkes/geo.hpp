#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace nshawkes::geo {

/// A location in raw longitude/latitude degrees. All distances in the
/// library are plain Euclidean distances in this coordinate system.
struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double k, Point a) { return {k * a.x, k * a.y}; }
inline bool operator==(Point a, Point b) { return a.x == b.x && a.y == b.y; }

double distance(Point a, Point b);

struct Box {
    double min_x = 0.0;
    double min_y = 0.0;
    double max_x = 0.0;
    double max_y = 0.0;

    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
    bool contains(Point p) const {
        return p.x >= min_x && p.x <= max_x && p.y >= min_y && p.y <= max_y;
    }
};

/// Simple polygon ring. Stored open: the closing vertex is not repeated.
using Ring = std::vector<Point>;

double signed_area(const Ring& ring);
/// Area-weighted (shoelace) centroid of a simple ring.
Point ring_centroid(const Ring& ring);
/// Even-odd containment test; boundary points may go either way.
bool ring_contains(const Ring& ring, Point p);
double distance_to_ring(const Ring& ring, Point p);

struct Region {
    std::string id;
    std::vector<Ring> rings;  // outer rings; several for multi-part regions
    std::vector<double> covariates;

    // Filled in by RegionSet.
    Point centroid;
    Box bounds;
};

/// Polygonal subregions of the observation domain with centroids, symmetric
/// adjacency, and one covariate row per region. Immutable after construction.
class RegionSet {
public:
    RegionSet() = default;

    /// Regions are reordered by id (numeric ids compare numerically); the
    /// resulting index order is what "lowest id" refers to everywhere.
    RegionSet(std::vector<Region> regions, std::vector<std::string> covariate_names);

    std::size_t size() const { return regions_.size(); }
    bool empty() const { return regions_.empty(); }
    const Region& operator[](std::size_t i) const { return regions_[i]; }
    const std::vector<Region>& regions() const { return regions_; }
    const std::vector<std::string>& covariate_names() const { return covariate_names_; }
    std::size_t covariate_count() const { return covariate_names_.size(); }
    const std::vector<std::size_t>& neighbors(std::size_t i) const { return adjacency_[i]; }
    const Box& bounds() const { return bounds_; }
    std::optional<std::size_t> index_of(const std::string& id) const;

    /// Copy with every covariate row replaced; rows[i] belongs to region i.
    RegionSet with_covariates(const std::vector<std::vector<double>>& rows) const;

    /// Sum of polygon areas.
    double area() const;

private:
    std::vector<Region> regions_;
    std::vector<std::string> covariate_names_;
    std::vector<std::vector<std::size_t>> adjacency_;
    Box bounds_;
};

/// Tolerance (degrees) within which two boundaries count as touching.
inline constexpr double kAdjacencyTolerance = 1e-9;

/// Index of the first region (in id order) containing p, boundary included.
std::optional<std::size_t> region_of(Point p, const RegionSet& regions);

/// Region whose boundary is closest to p; the containing region when p is inside.
std::size_t nearest_region(Point p, const RegionSet& regions);

/// Reads a GeoJSON FeatureCollection. Each feature needs Polygon or
/// MultiPolygon geometry, an `id` (property or feature member), and one numeric
/// property per covariate name. An empty name list selects every numeric
/// property other than `id`, in lexicographic order.
RegionSet load_regions(const std::filesystem::path& path,
                       const std::vector<std::string>& covariate_names = {});

void save_regions(const std::filesystem::path& path, const RegionSet& regions);

/// Axis-aligned nx-by-ny partition of a box into square-ish regions with ids
/// "r0000", "r0001", ... in row-major order starting at the lower-left corner.
/// The covariate callback receives the cell centre.
RegionSet rectangular_partition(
    const Box& box, int nx, int ny, std::vector<std::string> covariate_names,
    const std::function<std::vector<double>(Point)>& covariates);

struct GridCell {
    Point center;
    std::optional<std::size_t> region;  // none outside every polygon
    std::vector<std::size_t> neighbors; // N(u): containing region then its adjacency
    std::vector<double> distances;      // d(u, c_j) aligned with neighbors
};

/// Regular lattice over the domain bounding box used for spatial quadrature.
class IntensityGrid {
public:
    IntensityGrid() = default;
    IntensityGrid(double spacing, std::size_t nx, std::size_t ny, Point origin,
                  std::vector<GridCell> cells);

    double spacing() const { return spacing_; }
    /// Lower-left corner; cell (i, j) is centred at origin + ((i + 0.5), (j + 0.5)) * spacing.
    Point origin() const { return origin_; }
    std::size_t nx() const { return nx_; }
    std::size_t ny() const { return ny_; }
    double cell_area() const { return spacing_ * spacing_; }
    /// |S| = in-domain cell count times cell area.
    double domain_area() const { return cell_area() * static_cast<double>(active_.size()); }

    const std::vector<GridCell>& cells() const { return cells_; }
    const GridCell& cell(std::size_t i) const { return cells_[i]; }
    /// Indices of cells whose centre lies inside some region.
    const std::vector<std::size_t>& active_cells() const { return active_; }

private:
    double spacing_ = 0.0;
    std::size_t nx_ = 0;
    std::size_t ny_ = 0;
    Point origin_;
    std::vector<GridCell> cells_;
    std::vector<std::size_t> active_;
};

IntensityGrid build_grid(const RegionSet& regions, double spacing);

} // namespace nshawkes::geo
