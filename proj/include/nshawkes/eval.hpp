#pragma once

#include "nshawkes/baselines.hpp"
#include "nshawkes/data.hpp"
#include "nshawkes/geo.hpp"
#include "nshawkes/surface.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace nshawkes::eval {

enum class HistoryMode {
    InSample,  // events inside the interval keep exciting it
    Frozen,    // only events before the interval start count
};

inline constexpr double kDefaultTimeStep = 0.25;  // days
inline constexpr double kMonthDays = 30.0;
inline constexpr double kWeekDays = 7.0;

/// Integrates lambda over (interval x region) on the cells of an intensity
/// grid. Background masses are cached per region; each history event's
/// spatial mass is summed over the cells within the kernel cutoff.
class CountIntegrator {
public:
    /// time_step > 0 integrates each event's temporal kernel with the
    /// midpoint rule on sub-steps no longer than time_step; 0 uses the
    /// closed form.
    CountIntegrator(const IntensitySurface& surface, const geo::RegionSet& regions,
                    const geo::IntensityGrid& grid, double time_step = kDefaultTimeStep);

    /// Expected counts per region (region index order) over [t1, t2].
    std::vector<double> expected_counts(double t1, double t2, const data::EventSequence& events,
                                        HistoryMode mode) const;
    double expected_count(double t1, double t2, const std::string& region_id,
                          const data::EventSequence& events, HistoryMode mode) const;

    /// Background mass per region (integral of mu over the region).
    const std::vector<double>& background_mass() const { return background_mass_; }
    /// Spatial kernel mass of a source at s falling in each region.
    std::vector<double> spatial_mass(geo::Point s) const;
    /// Integral of the temporal kernel for a source at t_src over [t1, t2],
    /// truncated at the surface window.
    double temporal_mass(double t_src, double t1, double t2) const;

private:
    const IntensitySurface* surface_;
    const geo::RegionSet* regions_;
    const geo::IntensityGrid* grid_;
    double time_step_;
    std::vector<double> background_mass_;
    std::vector<kernel::SiteFeatures> cell_sites_;  // per grid cell, active only
};

/// Event counts per (interval, region) for intervals [edges[k], edges[k+1]).
/// The last interval is closed on the right. Events outside every region are
/// skipped.
std::vector<std::vector<double>> observed_counts(const data::EventSequence& events,
                                                 const geo::RegionSet& regions,
                                                 const std::vector<double>& edges);

/// Indices of the top ceil(fraction * J) regions by count, ties to the lower
/// region index.
std::vector<std::size_t> frequent_regions(const std::vector<double>& counts,
                                          double fraction = 0.2);

struct PredictionReport {
    std::vector<std::string> region_ids;
    std::vector<double> edges;                         // interval boundaries, days
    std::vector<std::vector<double>> predicted;        // [interval][region]
    std::vector<std::vector<double>> observed;         // [interval][region]
    std::vector<std::size_t> frequent;                 // region indices

    double mae_rare = 0.0;      // mean |pred - obs| over region-intervals
    double mae_frequent = 0.0;
    double mae_total = 0.0;
    double city_mae = 0.0;      // mean |sum pred - sum obs| over intervals
    double mre = 0.0;           // mean relative error of the city totals (obs > 0)
};

/// Fills in the aggregate metrics from predicted/observed/frequent.
void score(PredictionReport& report);

/// Monthly (30-day) in-sample estimates over [0, T] with history unfolding
/// through each month.
PredictionReport insample_series(const CountIntegrator& integrator,
                                 const data::EventSequence& events,
                                 const geo::RegionSet& regions, double bin_days = kMonthDays);

/// Week boundaries of the test period: t_split, t_split + 7, ... while a full
/// week fits before the test horizon.
std::vector<double> test_weeks(double t_split, double horizon, double week_days = kWeekDays);

/// Weekly counts of the training period in full weeks ending at t_split.
baselines::WeeklySeries training_series(const data::EventSequence& train,
                                        const geo::RegionSet& regions,
                                        double week_days = kWeekDays);

/// Out-of-sample weekly predictions with history frozen at each week start.
/// `train` has horizon t_split; `test` holds the events after it.
PredictionReport oos_predict(const CountIntegrator& integrator, const data::EventSequence& train,
                             const data::EventSequence& test, const geo::RegionSet& regions,
                             double week_days = kWeekDays);

/// Same protocol for a count-series predictor that sees the weekly counts of
/// every earlier week (training weeks, then observed test weeks).
using SeriesPredictor = std::function<std::vector<double>(const baselines::WeeklySeries&)>;
PredictionReport oos_predict_series(const SeriesPredictor& predictor,
                                    const data::EventSequence& train,
                                    const data::EventSequence& test,
                                    const geo::RegionSet& regions, double week_days = kWeekDays);

void write_report_csv(const std::filesystem::path& path, const PredictionReport& report);
std::string report_summary_json(const PredictionReport& report);

/// lambda(t, u) at every active cell given the events before t.
struct RasterCell {
    geo::Point center;
    double intensity;
};
std::vector<RasterCell> render_intensity(const IntensitySurface& surface,
                                         const geo::IntensityGrid& grid, double t,
                                         const data::EventSequence& history);
void write_raster_csv(const std::filesystem::path& path, const std::vector<RasterCell>& raster);

struct KernelSample {
    geo::Point location;
    geo::Point focus;
    double weight;
    int component;
};
/// Feature-network outputs at `count` locations drawn uniformly on the domain.
std::vector<KernelSample> kernel_samples(const kernel::KernelParams& params,
                                         const geo::RegionSet& regions, std::size_t count,
                                         std::uint64_t seed);
void write_kernel_csv(const std::filesystem::path& path, const std::vector<KernelSample>& samples);

} // namespace nshawkes::eval
