#pragma once

#include "nshawkes/geo.hpp"
#include "nshawkes/kernel.hpp"

namespace nshawkes {

/// A fitted Hawkes intensity lambda(t, s) = mu(s) + sum nu(t - t') upsilon(s, s')
/// seen through the operations the simulator and the evaluators need. Both the
/// neural model and the stationary baseline implement it.
class IntensitySurface {
public:
    virtual ~IntensitySurface() = default;

    virtual double background(geo::Point s) const = 0;
    /// Background at a grid cell; implementations may use the cell's cached
    /// neighbourhood instead of a point lookup.
    virtual double background(const geo::GridCell& cell) const { return background(cell.center); }

    /// nu(lag), zero for lag <= 0.
    virtual double temporal(double lag) const = 0;
    /// Integral of nu over lags [lo, hi] (negative lags contribute nothing).
    virtual double temporal_integral(double lo, double hi) const = 0;
    /// Lags beyond this are ignored when summing over history.
    virtual double window() const = 0;

    /// Per-location data the spatial kernel needs (network outputs, covariances).
    virtual kernel::SiteFeatures prepare(geo::Point s) const = 0;
    virtual double spatial(const kernel::SiteFeatures& s, const kernel::SiteFeatures& src) const = 0;
    /// Distance beyond which the spatial kernel is below exp(-40) of its peak.
    virtual double spatial_cutoff() const = 0;

    /// Upper bounds used by thinning.
    virtual double background_bound(const geo::RegionSet& regions) const = 0;
    virtual double temporal_bound() const = 0;
    virtual double spatial_bound() const = 0;
};

} // namespace nshawkes
