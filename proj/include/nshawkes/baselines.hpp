#pragma once

#include "nshawkes/data.hpp"
#include "nshawkes/geo.hpp"
#include "nshawkes/model.hpp"
#include "nshawkes/surface.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace nshawkes::baselines {

/// counts[j][k]: events in region j during week k.
struct WeeklySeries {
    std::vector<std::vector<double>> counts;

    std::size_t regions() const { return counts.size(); }
    std::size_t weeks() const { return counts.empty() ? 0 : counts.front().size(); }
};

/// Nonnegative integer counts of equal length in every region.
void validate(const WeeklySeries& series);

/// Next-week prediction = last observed count.
std::vector<double> persistent_predict(const WeeklySeries& series);

/// ARIMA(p, d, 0) fitted by conditional least squares with an intercept.
struct ArModel {
    int p = 2;
    int d = 1;
    std::vector<double> coefficients;   // intercept, phi_1..phi_p
    std::vector<double> series;         // fitted series, kept for integration
    bool rank_deficient = false;        // the minimum-norm solution was used
};

ArModel ar_fit(const std::vector<double>& series, int p = 2, int d = 1);
/// Forecasts for the next `horizon` steps, clamped at 0. Falls back to the
/// last observed value if the forecast is not finite.
std::vector<double> ar_predict(const ArModel& model, std::size_t horizon);
/// One-step AR forecast for every region, fitted independently.
std::vector<double> ar_predict_next(const WeeklySeries& series, int p = 2, int d = 1);

/// Stationary ETAS: mu0 + sum C exp(-beta (t - t')) N(s - s'; 0, sigma^2 I).
struct EtasParams {
    double log_base_rate = 0.0;
    double log_magnitude = std::log(0.1);
    double log_decay = 0.0;
    double log_spatial_scale = std::log(0.1);

    double base_rate() const { return std::exp(log_base_rate); }
    double magnitude() const { return std::exp(log_magnitude); }
    double decay() const { return std::exp(log_decay); }
    double spatial_scale() const { return std::exp(log_spatial_scale); }

    std::vector<double> to_free() const;
    static EtasParams from_free(std::span<const double> theta);
};

/// Lags beyond this many decay times are ignored (exp(-12.5)).
inline constexpr double kEtasWindow = 12.5;

/// Log-likelihood and its gradient with respect to the free vector
/// [log mu0, log C, log beta, log sigma].
double etas_log_likelihood(const EtasParams& params, const data::EventSequence& events,
                           double domain_area, std::vector<double>* gradient = nullptr);

EtasParams etas_initial(const data::EventSequence& events, const geo::RegionSet& regions,
                        double domain_area);

struct EtasFit {
    EtasParams params;
    std::vector<double> trace;
    std::size_t iterations = 0;
    bool converged = false;
};

EtasFit etas_fit(const data::EventSequence& events, const geo::RegionSet& regions,
                 const model::FitConfig& config);

class EtasSurface final : public IntensitySurface {
public:
    explicit EtasSurface(EtasParams params) : params_(params) {}

    const EtasParams& params() const { return params_; }

    double background(geo::Point) const override { return params_.base_rate(); }
    double temporal(double lag) const override;
    double temporal_integral(double lo, double hi) const override;
    double window() const override { return kEtasWindow / params_.decay(); }
    kernel::SiteFeatures prepare(geo::Point s) const override;
    double spatial(const kernel::SiteFeatures& s, const kernel::SiteFeatures& src) const override;
    double spatial_cutoff() const override;
    double background_bound(const geo::RegionSet&) const override { return params_.base_rate(); }
    double temporal_bound() const override { return params_.magnitude(); }
    double spatial_bound() const override;

private:
    EtasParams params_;
};

} // namespace nshawkes::baselines
