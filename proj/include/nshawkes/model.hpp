#pragma once

#include "nshawkes/background.hpp"
#include "nshawkes/data.hpp"
#include "nshawkes/geo.hpp"
#include "nshawkes/kernel.hpp"
#include "nshawkes/surface.hpp"

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace nshawkes::model {

/// Architecture and fixed hyperparameters.
struct ModelConfig {
    int components = 3;        // R
    int hidden = 32;           // H
    double ellipse_area = 0.35;  // A
    double focus_bound = 0.1;    // c
    double bandwidth = 1.0;      // alpha of the background weights
};

/// Full parameter set theta.
///
/// Free-vector layout: [log C, log sigma0, log tau_z, log mu0, gamma_1..gamma_L,
/// network parameters]. Converting to and from the free vector is exact.
struct ModelParams {
    kernel::KernelParams kernel;
    background::BackgroundParams background;

    static constexpr std::size_t kLogMagnitude = 0;
    static constexpr std::size_t kLogTimeScale = 1;
    static constexpr std::size_t kLogCovScale = 2;
    static constexpr std::size_t kLogBaseRate = 3;
    static constexpr std::size_t kGamma = 4;

    std::size_t free_size() const;
    std::size_t nets_offset() const { return kGamma + background.gamma.size(); }
    std::vector<double> to_free() const;
    void assign_free(std::span<const double> theta);
};

/// Starting point: C = 0.1, sigma0 = 1 day, tau_z = 1, mu0 = n / (|S| T) / 2,
/// gamma = 0, Glorot-initialized networks seeded from `seed`.
ModelParams initial_params(const data::EventSequence& events, const geo::RegionSet& regions,
                           double domain_area, const ModelConfig& config, std::uint64_t seed);

/// Triggering sums only look back this many temporal scales.
inline constexpr double kWindowScales = 5.0;

/// lambda(t, s) with the full history (no truncation). Every history event
/// must precede t.
double conditional_intensity(double t, geo::Point s, const data::EventSequence& history,
                             const ModelParams& params, const geo::RegionSet& regions);

/// Log-likelihood of one event sequence with everything that does not depend
/// on the parameters precomputed (background designs, grid).
class Likelihood {
public:
    Likelihood(data::EventSequence events, const geo::RegionSet& regions,
               const geo::IntensityGrid& grid, double bandwidth);

    struct Result {
        double value = 0.0;
        double event_term = 0.0;           // sum_i log lambda(t_i, s_i)
        double triggering_integral = 0.0;
        double background_integral = 0.0;  // includes mu0 |S| T
        std::size_t clamped = 0;           // background exponents hit the clamp
        std::vector<double> gradient;      // d value / d theta, when requested
    };

    Result evaluate(const ModelParams& params, bool with_gradient) const;

    const data::EventSequence& events() const { return events_; }
    double domain_area() const { return domain_area_; }
    std::size_t covariate_count() const { return field_.covariate_count(); }

private:
    data::EventSequence events_;
    background::BackgroundField field_;
    std::vector<double> event_design_;  // n x L
    double domain_area_ = 0.0;
};

double log_likelihood(const ModelParams& params, const data::EventSequence& events,
                      const geo::RegionSet& regions, const geo::IntensityGrid& grid);
std::vector<double> gradient(const ModelParams& params, const data::EventSequence& events,
                             const geo::RegionSet& regions, const geo::IntensityGrid& grid);

struct FitConfig {
    double learning_rate = 0.1;
    std::size_t max_iterations = 2000;
    double tolerance = 1e-6;          // relative log-likelihood change ...
    std::size_t patience = 10;        // ... measured over this many iterations
    std::uint64_t seed = 0;
    double grid_spacing = 0.01;       // degrees
    bool step_halving = false;        // retry non-finite steps with half the rate
    /// Called after every iteration with (iteration, log-likelihood).
    std::function<void(std::size_t, double)> on_iteration;
};

/// Generic full-batch gradient ascent on a free parameter vector. The step is
/// learning_rate * scale * gradient; scale lets callers ascend a normalized
/// objective while tracing the raw one.
struct AscentResult {
    std::vector<double> theta;
    std::vector<double> trace;  // objective at iterations 0..iterations
    std::size_t iterations = 0;
    bool converged = false;
};
using Objective = std::function<double(std::span<const double> theta, std::span<double> grad)>;
AscentResult gradient_ascent(const Objective& objective, std::vector<double> theta, double scale,
                             const FitConfig& config);

struct FitResult {
    ModelParams params;
    std::vector<double> trace;
    std::size_t iterations = 0;
    bool converged = false;
};

/// Maximizes the log-likelihood by gradient ascent on log-likelihood / n.
FitResult fit(const data::EventSequence& events, const geo::RegionSet& regions,
              const ModelConfig& model_config, const FitConfig& fit_config);
FitResult fit(const ModelParams& initial, const Likelihood& likelihood, const FitConfig& config);

/// The fitted model as an IntensitySurface over a region set and grid.
class NeuralSurface final : public IntensitySurface {
public:
    NeuralSurface(ModelParams params, const geo::RegionSet& regions);

    const ModelParams& params() const { return params_; }

    double background(geo::Point s) const override;
    double background(const geo::GridCell& cell) const override;
    double temporal(double lag) const override;
    double temporal_integral(double lo, double hi) const override;
    double window() const override;
    kernel::SiteFeatures prepare(geo::Point s) const override;
    double spatial(const kernel::SiteFeatures& s, const kernel::SiteFeatures& src) const override;
    double spatial_cutoff() const override;
    double background_bound(const geo::RegionSet& regions) const override;
    double temporal_bound() const override;
    double spatial_bound() const override;

private:
    ModelParams params_;
    const geo::RegionSet* regions_;
};

} // namespace nshawkes::model
