#pragma once

#include "nshawkes/geo.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace nshawkes::background {

/// mu(s) = mu0 + exp{ sum_l gamma_l sum_{j in N(s)} x_jl w_j(s) }.
struct BackgroundParams {
    double log_base_rate = 0.0;  // log mu0
    std::vector<double> gamma;   // one coefficient per covariate
    double bandwidth = 1.0;      // alpha, fixed hyperparameter (1 / degrees)

    double base_rate() const { return std::exp(log_base_rate); }
    void set_base_rate(double v) { log_base_rate = std::log(v); }
};

/// Normalized exp(-alpha d(s, c_j)) weights over the neighbourhood N(s).
struct NeighborWeights {
    std::vector<std::size_t> regions;
    std::vector<double> weights;
};

NeighborWeights region_weights(std::span<const std::size_t> neighbors,
                               std::span<const double> distances, double bandwidth);
NeighborWeights region_weights(const geo::GridCell& cell, double bandwidth);
/// N(s) is the containing region plus its adjacency; points outside every
/// polygon borrow the neighbourhood of the nearest region.
NeighborWeights region_weights(geo::Point s, const geo::RegionSet& regions, double bandwidth);

/// z_l(s) = sum_j x_jl w_j(s); the exponent of mu(s) is gamma . z(s).
std::vector<double> covariate_design(const NeighborWeights& w, const geo::RegionSet& regions);

inline constexpr double kExponentClamp = 700.0;

/// Clamps to [-700, 700], bumping *clamped (if given) when it had to.
double clamp_exponent(double exponent, std::size_t* clamped = nullptr);

double background_intensity(geo::Point s, const geo::RegionSet& regions,
                            const BackgroundParams& params, std::size_t* clamped = nullptr);

/// Background intensity with precomputed design vectors for every active grid
/// cell, so that each parameter update only re-plugs gamma.
class BackgroundField {
public:
    BackgroundField() = default;
    BackgroundField(const geo::IntensityGrid& grid, const geo::RegionSet& regions,
                    double bandwidth);

    double bandwidth() const { return bandwidth_; }
    std::size_t covariate_count() const { return covariate_count_; }
    /// Design vector z(u) of the k-th active cell.
    std::span<const double> design(std::size_t active_index) const;

    /// mu0 |S| T + T |S| / |U| sum_u exp(gamma . z(u)). When gradients are
    /// requested they are accumulated (added) into the given outputs.
    double integral(const BackgroundParams& params, double horizon,
                    std::span<double> d_gamma = {}, double* d_log_base_rate = nullptr,
                    std::size_t* clamped = nullptr) const;

    /// mu(u) for the k-th active cell.
    double intensity(const BackgroundParams& params, std::size_t active_index) const;

private:
    double bandwidth_ = 1.0;
    std::size_t covariate_count_ = 0;
    double cell_area_ = 0.0;
    std::size_t active_count_ = 0;
    std::vector<double> design_;  // active_count x L
};

double background_integral(const geo::IntensityGrid& grid, const geo::RegionSet& regions,
                           const BackgroundParams& params, double horizon);

} // namespace nshawkes::background
