#include "nshawkes/background.hpp"

#include "nshawkes/errors.hpp"
#include "nshawkes/parallel.hpp"

#include <algorithm>

namespace nshawkes::background {

NeighborWeights region_weights(std::span<const std::size_t> neighbors,
                               std::span<const double> distances, double bandwidth) {
    if (neighbors.empty() || neighbors.size() != distances.size()) {
        throw ContractError("empty or inconsistent neighbourhood");
    }
    NeighborWeights out;
    out.regions.assign(neighbors.begin(), neighbors.end());
    out.weights.resize(neighbors.size());
    const double d_min = *std::min_element(distances.begin(), distances.end());
    double z = 0.0;
    for (std::size_t k = 0; k < distances.size(); ++k) {
        out.weights[k] = std::exp(-bandwidth * (distances[k] - d_min));
        z += out.weights[k];
    }
    for (double& w : out.weights) w /= z;
    return out;
}

NeighborWeights region_weights(const geo::GridCell& cell, double bandwidth) {
    return region_weights(cell.neighbors, cell.distances, bandwidth);
}

NeighborWeights region_weights(geo::Point s, const geo::RegionSet& regions, double bandwidth) {
    const std::size_t home = geo::nearest_region(s, regions);
    std::vector<std::size_t> hood{home};
    for (std::size_t n : regions.neighbors(home)) hood.push_back(n);
    std::vector<double> dist;
    dist.reserve(hood.size());
    for (std::size_t j : hood) dist.push_back(geo::distance(s, regions[j].centroid));
    return region_weights(hood, dist, bandwidth);
}

std::vector<double> covariate_design(const NeighborWeights& w, const geo::RegionSet& regions) {
    std::vector<double> z(regions.covariate_count(), 0.0);
    for (std::size_t k = 0; k < w.regions.size(); ++k) {
        const auto& x = regions[w.regions[k]].covariates;
        for (std::size_t l = 0; l < z.size(); ++l) z[l] += x[l] * w.weights[k];
    }
    return z;
}

double clamp_exponent(double exponent, std::size_t* clamped) {
    if (exponent > kExponentClamp || exponent < -kExponentClamp) {
        if (clamped) ++*clamped;
        return std::clamp(exponent, -kExponentClamp, kExponentClamp);
    }
    return exponent;
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

double background_intensity(geo::Point s, const geo::RegionSet& regions,
                            const BackgroundParams& params, std::size_t* clamped) {
    if (params.gamma.size() != regions.covariate_count()) {
        throw ContractError("gamma length does not match covariate count");
    }
    const auto z = covariate_design(region_weights(s, regions, params.bandwidth), regions);
    return params.base_rate() + std::exp(clamp_exponent(dot(params.gamma, z), clamped));
}

BackgroundField::BackgroundField(const geo::IntensityGrid& grid, const geo::RegionSet& regions,
                                 double bandwidth)
    : bandwidth_(bandwidth),
      covariate_count_(regions.covariate_count()),
      cell_area_(grid.cell_area()),
      active_count_(grid.active_cells().size()) {
    design_.resize(active_count_ * covariate_count_);
    const auto& active = grid.active_cells();
    parallel_for(active_count_, [&](std::size_t k) {
        const auto z = covariate_design(region_weights(grid.cell(active[k]), bandwidth), regions);
        std::copy(z.begin(), z.end(), design_.begin() + static_cast<std::ptrdiff_t>(k * covariate_count_));
    });
}

std::span<const double> BackgroundField::design(std::size_t active_index) const {
    return std::span<const double>(design_).subspan(active_index * covariate_count_,
                                                    covariate_count_);
}

double BackgroundField::intensity(const BackgroundParams& params, std::size_t k) const {
    return params.base_rate() + std::exp(clamp_exponent(dot(params.gamma, design(k))));
}

double BackgroundField::integral(const BackgroundParams& params, double horizon,
                                 std::span<double> d_gamma, double* d_log_base_rate,
                                 std::size_t* clamped) const {
    if (params.gamma.size() != covariate_count_) {
        throw ContractError("gamma length does not match covariate count");
    }
    const std::size_t L = covariate_count_;
    std::vector<double> g(active_count_);
    std::vector<char> hit(active_count_, 0);
    parallel_for(active_count_, [&](std::size_t k) {
        std::size_t c = 0;
        g[k] = std::exp(clamp_exponent(dot(params.gamma, design(k)), &c));
        hit[k] = c > 0;
    });
    if (clamped) *clamped += static_cast<std::size_t>(std::count(hit.begin(), hit.end(), 1));

    const double area = cell_area_ * static_cast<double>(active_count_);
    const double mu0 = params.base_rate();
    const double value = mu0 * area * horizon + horizon * cell_area_ * pairwise_sum(g);

    if (d_log_base_rate) *d_log_base_rate += mu0 * area * horizon;
    if (!d_gamma.empty()) {
        if (d_gamma.size() != L) throw ContractError("gamma gradient has the wrong length");
        std::vector<double> column(active_count_);
        for (std::size_t l = 0; l < L; ++l) {
            for (std::size_t k = 0; k < active_count_; ++k) {
                column[k] = hit[k] ? 0.0 : g[k] * design_[k * L + l];
            }
            d_gamma[l] += horizon * cell_area_ * pairwise_sum(column);
        }
    }
    return value;
}

double background_integral(const geo::IntensityGrid& grid, const geo::RegionSet& regions,
                           const BackgroundParams& params, double horizon) {
    return BackgroundField(grid, regions, params.bandwidth).integral(params, horizon);
}

} // namespace nshawkes::background
