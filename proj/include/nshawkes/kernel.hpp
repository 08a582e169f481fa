#pragma once

#include "nshawkes/data.hpp"
#include "nshawkes/geo.hpp"
#include "nshawkes/neural.hpp"

#include <cmath>
#include <span>
#include <vector>

namespace nshawkes::kernel {

/// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Cov2 {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;

    double det() const { return xx * yy - xy * xy; }
};

inline Cov2 operator+(const Cov2& a, const Cov2& b) {
    return {a.xx + b.xx, a.xy + b.xy, a.yy + b.yy};
}

/// Gradient of a scalar with respect to (xx, xy, yy), the off-diagonal entry
/// being a single variable.
struct CovGrad {
    double xx = 0.0;
    double xy = 0.0;
    double yy = 0.0;
};

/// Q = sqrt(4 A^2 + |psi|^4 pi^2) / (2 pi).
double ellipse_q(double focus_norm_sq, double area);

/// Covariance of the Gaussian whose one-standard-deviation ellipse has foci
/// +-focus and area `area`, scaled by scale^2. Eigenvalues are
/// scale^2 (Q +- |focus|^2 / 2), so the determinant is (scale^2 A / pi)^2.
Cov2 covariance_from_focus(geo::Point focus, double area, double scale);

/// d(loss)/d(focus) from d(loss)/d(Sigma), at fixed area and scale.
geo::Point focus_gradient(geo::Point focus, double area, double scale, const CovGrad& g);

/// Bivariate normal density N(delta; 0, cov).
double gaussian_density(geo::Point delta, const Cov2& cov);

/// Gaussian density together with its gradient with respect to cov and the
/// Mahalanobis term q = delta' cov^-1 delta.
struct GaussianTerm {
    double value;
    double mahalanobis;
    CovGrad d_cov;
};
GaussianTerm gaussian_term(geo::Point delta, const Cov2& cov);

/// C exp(-lag^2 / (2 sigma0^2)) for lag > 0, else 0.
double temporal_kernel(double lag, double magnitude, double time_scale);

/// Kernel parameters. Positive quantities are stored as logarithms, which is
/// also the free-parameter encoding used by the optimizer.
struct KernelParams {
    double log_magnitude = std::log(0.1);  // C
    double log_time_scale = 0.0;           // sigma0, days
    double log_cov_scale = 0.0;            // tau_z
    double ellipse_area = 0.35;            // A, fixed
    neural::FeatureNet nets;               // carries c and R

    double magnitude() const { return std::exp(log_magnitude); }
    double time_scale() const { return std::exp(log_time_scale); }
    double cov_scale() const { return std::exp(log_cov_scale); }
    double focus_bound() const { return nets.focus_bound(); }
    void set_magnitude(double v) { log_magnitude = std::log(v); }
    void set_time_scale(double v) { log_time_scale = std::log(v); }
    void set_cov_scale(double v) { log_cov_scale = std::log(v); }
};

/// Feature-network output at a location together with its covariances.
struct SiteFeatures {
    geo::Point location;
    neural::FeatureOutput features;
    std::vector<Cov2> cov;
};

SiteFeatures prepare_site(geo::Point s, const KernelParams& params);
SiteFeatures prepare_site(geo::Point s, const KernelParams& params, neural::ForwardCache& cache);

/// Non-stationary spatial kernel: the double sum over component pairs of
/// w_s w_s' N(s - s'; Sigma_s + Sigma_s').
double spatial_kernel(const SiteFeatures& s, const SiteFeatures& src);
double spatial_kernel(geo::Point s, geo::Point src, const KernelParams& params);

/// nu(t, t') * upsilon(s, s'); zero unless t > t'.
double influence_kernel(double t, double t_src, geo::Point s, geo::Point src,
                        const KernelParams& params);

/// Upper bound of the spatial kernel over all locations given |focus| <= c.
double spatial_kernel_bound(const KernelParams& params);

/// Largest eigenvalue any Sigma_s + Sigma_s' can have.
double max_pair_variance(const KernelParams& params);

/// Standard normal CDF.
double normal_cdf(double x);

/// O(n) approximation of the integral of all triggering terms over
/// [0, T] x plane: sqrt(2 pi) C sigma0 sum_i [Phi((T - t_i) / sigma0) - 1/2].
/// The spatial integral of each kernel is taken to be one.
double triggering_integral(std::span<const double> times, double horizon, double magnitude,
                           double time_scale);
double triggering_integral(const data::EventSequence& events, const KernelParams& params);

/// Relative error bound of triggering_integral: max{U - 1, 1 - 1/U} with
/// U = (sqrt(4 A^2 + c^4 pi^2) + c^2 pi) / (2 A).
double triggering_error_bound(double area, double focus_bound);

} // namespace nshawkes::kernel
