#include "nshawkes/kernel.hpp"

#include "nshawkes/errors.hpp"
#include "nshawkes/parallel.hpp"

#include <numbers>

namespace nshawkes::kernel {

using std::numbers::pi;

double ellipse_q(double focus_norm_sq, double area) {
    return std::sqrt(4.0 * area * area + focus_norm_sq * focus_norm_sq * pi * pi) / (2.0 * pi);
}

// Expanding |psi|^2 cos 2a = x^2 - y^2 and |psi|^2 sin 2a = 2xy gives a form
// that is smooth at psi = 0 and needs no angle.
Cov2 covariance_from_focus(geo::Point focus, double area, double scale) {
    const double x = focus.x;
    const double y = focus.y;
    const double q = ellipse_q(x * x + y * y, area);
    const double s2 = scale * scale;
    const double half_diff = 0.5 * (x * x - y * y);
    return {s2 * (q + half_diff), s2 * x * y, s2 * (q - half_diff)};
}

geo::Point focus_gradient(geo::Point focus, double area, double scale, const CovGrad& g) {
    const double x = focus.x;
    const double y = focus.y;
    const double p2 = x * x + y * y;
    const double dq = pi * p2 / (2.0 * std::sqrt(4.0 * area * area + pi * pi * p2 * p2));
    const double s2 = scale * scale;
    return {s2 * (g.xx * (2.0 * x * dq + x) + g.xy * y + g.yy * (2.0 * x * dq - x)),
            s2 * (g.xx * (2.0 * y * dq - y) + g.xy * x + g.yy * (2.0 * y * dq + y))};
}

double gaussian_density(geo::Point delta, const Cov2& cov) {
    const double det = cov.det();
    const double q = (cov.yy * delta.x * delta.x - 2.0 * cov.xy * delta.x * delta.y +
                      cov.xx * delta.y * delta.y) / det;
    return std::exp(-0.5 * q) / (2.0 * pi * std::sqrt(det));
}

GaussianTerm gaussian_term(geo::Point delta, const Cov2& cov) {
    const double det = cov.det();
    const double dx = delta.x;
    const double dy = delta.y;
    const double q = (cov.yy * dx * dx - 2.0 * cov.xy * dx * dy + cov.xx * dy * dy) / det;
    const double g = std::exp(-0.5 * q) / (2.0 * pi * std::sqrt(det));
    const double k = g / det;
    return {g, q,
            CovGrad{0.5 * k * (q * cov.yy - dy * dy - cov.yy), k * (dx * dy - cov.xy * q + cov.xy),
                    0.5 * k * (q * cov.xx - dx * dx - cov.xx)}};
}

double temporal_kernel(double lag, double magnitude, double time_scale) {
    if (!(lag > 0.0)) return 0.0;
    const double z = lag / time_scale;
    return magnitude * std::exp(-0.5 * z * z);
}

SiteFeatures prepare_site(geo::Point s, const KernelParams& params) {
    neural::ForwardCache cache;
    return prepare_site(s, params, cache);
}

SiteFeatures prepare_site(geo::Point s, const KernelParams& params, neural::ForwardCache& cache) {
    SiteFeatures site;
    site.location = s;
    site.features = params.nets.forward(s, cache);
    const double scale = params.cov_scale();
    site.cov.reserve(site.features.focus.size());
    for (const geo::Point& f : site.features.focus) {
        site.cov.push_back(covariance_from_focus(f, params.ellipse_area, scale));
    }
    return site;
}

double spatial_kernel(const SiteFeatures& s, const SiteFeatures& src) {
    const geo::Point delta = s.location - src.location;
    double total = 0.0;
    for (std::size_t a = 0; a < s.cov.size(); ++a) {
        for (std::size_t b = 0; b < src.cov.size(); ++b) {
            const Cov2 m = s.cov[a] + src.cov[b];
            if (!(m.det() > 0.0)) throw NumericError("singular covariance sum in spatial kernel");
            total += s.features.weight[a] * src.features.weight[b] * gaussian_density(delta, m);
        }
    }
    return total;
}

double spatial_kernel(geo::Point s, geo::Point src, const KernelParams& params) {
    return spatial_kernel(prepare_site(s, params), prepare_site(src, params));
}

double influence_kernel(double t, double t_src, geo::Point s, geo::Point src,
                        const KernelParams& params) {
    const double nu = temporal_kernel(t - t_src, params.magnitude(), params.time_scale());
    if (nu == 0.0) return 0.0;
    return nu * spatial_kernel(s, src, params);
}

double spatial_kernel_bound(const KernelParams& params) {
    const double c2 = params.focus_bound() * params.focus_bound();
    const double min_eig = params.cov_scale() * params.cov_scale() *
                           (ellipse_q(c2, params.ellipse_area) - 0.5 * c2);
    return 1.0 / (2.0 * pi * 2.0 * min_eig);
}

double max_pair_variance(const KernelParams& params) {
    const double c2 = params.focus_bound() * params.focus_bound();
    return 2.0 * params.cov_scale() * params.cov_scale() *
           (ellipse_q(c2, params.ellipse_area) + 0.5 * c2);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double triggering_integral(std::span<const double> times, double horizon, double magnitude,
                           double time_scale) {
    std::vector<double> terms(times.size());
    for (std::size_t i = 0; i < times.size(); ++i) {
        // Phi(z) - 1/2 = erf(z / sqrt 2) / 2, exact near z = 0.
        terms[i] = 0.5 * std::erf((horizon - times[i]) / (time_scale * std::numbers::sqrt2));
    }
    return std::sqrt(2.0 * pi) * magnitude * time_scale * pairwise_sum(terms);
}

double triggering_integral(const data::EventSequence& events, const KernelParams& params) {
    std::vector<double> times;
    times.reserve(events.size());
    for (const data::Event& e : events) times.push_back(e.t);
    return triggering_integral(times, events.horizon, params.magnitude(), params.time_scale());
}

double triggering_error_bound(double area, double focus_bound) {
    const double c2 = focus_bound * focus_bound;
    const double u = (std::sqrt(4.0 * area * area + c2 * c2 * pi * pi) + c2 * pi) / (2.0 * area);
    return std::max(u - 1.0, 1.0 - 1.0 / u);
}

} // namespace nshawkes::kernel
