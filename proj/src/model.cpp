#include "nshawkes/model.hpp"

#include "nshawkes/errors.hpp"
#include "nshawkes/parallel.hpp"
#include "nshawkes/random.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace nshawkes::model {

using std::numbers::pi;

std::size_t ModelParams::free_size() const {
    return nets_offset() + kernel.nets.parameter_count();
}

std::vector<double> ModelParams::to_free() const {
    std::vector<double> theta(free_size());
    theta[kLogMagnitude] = kernel.log_magnitude;
    theta[kLogTimeScale] = kernel.log_time_scale;
    theta[kLogCovScale] = kernel.log_cov_scale;
    theta[kLogBaseRate] = background.log_base_rate;
    std::copy(background.gamma.begin(), background.gamma.end(), theta.begin() + kGamma);
    const auto nets = kernel.nets.parameters();
    std::copy(nets.begin(), nets.end(), theta.begin() + static_cast<std::ptrdiff_t>(nets_offset()));
    return theta;
}

void ModelParams::assign_free(std::span<const double> theta) {
    if (theta.size() != free_size()) {
        throw ContractError("free parameter vector has length " + std::to_string(theta.size()) +
                            ", expected " + std::to_string(free_size()));
    }
    kernel.log_magnitude = theta[kLogMagnitude];
    kernel.log_time_scale = theta[kLogTimeScale];
    kernel.log_cov_scale = theta[kLogCovScale];
    background.log_base_rate = theta[kLogBaseRate];
    std::copy(theta.begin() + kGamma, theta.begin() + static_cast<std::ptrdiff_t>(nets_offset()),
              background.gamma.begin());
    auto nets = kernel.nets.parameters();
    std::copy(theta.begin() + static_cast<std::ptrdiff_t>(nets_offset()), theta.end(), nets.begin());
}

ModelParams initial_params(const data::EventSequence& events, const geo::RegionSet& regions,
                           double domain_area, const ModelConfig& config, std::uint64_t seed) {
    if (!(config.ellipse_area > 0.0)) throw ConfigError("ellipse area A must be positive");
    if (!(config.bandwidth > 0.0)) throw ConfigError("background bandwidth must be positive");
    ModelParams p;
    p.kernel.nets = neural::FeatureNet(config.components, config.hidden, config.focus_bound,
                                       regions.bounds());
    p.kernel.nets.initialize(stream_seed(seed, "init"));
    p.kernel.ellipse_area = config.ellipse_area;
    p.kernel.set_magnitude(0.1);
    p.kernel.set_time_scale(1.0);
    p.kernel.set_cov_scale(1.0);
    const double volume = domain_area * events.horizon;
    const double rate = volume > 0.0 && !events.empty()
                            ? static_cast<double>(events.size()) / volume / 2.0
                            : 1.0;
    p.background.set_base_rate(rate);
    p.background.gamma.assign(regions.covariate_count(), 0.0);
    p.background.bandwidth = config.bandwidth;
    return p;
}

double conditional_intensity(double t, geo::Point s, const data::EventSequence& history,
                             const ModelParams& params, const geo::RegionSet& regions) {
    const kernel::SiteFeatures here = kernel::prepare_site(s, params.kernel);
    double total = background::background_intensity(s, regions, params.background);
    const double c = params.kernel.magnitude();
    const double sigma = params.kernel.time_scale();
    for (std::size_t j = 0; j < history.size(); ++j) {
        const data::Event& e = history[j];
        if (!(e.t < t)) {
            throw ContractError("history event " + std::to_string(j) + " at t=" +
                                std::to_string(e.t) + " is not before t=" + std::to_string(t));
        }
        const double nu = kernel::temporal_kernel(t - e.t, c, sigma);
        if (nu == 0.0) continue;
        total += nu * kernel::spatial_kernel(here, kernel::prepare_site(e.s, params.kernel));
    }
    return total;
}

Likelihood::Likelihood(data::EventSequence events, const geo::RegionSet& regions,
                       const geo::IntensityGrid& grid, double bandwidth)
    : events_(std::move(events)),
      field_(grid, regions, bandwidth),
      domain_area_(grid.domain_area()) {
    data::validate(events_);
    const std::size_t L = regions.covariate_count();
    event_design_.resize(events_.size() * L);
    parallel_for(events_.size(), [&](std::size_t i) {
        const auto z = background::covariate_design(
            background::region_weights(events_[i].s, regions, bandwidth), regions);
        std::copy(z.begin(), z.end(), event_design_.begin() + static_cast<std::ptrdiff_t>(i * L));
    });
}

namespace {

struct EventSite {
    kernel::SiteFeatures site;
    neural::ForwardCache cache;
};

double dot(const double* a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < b.size(); ++i) s += a[i] * b[i];
    return s;
}

} // namespace

Likelihood::Result Likelihood::evaluate(const ModelParams& params, bool with_gradient) const {
    const std::size_t n = events_.size();
    const std::size_t L = field_.covariate_count();
    if (params.background.gamma.size() != L) {
        throw ContractError("gamma length does not match covariate count");
    }
    if (params.background.bandwidth != field_.bandwidth()) {
        throw ContractError("model bandwidth differs from the precomputed background field");
    }
    const auto& kp = params.kernel;
    const std::size_t R = static_cast<std::size_t>(kp.nets.components());
    const double C = kp.magnitude();
    const double sigma = kp.time_scale();
    const double window = kWindowScales * sigma;
    const double mu0 = params.background.base_rate();
    const double horizon = events_.horizon;

    std::vector<EventSite> sites(n);
    parallel_for(n, [&](std::size_t i) {
        sites[i].site = kernel::prepare_site(events_[i].s, kp, sites[i].cache);
    }, 64);

    // Pair ranges: j in [first[i], i) are candidate sources of i, i in (j, last[j]] targets of j.
    std::vector<std::size_t> first(n);
    std::vector<std::size_t> last(n);
    for (std::size_t i = 0, lo = 0; i < n; ++i) {
        while (events_[i].t - events_[lo].t > window) ++lo;
        first[i] = lo;
    }
    for (std::size_t j = n, hi = n; j-- > 0;) {
        while (hi > j + 1 && events_[hi - 1].t - events_[j].t > window) --hi;
        last[j] = hi == 0 ? 0 : hi - 1;
        if (last[j] < j) last[j] = j;
    }

    Result result;
    std::vector<double> expo(n);
    std::vector<char> clamped(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t c = 0;
        expo[i] = background::clamp_exponent(dot(event_design_.data() + i * L, params.background.gamma), &c);
        clamped[i] = c > 0;
        result.clamped += c;
    }

    std::vector<double> trig(n, 0.0);
    std::vector<double> lambda(n);
    std::vector<double> log_lambda(n);
    parallel_for(n, [&](std::size_t i) {
        double s = 0.0;
        for (std::size_t j = first[i]; j < i; ++j) {
            const double nu = kernel::temporal_kernel(events_[i].t - events_[j].t, C, sigma);
            if (nu == 0.0) continue;
            s += nu * kernel::spatial_kernel(sites[i].site, sites[j].site);
        }
        trig[i] = s;
        lambda[i] = mu0 + std::exp(expo[i]) + s;
        log_lambda[i] = std::log(lambda[i]);
    }, 64);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(log_lambda[i])) {
            throw NumericError("non-finite log-intensity at event " + std::to_string(i));
        }
    }

    std::vector<double> times(n);
    for (std::size_t i = 0; i < n; ++i) times[i] = events_[i].t;

    std::vector<double> d_gamma_bg(L, 0.0);
    double d_mu_bg = 0.0;
    result.event_term = pairwise_sum(log_lambda);
    result.triggering_integral = kernel::triggering_integral(times, horizon, C, sigma);
    result.background_integral =
        with_gradient ? field_.integral(params.background, horizon, d_gamma_bg, &d_mu_bg, &result.clamped)
                      : field_.integral(params.background, horizon, {}, nullptr, &result.clamped);
    result.value = result.event_term - result.triggering_integral - result.background_integral;
    if (!std::isfinite(result.value)) throw NumericError("non-finite log-likelihood");
    if (!with_gradient) return result;

    // Per-event accumulators for the feature-network path.
    std::vector<std::vector<double>> d_weight(n, std::vector<double>(R, 0.0));
    std::vector<std::vector<kernel::CovGrad>> d_cov(n, std::vector<kernel::CovGrad>(R));
    std::vector<double> g_mag(n, 0.0), g_time(n, 0.0), g_scale(n, 0.0);

    auto add = [](kernel::CovGrad& acc, const kernel::CovGrad& g, double k) {
        acc.xx += k * g.xx;
        acc.xy += k * g.xy;
        acc.yy += k * g.yy;
    };

    // Target side: derivatives of lambda_i with respect to quantities at s_i.
    parallel_for(n, [&](std::size_t i) {
        const double inv = 1.0 / lambda[i];
        g_mag[i] = trig[i] * inv;
        const auto& si = sites[i].site;
        for (std::size_t j = first[i]; j < i; ++j) {
            const double lag = events_[i].t - events_[j].t;
            const double nu = kernel::temporal_kernel(lag, C, sigma);
            if (nu == 0.0) continue;
            const double coef = nu * inv;
            const auto& sj = sites[j].site;
            const geo::Point delta = si.location - sj.location;
            double ups = 0.0;
            double ups_scale = 0.0;
            for (std::size_t a = 0; a < R; ++a) {
                for (std::size_t b = 0; b < R; ++b) {
                    const auto term = kernel::gaussian_term(delta, si.cov[a] + sj.cov[b]);
                    const double ww = si.features.weight[a] * sj.features.weight[b];
                    ups += ww * term.value;
                    ups_scale += ww * term.value * (term.mahalanobis - 2.0);
                    d_weight[i][a] += coef * sj.features.weight[b] * term.value;
                    add(d_cov[i][a], term.d_cov, coef * ww);
                }
            }
            g_time[i] += coef * ups * (lag * lag) / (sigma * sigma);
            g_scale[i] += coef * ups_scale;
        }
    }, 64);

    // Source side: derivatives of every lambda_i (i after j) with respect to s_j.
    parallel_for(n, [&](std::size_t j) {
        const auto& sj = sites[j].site;
        for (std::size_t i = j + 1; i <= last[j] && i < n; ++i) {
            const double lag = events_[i].t - events_[j].t;
            const double nu = kernel::temporal_kernel(lag, C, sigma);
            if (nu == 0.0) continue;
            const double coef = nu / lambda[i];
            const auto& si = sites[i].site;
            const geo::Point delta = si.location - sj.location;
            for (std::size_t a = 0; a < R; ++a) {
                for (std::size_t b = 0; b < R; ++b) {
                    const auto term = kernel::gaussian_term(delta, si.cov[a] + sj.cov[b]);
                    const double ww = si.features.weight[a] * sj.features.weight[b];
                    d_weight[j][b] += coef * si.features.weight[a] * term.value;
                    add(d_cov[j][b], term.d_cov, coef * ww);
                }
            }
        }
    }, 64);

    // Back through the networks in fixed blocks so the reduction order does
    // not depend on the worker count.
    const std::size_t P = kp.nets.parameter_count();
    constexpr std::size_t kBlock = 32;
    const std::size_t blocks = (n + kBlock - 1) / kBlock;
    std::vector<std::vector<double>> block_grad(blocks);
    const double tau = kp.cov_scale();
    parallel_for(blocks, [&](std::size_t bidx) {
        block_grad[bidx].assign(P, 0.0);
        for (std::size_t i = bidx * kBlock; i < std::min(n, (bidx + 1) * kBlock); ++i) {
            neural::FeatureGrad fg(R);
            bool any = false;
            for (std::size_t r = 0; r < R; ++r) {
                fg.weight[r] = d_weight[i][r];
                fg.focus[r] = kernel::focus_gradient(sites[i].site.features.focus[r],
                                                     kp.ellipse_area, tau, d_cov[i][r]);
                any = any || fg.weight[r] != 0.0 || fg.focus[r].x != 0.0 || fg.focus[r].y != 0.0;
            }
            if (any) kp.nets.backward(sites[i].cache, sites[i].site.features, fg, block_grad[bidx]);
        }
    }, 2);

    result.gradient.assign(params.free_size(), 0.0);
    auto& g = result.gradient;

    std::vector<double> z_terms(n);
    double phi_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = (horizon - times[i]) / sigma;
        z_terms[i] = -z * std::exp(-0.5 * z * z) / std::sqrt(2.0 * pi);
    }
    phi_sum = pairwise_sum(z_terms);
    const double d_trig_time = result.triggering_integral + std::sqrt(2.0 * pi) * C * sigma * phi_sum;

    g[ModelParams::kLogMagnitude] = pairwise_sum(g_mag) - result.triggering_integral;
    g[ModelParams::kLogTimeScale] = pairwise_sum(g_time) - d_trig_time;
    g[ModelParams::kLogCovScale] = pairwise_sum(g_scale);

    std::vector<double> column(n);
    for (std::size_t i = 0; i < n; ++i) column[i] = mu0 / lambda[i];
    g[ModelParams::kLogBaseRate] = pairwise_sum(column) - d_mu_bg;
    for (std::size_t l = 0; l < L; ++l) {
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = clamped[i] ? 0.0 : std::exp(expo[i]) / lambda[i] * event_design_[i * L + l];
        }
        g[ModelParams::kGamma + l] = pairwise_sum(column) - d_gamma_bg[l];
    }
    const std::size_t off = params.nets_offset();
    for (const auto& bg : block_grad) {
        for (std::size_t p = 0; p < P; ++p) g[off + p] += bg[p];
    }
    return result;
}

double log_likelihood(const ModelParams& params, const data::EventSequence& events,
                      const geo::RegionSet& regions, const geo::IntensityGrid& grid) {
    return Likelihood(events, regions, grid, params.background.bandwidth).evaluate(params, false).value;
}

std::vector<double> gradient(const ModelParams& params, const data::EventSequence& events,
                             const geo::RegionSet& regions, const geo::IntensityGrid& grid) {
    return Likelihood(events, regions, grid, params.background.bandwidth)
        .evaluate(params, true)
        .gradient;
}

AscentResult gradient_ascent(const Objective& objective, std::vector<double> theta, double scale,
                             const FitConfig& config) {
    if (!(config.learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
    if (!(config.tolerance > 0.0)) throw ConfigError("convergence tolerance must be positive");
    if (config.patience == 0) throw ConfigError("convergence patience must be at least one");

    AscentResult out;
    std::vector<double> grad(theta.size());
    double value = objective(theta, grad);
    out.trace.push_back(value);
    if (config.on_iteration) config.on_iteration(0, value);

    std::vector<double> candidate(theta.size());
    std::vector<double> candidate_grad(theta.size());
    for (std::size_t it = 1; it <= config.max_iterations; ++it) {
        double rate = config.learning_rate;
        double next = 0.0;
        for (int attempt = 0;; ++attempt) {
            for (std::size_t k = 0; k < theta.size(); ++k) {
                candidate[k] = theta[k] + rate * scale * grad[k];
            }
            bool ok = true;
            try {
                next = objective(candidate, candidate_grad);
                ok = std::isfinite(next);
                for (double gk : candidate_grad) ok = ok && std::isfinite(gk);
            } catch (const NumericError&) {
                ok = false;
            }
            if (ok) break;
            if (!config.step_halving || attempt >= 30) {
                throw NumericError("gradient ascent diverged at iteration " + std::to_string(it) +
                                   "; try a smaller learning rate");
            }
            rate *= 0.5;
        }
        theta.swap(candidate);
        grad.swap(candidate_grad);
        value = next;
        out.trace.push_back(value);
        out.iterations = it;
        if (config.on_iteration) config.on_iteration(it, value);
        if (it >= config.patience) {
            const double before = out.trace[it - config.patience];
            const double rel = std::abs(value - before) / std::max(std::abs(value), 1e-300);
            if (rel < config.tolerance) {
                out.converged = true;
                break;
            }
        }
    }
    out.theta = std::move(theta);
    return out;
}

FitResult fit(const ModelParams& initial, const Likelihood& likelihood, const FitConfig& config) {
    ModelParams work = initial;
    const Objective objective = [&](std::span<const double> theta, std::span<double> grad) {
        work.assign_free(theta);
        auto r = likelihood.evaluate(work, true);
        std::copy(r.gradient.begin(), r.gradient.end(), grad.begin());
        return r.value;
    };
    const double n = static_cast<double>(std::max<std::size_t>(likelihood.events().size(), 1));
    AscentResult ascent = gradient_ascent(objective, initial.to_free(), 1.0 / n, config);
    FitResult result;
    result.params = initial;
    result.params.assign_free(ascent.theta);
    result.trace = std::move(ascent.trace);
    result.iterations = ascent.iterations;
    result.converged = ascent.converged;
    return result;
}

FitResult fit(const data::EventSequence& events, const geo::RegionSet& regions,
              const ModelConfig& model_config, const FitConfig& fit_config) {
    const geo::IntensityGrid grid = geo::build_grid(regions, fit_config.grid_spacing);
    const Likelihood likelihood(events, regions, grid, model_config.bandwidth);
    const ModelParams init =
        initial_params(events, regions, grid.domain_area(), model_config, fit_config.seed);
    return fit(init, likelihood, fit_config);
}

NeuralSurface::NeuralSurface(ModelParams params, const geo::RegionSet& regions)
    : params_(std::move(params)), regions_(&regions) {
    if (params_.background.gamma.size() != regions.covariate_count()) {
        throw ContractError("gamma length does not match covariate count");
    }
}

double NeuralSurface::background(geo::Point s) const {
    return background::background_intensity(s, *regions_, params_.background);
}

double NeuralSurface::background(const geo::GridCell& cell) const {
    if (cell.neighbors.empty()) return background(cell.center);
    const auto z = background::covariate_design(
        background::region_weights(cell, params_.background.bandwidth), *regions_);
    return params_.background.base_rate() +
           std::exp(background::clamp_exponent(dot(z.data(), params_.background.gamma)));
}

double NeuralSurface::temporal(double lag) const {
    return kernel::temporal_kernel(lag, params_.kernel.magnitude(), params_.kernel.time_scale());
}

double NeuralSurface::temporal_integral(double lo, double hi) const {
    lo = std::max(lo, 0.0);
    hi = std::max(hi, 0.0);
    if (hi <= lo) return 0.0;
    const double sigma = params_.kernel.time_scale();
    const double k = 1.0 / (sigma * std::numbers::sqrt2);
    return params_.kernel.magnitude() * sigma * std::sqrt(pi / 2.0) *
           (std::erf(hi * k) - std::erf(lo * k));
}

double NeuralSurface::window() const { return kWindowScales * params_.kernel.time_scale(); }

kernel::SiteFeatures NeuralSurface::prepare(geo::Point s) const {
    return kernel::prepare_site(s, params_.kernel);
}

double NeuralSurface::spatial(const kernel::SiteFeatures& s, const kernel::SiteFeatures& src) const {
    return kernel::spatial_kernel(s, src);
}

double NeuralSurface::spatial_cutoff() const {
    return std::sqrt(80.0 * kernel::max_pair_variance(params_.kernel));
}

double NeuralSurface::background_bound(const geo::RegionSet& regions) const {
    // The exponent is a convex combination of neighbouring regions' gamma . x_j.
    double best = -INFINITY;
    for (const geo::Region& r : regions.regions()) {
        best = std::max(best, dot(r.covariates.data(), params_.background.gamma));
    }
    return params_.background.base_rate() + std::exp(background::clamp_exponent(best));
}

double NeuralSurface::temporal_bound() const { return params_.kernel.magnitude(); }

double NeuralSurface::spatial_bound() const { return kernel::spatial_kernel_bound(params_.kernel); }

} // namespace nshawkes::model
