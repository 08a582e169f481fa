#include "nshawkes/baselines.hpp"

#include "nshawkes/errors.hpp"
#include "nshawkes/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <numbers>
#include <string>

namespace nshawkes::baselines {

using std::numbers::pi;

void validate(const WeeklySeries& series) {
    const std::size_t weeks = series.weeks();
    for (std::size_t j = 0; j < series.counts.size(); ++j) {
        if (series.counts[j].size() != weeks) {
            throw ContractError("weekly series of region " + std::to_string(j) +
                                " has a different length");
        }
        for (double v : series.counts[j]) {
            if (!(v >= 0.0) || v != std::floor(v)) {
                throw ContractError("weekly counts must be nonnegative integers");
            }
        }
    }
}

std::vector<double> persistent_predict(const WeeklySeries& series) {
    validate(series);
    if (series.weeks() == 0) throw ContractError("persistent prediction needs at least one week");
    std::vector<double> out;
    out.reserve(series.regions());
    for (const auto& s : series.counts) out.push_back(s.back());
    return out;
}

ArModel ar_fit(const std::vector<double>& series, int p, int d) {
    if (p < 0 || d < 0) throw ConfigError("AR order and differencing must be nonnegative");
    if (series.size() <= static_cast<std::size_t>(p + d + 1)) {
        throw ContractError("AR(" + std::to_string(p) + ") with d=" + std::to_string(d) +
                            " needs more than " + std::to_string(p + d + 1) + " observations");
    }
    ArModel m;
    m.p = p;
    m.d = d;
    m.series = series;

    std::vector<double> y = series;
    for (int k = 0; k < d; ++k) {
        for (std::size_t i = y.size() - 1; i > 0; --i) y[i] -= y[i - 1];
        y.erase(y.begin());
    }
    const auto P = static_cast<std::size_t>(p);
    const std::size_t rows = y.size() - P;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(P + 1));
    Eigen::VectorXd target(static_cast<Eigen::Index>(rows));
    for (std::size_t r = 0; r < rows; ++r) {
        const std::size_t t = r + P;
        const auto ri = static_cast<Eigen::Index>(r);
        X(ri, 0) = 1.0;
        for (std::size_t k = 1; k <= P; ++k) X(ri, static_cast<Eigen::Index>(k)) = y[t - k];
        target(ri) = y[t];
    }
    Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(X);
    m.rank_deficient = cod.rank() < X.cols();
    const Eigen::VectorXd beta = cod.solve(target);
    m.coefficients.assign(beta.data(), beta.data() + beta.size());
    return m;
}

std::vector<double> ar_predict(const ArModel& m, std::size_t horizon) {
    // levels[k] is the k-times differenced series.
    std::vector<std::vector<double>> levels{m.series};
    for (int k = 0; k < m.d; ++k) {
        const auto& prev = levels.back();
        std::vector<double> next(prev.size() - 1);
        for (std::size_t i = 1; i < prev.size(); ++i) next[i - 1] = prev[i] - prev[i - 1];
        levels.push_back(std::move(next));
    }
    std::vector<double> y = levels.back();
    const auto P = static_cast<std::size_t>(m.p);
    std::vector<double> out;
    std::vector<double> last(levels.size());
    for (std::size_t k = 0; k < levels.size(); ++k) last[k] = levels[k].back();

    bool finite = true;
    for (std::size_t h = 0; h < horizon; ++h) {
        double f = m.coefficients[0];
        for (std::size_t k = 1; k <= P; ++k) f += m.coefficients[k] * y[y.size() - k];
        y.push_back(f);
        // Integrate back: each level's new value is its last plus the next level's new value.
        double v = f;
        for (std::size_t k = levels.size() - 1; k-- > 0;) {
            last[k] += v;
            v = last[k];
        }
        finite = finite && std::isfinite(v);
        out.push_back(v);
    }
    if (!finite) std::fill(out.begin(), out.end(), m.series.back());
    for (double& v : out) v = std::max(v, 0.0);
    return out;
}

std::vector<double> ar_predict_next(const WeeklySeries& series, int p, int d) {
    validate(series);
    std::vector<double> out(series.regions());
    parallel_for(series.regions(), [&](std::size_t j) {
        out[j] = ar_predict(ar_fit(series.counts[j], p, d), 1).front();
    }, 16);
    return out;
}

std::vector<double> EtasParams::to_free() const {
    return {log_base_rate, log_magnitude, log_decay, log_spatial_scale};
}

EtasParams EtasParams::from_free(std::span<const double> theta) {
    if (theta.size() != 4) throw ContractError("ETAS free vector must have four entries");
    EtasParams p;
    p.log_base_rate = theta[0];
    p.log_magnitude = theta[1];
    p.log_decay = theta[2];
    p.log_spatial_scale = theta[3];
    return p;
}

double etas_log_likelihood(const EtasParams& params, const data::EventSequence& events,
                           double domain_area, std::vector<double>* gradient) {
    const std::size_t n = events.size();
    const double mu0 = params.base_rate();
    const double c = params.magnitude();
    const double beta = params.decay();
    const double sigma = params.spatial_scale();
    const double s2 = sigma * sigma;
    const double window = kEtasWindow / beta;
    const double T = events.horizon;

    std::vector<double> log_lambda(n), g_mu(n), g_c(n), g_beta(n), g_sigma(n);
    std::vector<std::size_t> first(n);
    for (std::size_t i = 0, lo = 0; i < n; ++i) {
        while (events[i].t - events[lo].t > window) ++lo;
        first[i] = lo;
    }
    parallel_for(n, [&](std::size_t i) {
        double trig = 0.0, d_beta = 0.0, d_sigma = 0.0;
        for (std::size_t j = first[i]; j < i; ++j) {
            const double lag = events[i].t - events[j].t;
            if (!(lag > 0.0)) continue;
            const geo::Point delta = events[i].s - events[j].s;
            const double r2 = delta.x * delta.x + delta.y * delta.y;
            const double k = c * std::exp(-beta * lag) * std::exp(-0.5 * r2 / s2) / (2.0 * pi * s2);
            trig += k;
            d_beta += -k * beta * lag;
            d_sigma += k * (r2 / s2 - 2.0);
        }
        const double lambda = mu0 + trig;
        log_lambda[i] = std::log(lambda);
        g_mu[i] = mu0 / lambda;
        g_c[i] = trig / lambda;
        g_beta[i] = d_beta / lambda;
        g_sigma[i] = d_sigma / lambda;
    }, 64);
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(log_lambda[i])) {
            throw NumericError("non-finite ETAS log-intensity at event " + std::to_string(i));
        }
    }

    std::vector<double> integral(n), d_int_beta(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double u = T - events[i].t;
        const double e = std::exp(-beta * u);
        integral[i] = c / beta * -std::expm1(-beta * u);
        d_int_beta[i] = c / beta * ((1.0 + beta * u) * e - 1.0);
    }
    const double trig_int = pairwise_sum(integral);
    const double bg_int = mu0 * domain_area * T;
    const double value = pairwise_sum(log_lambda) - bg_int - trig_int;
    if (!std::isfinite(value)) throw NumericError("non-finite ETAS log-likelihood");
    if (gradient) {
        gradient->assign(4, 0.0);
        (*gradient)[0] = pairwise_sum(g_mu) - bg_int;
        (*gradient)[1] = pairwise_sum(g_c) - trig_int;
        (*gradient)[2] = pairwise_sum(g_beta) - pairwise_sum(d_int_beta);
        (*gradient)[3] = pairwise_sum(g_sigma);
    }
    return value;
}

EtasParams etas_initial(const data::EventSequence& events, const geo::RegionSet& regions,
                        double domain_area) {
    EtasParams p;
    const double volume = domain_area * events.horizon;
    const double rate = volume > 0.0 && !events.empty()
                            ? static_cast<double>(events.size()) / volume / 2.0
                            : 1.0;
    p.log_base_rate = std::log(rate);
    p.log_magnitude = std::log(0.1);
    p.log_decay = 0.0;
    const geo::Box& b = regions.bounds();
    p.log_spatial_scale = std::log(0.05 * std::max(b.width(), b.height()));
    return p;
}

EtasFit etas_fit(const data::EventSequence& events, const geo::RegionSet& regions,
                 const model::FitConfig& config) {
    data::validate(events);
    const double area = geo::build_grid(regions, config.grid_spacing).domain_area();
    const EtasParams init = etas_initial(events, regions, area);
    const model::Objective objective = [&](std::span<const double> theta, std::span<double> grad) {
        std::vector<double> g;
        const double v = etas_log_likelihood(EtasParams::from_free(theta), events, area, &g);
        std::copy(g.begin(), g.end(), grad.begin());
        return v;
    };
    const double n = static_cast<double>(std::max<std::size_t>(events.size(), 1));
    auto ascent = model::gradient_ascent(objective, init.to_free(), 1.0 / n, config);
    EtasFit out;
    out.params = EtasParams::from_free(ascent.theta);
    out.trace = std::move(ascent.trace);
    out.iterations = ascent.iterations;
    out.converged = ascent.converged;
    return out;
}

double EtasSurface::temporal(double lag) const {
    if (!(lag > 0.0)) return 0.0;
    return params_.magnitude() * std::exp(-params_.decay() * lag);
}

double EtasSurface::temporal_integral(double lo, double hi) const {
    lo = std::max(lo, 0.0);
    hi = std::max(hi, 0.0);
    if (hi <= lo) return 0.0;
    const double b = params_.decay();
    return params_.magnitude() / b * (std::exp(-b * lo) - std::exp(-b * hi));
}

kernel::SiteFeatures EtasSurface::prepare(geo::Point s) const {
    kernel::SiteFeatures site;
    site.location = s;
    return site;
}

double EtasSurface::spatial(const kernel::SiteFeatures& s, const kernel::SiteFeatures& src) const {
    const double s2 = params_.spatial_scale() * params_.spatial_scale();
    const double d = geo::distance(s.location, src.location);
    return std::exp(-0.5 * d * d / s2) / (2.0 * pi * s2);
}

double EtasSurface::spatial_cutoff() const { return std::sqrt(80.0) * params_.spatial_scale(); }

double EtasSurface::spatial_bound() const {
    return 1.0 / (2.0 * pi * params_.spatial_scale() * params_.spatial_scale());
}

} // namespace nshawkes::baselines
