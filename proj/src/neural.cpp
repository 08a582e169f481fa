#include "nshawkes/neural.hpp"

#include "nshawkes/errors.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

namespace nshawkes::neural {

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

// tanh(r) / r and (d/dr (tanh(r) / r)) / r, with series near zero.
struct SquashFactors {
    double f;
    double df_over_r;
};

SquashFactors squash_factors(double r) {
    if (r < 1e-3) {
        const double r2 = r * r;
        return {1.0 - r2 / 3.0 + 2.0 * r2 * r2 / 15.0, -2.0 / 3.0 + 8.0 * r2 / 15.0};
    }
    const double th = std::tanh(r);
    const double sech2 = 1.0 - th * th;
    return {th / r, (r * sech2 - th) / (r * r * r)};
}

} // namespace

FeatureNet::FeatureNet(int components, int hidden, double focus_bound, const geo::Box& input_box)
    : components_(components), hidden_(hidden), focus_bound_(focus_bound), input_box_(input_box) {
    if (components < 1) throw ConfigError("feature networks need R >= 1");
    if (hidden < 1) throw ConfigError("feature networks need a hidden width >= 1");
    if (!(focus_bound > 0.0)) throw ConfigError("focus bound c must be positive");
    params_.assign(parameters_per_network() * static_cast<std::size_t>(components), 0.0);
}

FeatureNet::Layout FeatureNet::layout() const {
    const auto h = static_cast<std::size_t>(hidden_);
    Layout l{};
    l.w1 = 0;
    l.b1 = l.w1 + 2 * h;
    l.w2 = l.b1 + h;
    l.b2 = l.w2 + h * h;
    l.w3 = l.b2 + h;
    l.b3 = l.w3 + 3 * h;
    l.size = l.b3 + 3;
    return l;
}

std::size_t FeatureNet::parameters_per_network() const { return layout().size; }

void FeatureNet::initialize(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Layout l = layout();
    const auto h = static_cast<std::size_t>(hidden_);
    auto fill = [&](double* block, std::size_t count, double fan_in, double fan_out) {
        const double a = std::sqrt(6.0 / (fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-a, a);
        for (std::size_t i = 0; i < count; ++i) block[i] = dist(rng);
    };
    std::fill(params_.begin(), params_.end(), 0.0);
    for (int r = 0; r < components_; ++r) {
        double* p = params_.data() + static_cast<std::size_t>(r) * l.size;
        fill(p + l.w1, 2 * h, 2.0, static_cast<double>(h));
        fill(p + l.w2, h * h, static_cast<double>(h), static_cast<double>(h));
        fill(p + l.w3, 3 * h, static_cast<double>(h), 3.0);
    }
}

geo::Point FeatureNet::rescale(geo::Point s) const {
    const double w = input_box_.width() > 0.0 ? input_box_.width() : 1.0;
    const double hgt = input_box_.height() > 0.0 ? input_box_.height() : 1.0;
    return {2.0 * (s.x - input_box_.min_x) / w - 1.0, 2.0 * (s.y - input_box_.min_y) / hgt - 1.0};
}

FeatureOutput FeatureNet::forward(geo::Point s) const {
    ForwardCache cache;
    return forward(s, cache);
}

FeatureOutput FeatureNet::forward(geo::Point s, ForwardCache& cache) const {
    const auto R = static_cast<std::size_t>(components_);
    const auto H = static_cast<std::size_t>(hidden_);
    const Layout l = layout();
    cache.input = rescale(s);
    cache.z1.resize(R * H);
    cache.h1.resize(R * H);
    cache.z2.resize(R * H);
    cache.h2.resize(R * H);
    cache.raw.resize(R * 3);

    for (std::size_t r = 0; r < R; ++r) {
        const double* p = params_.data() + r * l.size;
        double* z1 = cache.z1.data() + r * H;
        double* h1 = cache.h1.data() + r * H;
        double* z2 = cache.z2.data() + r * H;
        double* h2 = cache.h2.data() + r * H;
        double* out = cache.raw.data() + r * 3;
        for (std::size_t i = 0; i < H; ++i) {
            z1[i] = p[l.w1 + 2 * i] * cache.input.x + p[l.w1 + 2 * i + 1] * cache.input.y + p[l.b1 + i];
            h1[i] = softplus(z1[i]);
        }
        for (std::size_t i = 0; i < H; ++i) {
            const double* row = p + l.w2 + i * H;
            double acc = p[l.b2 + i];
            for (std::size_t k = 0; k < H; ++k) acc += row[k] * h1[k];
            z2[i] = acc;
            h2[i] = softplus(acc);
        }
        for (std::size_t o = 0; o < 3; ++o) {
            const double* row = p + l.w3 + o * H;
            double acc = p[l.b3 + o];
            for (std::size_t k = 0; k < H; ++k) acc += row[k] * h2[k];
            out[o] = acc;
        }
    }

    FeatureOutput result;
    result.focus.resize(R);
    result.weight.resize(R);
    double max_logit = -INFINITY;
    for (std::size_t r = 0; r < R; ++r) max_logit = std::max(max_logit, cache.raw[r * 3 + 2]);
    double z = 0.0;
    for (std::size_t r = 0; r < R; ++r) {
        const double vx = cache.raw[r * 3];
        const double vy = cache.raw[r * 3 + 1];
        const double f = squash_factors(std::hypot(vx, vy)).f;
        result.focus[r] = {focus_bound_ * f * vx, focus_bound_ * f * vy};
        result.weight[r] = std::exp(cache.raw[r * 3 + 2] - max_logit);
        z += result.weight[r];
    }
    for (std::size_t r = 0; r < R; ++r) {
        result.weight[r] /= z;
        if (!std::isfinite(result.weight[r]) || !std::isfinite(result.focus[r].x) ||
            !std::isfinite(result.focus[r].y)) {
            throw NumericError("feature network produced a non-finite output at (" +
                               std::to_string(s.x) + ", " + std::to_string(s.y) + ")");
        }
    }
    return result;
}

void FeatureNet::backward(const ForwardCache& cache, const FeatureOutput& output,
                          const FeatureGrad& upstream, std::span<double> grad) const {
    const auto R = static_cast<std::size_t>(components_);
    const auto H = static_cast<std::size_t>(hidden_);
    if (upstream.focus.size() != R || upstream.weight.size() != R || output.weight.size() != R ||
        grad.size() != params_.size() || cache.raw.size() != R * 3) {
        throw ContractError("feature network gradient shape mismatch");
    }
    const Layout l = layout();

    // Softmax: d logit_r = w_r (g_r - sum_m w_m g_m).
    double mean_g = 0.0;
    for (std::size_t r = 0; r < R; ++r) mean_g += output.weight[r] * upstream.weight[r];

    std::vector<double> gh2(H);
    std::vector<double> gz2(H);
    std::vector<double> gh1(H);
    for (std::size_t r = 0; r < R; ++r) {
        const double* p = params_.data() + r * l.size;
        double* g = grad.data() + r * l.size;
        const double* z1 = cache.z1.data() + r * H;
        const double* h1 = cache.h1.data() + r * H;
        const double* z2 = cache.z2.data() + r * H;
        const double* h2 = cache.h2.data() + r * H;

        const double vx = cache.raw[r * 3];
        const double vy = cache.raw[r * 3 + 1];
        const SquashFactors sq = squash_factors(std::hypot(vx, vy));
        const geo::Point gpsi = upstream.focus[r];
        const double vdotg = vx * gpsi.x + vy * gpsi.y;
        double go[3];
        go[0] = focus_bound_ * (sq.f * gpsi.x + sq.df_over_r * vdotg * vx);
        go[1] = focus_bound_ * (sq.f * gpsi.y + sq.df_over_r * vdotg * vy);
        go[2] = output.weight[r] * (upstream.weight[r] - mean_g);
        if (go[0] == 0.0 && go[1] == 0.0 && go[2] == 0.0) continue;

        std::fill(gh2.begin(), gh2.end(), 0.0);
        for (std::size_t o = 0; o < 3; ++o) {
            g[l.b3 + o] += go[o];
            const double* row = p + l.w3 + o * H;
            double* grow = g + l.w3 + o * H;
            for (std::size_t k = 0; k < H; ++k) {
                grow[k] += go[o] * h2[k];
                gh2[k] += row[k] * go[o];
            }
        }
        for (std::size_t i = 0; i < H; ++i) gz2[i] = gh2[i] * sigmoid(z2[i]);
        std::fill(gh1.begin(), gh1.end(), 0.0);
        for (std::size_t i = 0; i < H; ++i) {
            g[l.b2 + i] += gz2[i];
            const double* row = p + l.w2 + i * H;
            double* grow = g + l.w2 + i * H;
            for (std::size_t k = 0; k < H; ++k) {
                grow[k] += gz2[i] * h1[k];
                gh1[k] += row[k] * gz2[i];
            }
        }
        for (std::size_t i = 0; i < H; ++i) {
            const double gz1 = gh1[i] * sigmoid(z1[i]);
            g[l.b1 + i] += gz1;
            g[l.w1 + 2 * i] += gz1 * cache.input.x;
            g[l.w1 + 2 * i + 1] += gz1 * cache.input.y;
        }
    }
}

} // namespace nshawkes::neural
