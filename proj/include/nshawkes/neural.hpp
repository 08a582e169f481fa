#pragma once

#include "nshawkes/geo.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace nshawkes::neural {

/// Per-location output of the feature networks: one focus point and one
/// mixture weight per component. |focus[r]| <= c and the weights sum to one.
struct FeatureOutput {
    std::vector<geo::Point> focus;
    std::vector<double> weight;
};

/// Gradient of a scalar loss with respect to a FeatureOutput (same shape).
struct FeatureGrad {
    std::vector<geo::Point> focus;
    std::vector<double> weight;

    explicit FeatureGrad(std::size_t components = 0)
        : focus(components), weight(components, 0.0) {}
};

/// Activations kept from a forward pass for the matching backward pass.
struct ForwardCache {
    geo::Point input;                     // rescaled location
    std::vector<double> z1, h1, z2, h2;   // R * H each
    std::vector<double> raw;              // R * 3 network outputs
};

/// R independent fully connected networks, each 2 -> H -> H -> 3 with softplus
/// hidden activations. Network r emits a raw focus vector v (squashed onto the
/// disc of radius c as c * tanh(|v|) * v / |v|) and a weight logit; the logits
/// are normalized jointly by a softmax. Locations are mapped affinely from the
/// input box onto [-1, 1]^2 before entering the networks.
///
/// Parameters live in one flat array, network by network, each laid out as
/// W1 (H x 2, row major), b1 (H), W2 (H x H), b2 (H), W3 (3 x H), b3 (3).
class FeatureNet {
public:
    FeatureNet() = default;
    FeatureNet(int components, int hidden, double focus_bound, const geo::Box& input_box);

    int components() const { return components_; }
    int hidden() const { return hidden_; }
    double focus_bound() const { return focus_bound_; }
    const geo::Box& input_box() const { return input_box_; }

    std::size_t parameters_per_network() const;
    std::size_t parameter_count() const { return params_.size(); }
    std::span<double> parameters() { return params_; }
    std::span<const double> parameters() const { return params_; }

    /// Offsets of each block inside one network's parameter slice.
    struct Layout {
        std::size_t w1, b1, w2, b2, w3, b3, size;
    };
    Layout layout() const;

    /// Uniform(-a, a) weights with a = sqrt(6 / (fan_in + fan_out)), zero biases.
    void initialize(std::uint64_t seed);

    geo::Point rescale(geo::Point s) const;

    FeatureOutput forward(geo::Point s) const;
    FeatureOutput forward(geo::Point s, ForwardCache& cache) const;

    /// Accumulates d(loss)/d(parameters) into grad (size parameter_count()).
    void backward(const ForwardCache& cache, const FeatureOutput& output,
                  const FeatureGrad& upstream, std::span<double> grad) const;

private:
    int components_ = 0;
    int hidden_ = 0;
    double focus_bound_ = 0.0;
    geo::Box input_box_;
    std::vector<double> params_;
};

double softplus(double x);
double sigmoid(double x);

} // namespace nshawkes::neural
