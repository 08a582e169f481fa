#pragma once

#include "nshawkes/data.hpp"
#include "nshawkes/geo.hpp"
#include "nshawkes/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include <unistd.h>

namespace testing_support {

namespace geo = nshawkes::geo;
namespace data = nshawkes::data;
namespace model = nshawkes::model;

inline geo::Region square(const std::string& id, double x0, double y0, double size,
                          std::vector<double> covariates = {}) {
    geo::Region r;
    r.id = id;
    r.rings = {{{x0, y0}, {x0 + size, y0}, {x0 + size, y0 + size}, {x0, y0 + size}}};
    r.covariates = std::move(covariates);
    return r;
}

/// nx-by-ny partition of the unit box with covariates x and y - x^2.
inline geo::RegionSet unit_partition(int nx, int ny) {
    return geo::rectangular_partition({0.0, 0.0, 1.0, 1.0}, nx, ny, {"east", "bend"},
                                      [](geo::Point p) {
                                          return std::vector<double>{p.x, p.y - p.x * p.x};
                                      });
}

/// Random model with every parameter block active.
inline model::ModelParams random_params(const geo::RegionSet& regions, std::uint64_t seed,
                                        int components = 2, int hidden = 4) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    model::ModelConfig mc;
    mc.components = components;
    mc.hidden = hidden;
    data::EventSequence none;
    model::ModelParams p = model::initial_params(none, regions, 1.0, mc, seed);
    for (double& w : p.kernel.nets.parameters()) w = 1.5 * u(rng);
    p.kernel.set_magnitude(0.5 + 0.4 * u(rng));
    p.kernel.set_time_scale(0.8 + 0.3 * u(rng));
    p.kernel.set_cov_scale(0.3 + 0.1 * u(rng));
    p.background.set_base_rate(2.0 + u(rng));
    for (double& g : p.background.gamma) g = 0.5 * u(rng);
    return p;
}

/// Uniform events in the unit box on [0, T].
inline data::EventSequence random_events(std::size_t n, double horizon, std::uint64_t seed,
                                         geo::Box box = {0.0, 0.0, 1.0, 1.0}) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    data::EventSequence seq;
    seq.horizon = horizon;
    for (std::size_t i = 0; i < n; ++i) {
        seq.events.push_back({horizon * u(rng), {box.min_x + box.width() * u(rng),
                                                 box.min_y + box.height() * u(rng)}});
    }
    std::sort(seq.events.begin(), seq.events.end(),
              [](const data::Event& a, const data::Event& b) { return a.t < b.t; });
    return seq;
}

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("nshawkes_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace testing_support
