#pragma once

#include "nshawkes/data.hpp"
#include "nshawkes/geo.hpp"
#include "nshawkes/model.hpp"

#include <filesystem>
#include <string>

namespace nshawkes {

/// Everything needed to rebuild a fitted model: parameters, architecture,
/// covariate standardization and the time/space frame of the training data.
struct Checkpoint {
    model::ModelParams params;
    model::ModelConfig config;
    data::CovariateStats stats;
    geo::Box domain;
    std::string time_origin;  // timestamp of t = 0
    double horizon = 0.0;     // training horizon, days
};

inline constexpr int kCheckpointVersion = 1;

std::string checkpoint_to_json(const Checkpoint& checkpoint);
Checkpoint checkpoint_from_json(const std::string& text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

} // namespace nshawkes
