#include "nshawkes/checkpoint.hpp"

#include "nshawkes/errors.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace nshawkes {

using nlohmann::json;

namespace {

json net_json(const neural::FeatureNet& nets) {
    const auto l = nets.layout();
    const auto p = nets.parameters();
    json out = json::array();
    for (int r = 0; r < nets.components(); ++r) {
        const std::size_t base = static_cast<std::size_t>(r) * l.size;
        auto slice = [&](std::size_t from, std::size_t to) {
            return std::vector<double>(p.begin() + static_cast<std::ptrdiff_t>(base + from),
                                       p.begin() + static_cast<std::ptrdiff_t>(base + to));
        };
        out.push_back({{"W1", slice(l.w1, l.b1)}, {"b1", slice(l.b1, l.w2)},
                       {"W2", slice(l.w2, l.b2)}, {"b2", slice(l.b2, l.w3)},
                       {"W3", slice(l.w3, l.b3)}, {"b3", slice(l.b3, l.size)}});
    }
    return out;
}

template <class T>
T field(const json& j, const char* key) {
    if (!j.contains(key)) throw SchemaError(std::string("checkpoint is missing '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("checkpoint field '") + key + "': " + e.what());
    }
}

} // namespace

std::string checkpoint_to_json(const Checkpoint& c) {
    const auto& k = c.params.kernel;
    const auto& b = c.params.background;
    json j;
    j["format"] = "nshawkes-checkpoint";
    j["version"] = kCheckpointVersion;
    j["architecture"] = {{"components", c.config.components},
                         {"hidden", c.config.hidden},
                         {"focus_bound", k.focus_bound()}};
    j["hyperparameters"] = {{"ellipse_area", k.ellipse_area}, {"bandwidth", b.bandwidth}};
    j["kernel"] = {{"log_magnitude", k.log_magnitude},
                   {"log_time_scale", k.log_time_scale},
                   {"log_cov_scale", k.log_cov_scale},
                   {"magnitude", k.magnitude()},
                   {"time_scale", k.time_scale()},
                   {"cov_scale", k.cov_scale()}};
    j["background"] = {{"log_base_rate", b.log_base_rate},
                       {"base_rate", b.base_rate()},
                       {"gamma", b.gamma}};
    j["covariates"] = {{"names", c.stats.names}, {"mean", c.stats.mean}, {"sd", c.stats.sd}};
    j["domain"] = {c.domain.min_x, c.domain.min_y, c.domain.max_x, c.domain.max_y};
    j["time_origin"] = c.time_origin;
    j["horizon"] = c.horizon;
    j["networks"] = net_json(k.nets);
    return j.dump(2) + "\n";
}

Checkpoint checkpoint_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    if (field<std::string>(j, "format") != "nshawkes-checkpoint") {
        throw SchemaError("not a model checkpoint");
    }
    const int version = field<int>(j, "version");
    if (version != kCheckpointVersion) {
        throw SchemaError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint c;
    const json arch = field<json>(j, "architecture");
    const json hyper = field<json>(j, "hyperparameters");
    c.config.components = field<int>(arch, "components");
    c.config.hidden = field<int>(arch, "hidden");
    c.config.focus_bound = field<double>(arch, "focus_bound");
    c.config.ellipse_area = field<double>(hyper, "ellipse_area");
    c.config.bandwidth = field<double>(hyper, "bandwidth");

    const auto box = field<std::vector<double>>(j, "domain");
    if (box.size() != 4) throw SchemaError("checkpoint domain must have four numbers");
    c.domain = {box[0], box[1], box[2], box[3]};
    c.time_origin = field<std::string>(j, "time_origin");
    c.horizon = field<double>(j, "horizon");

    const json cov = field<json>(j, "covariates");
    c.stats.names = field<std::vector<std::string>>(cov, "names");
    c.stats.mean = field<std::vector<double>>(cov, "mean");
    c.stats.sd = field<std::vector<double>>(cov, "sd");

    auto& k = c.params.kernel;
    const json kj = field<json>(j, "kernel");
    k.log_magnitude = field<double>(kj, "log_magnitude");
    k.log_time_scale = field<double>(kj, "log_time_scale");
    k.log_cov_scale = field<double>(kj, "log_cov_scale");
    k.ellipse_area = c.config.ellipse_area;

    auto& b = c.params.background;
    const json bj = field<json>(j, "background");
    b.log_base_rate = field<double>(bj, "log_base_rate");
    b.gamma = field<std::vector<double>>(bj, "gamma");
    b.bandwidth = c.config.bandwidth;
    if (b.gamma.size() != c.stats.names.size() || c.stats.mean.size() != c.stats.names.size() ||
        c.stats.sd.size() != c.stats.names.size()) {
        throw SchemaError("checkpoint covariate arrays disagree in length");
    }

    k.nets = neural::FeatureNet(c.config.components, c.config.hidden, c.config.focus_bound,
                                c.domain);
    const json nets = field<json>(j, "networks");
    if (!nets.is_array() || nets.size() != static_cast<std::size_t>(c.config.components)) {
        throw SchemaError("checkpoint network count does not match the architecture");
    }
    const auto l = k.nets.layout();
    auto p = k.nets.parameters();
    const std::pair<const char*, std::pair<std::size_t, std::size_t>> blocks[] = {
        {"W1", {l.w1, l.b1}}, {"b1", {l.b1, l.w2}}, {"W2", {l.w2, l.b2}},
        {"b2", {l.b2, l.w3}}, {"W3", {l.w3, l.b3}}, {"b3", {l.b3, l.size}}};
    for (std::size_t r = 0; r < nets.size(); ++r) {
        for (const auto& [name, range] : blocks) {
            const auto values = field<std::vector<double>>(nets[r], name);
            if (values.size() != range.second - range.first) {
                throw SchemaError("network " + std::to_string(r) + " block " + name +
                                  " has the wrong size");
            }
            std::copy(values.begin(), values.end(),
                      p.begin() + static_cast<std::ptrdiff_t>(r * l.size + range.first));
        }
    }
    return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint " + path.string());
    out << checkpoint_to_json(checkpoint);
    if (!out) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_json(ss.str());
}

} // namespace nshawkes
