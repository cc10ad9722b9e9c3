#pragma once

#include "rgdet/bev_splat.hpp"
#include "rgdet/box_loss.hpp"
#include "rgdet/feature_agg.hpp"
#include "rgdet/pointcloud.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rgdet {

/// Every tunable of the command-line tools.
struct RunConfig {
    // encoder
    double radius = 0.32;
    std::size_t channels = 64;
    std::size_t c_raw = 4;
    std::size_t heads = 1;
    bool lfa_bias = true;
    double min_scale = 1e-3;
    std::uint64_t weight_seed = 0;

    // BEV grid
    BevRange range = vod_range();

    // rasterizer
    RasterConfig raster{};

    // synthetic scenes
    std::uint64_t scene_seed = 0;
    std::size_t n_points = 1000;
    std::size_t n_clusters = 50;
    double cluster_sigma = 0.5;
    double z_min = -3.0;
    double z_max = 2.0;

    // box loss
    BglConfig bgl{};

    // runtime
    unsigned threads = 0;
    std::size_t mem_cap_mb = 1024;

    bool operator==(const RunConfig&) const = default;
};

/// Sets one key from its text value. "preset" accepts vod | tj4d and
/// overwrites the BEV range keys. Throws UnknownKey / InvalidValue (usage).
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);

/// "key = value" lines; '#' starts a comment. Later lines win.
void apply_config_text(RunConfig& cfg, const std::string& text);
RunConfig load_config_file(const std::string& path);

/// Every key, one per line, in a form apply_config_text reads back exactly.
std::string dump_config(const RunConfig& cfg);

/// Range and cross-field checks. Throws InvalidValue.
void validate_config(const RunConfig& cfg);

PgeDims pge_dims(const RunConfig& cfg);
EncodeOptions encode_options(const RunConfig& cfg);
SceneSpec scene_spec(const RunConfig& cfg);

/// Locale-independent "%.9g".
std::string fmt9(double v);

} // namespace rgdet
