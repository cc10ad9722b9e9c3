#include "rgdet/config.hpp"

#include "rgdet/error.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace rgdet {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

Error invalid(const std::string& key, const std::string& value) {
    return usage_error("InvalidValue", "bad value '" + value + "' for key '" + key + "'");
}

double to_double(const std::string& key, const std::string& v) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) throw invalid(key, v);
    return out;
}

template <typename T>
T to_uint(const std::string& key, const std::string& v) {
    T out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) throw invalid(key, v);
    return out;
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw invalid(key, v);
}

/// Shortest text that parses back to the same double.
std::string exact(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

struct Field {
    const char* key;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define RG_DOUBLE(name, member)                                                            \
    Field {                                                                                \
        name, [](RunConfig& c, const std::string& v) { c.member = to_double(name, v); },   \
            [](const RunConfig& c) { return exact(c.member); }                             \
    }
#define RG_UINT(name, member, type)                                                         \
    Field {                                                                                 \
        name, [](RunConfig& c, const std::string& v) { c.member = to_uint<type>(name, v); }, \
            [](const RunConfig& c) { return std::to_string(c.member); }                     \
    }

const std::vector<Field>& fields() {
    static const std::vector<Field> table = {
        RG_DOUBLE("radius", radius),
        RG_UINT("channels", channels, std::size_t),
        RG_UINT("c_raw", c_raw, std::size_t),
        RG_UINT("heads", heads, std::size_t),
        Field{"lfa_bias", [](RunConfig& c, const std::string& v) { c.lfa_bias = to_bool("lfa_bias", v); },
              [](const RunConfig& c) { return std::string(c.lfa_bias ? "true" : "false"); }},
        RG_DOUBLE("min_scale", min_scale),
        RG_UINT("weight_seed", weight_seed, std::uint64_t),
        RG_DOUBLE("x_min", range.x_min),
        RG_DOUBLE("x_max", range.x_max),
        RG_DOUBLE("y_min", range.y_min),
        RG_DOUBLE("y_max", range.y_max),
        RG_UINT("height", range.h, int),
        RG_UINT("width", range.w, int),
        RG_UINT("tile_size", raster.tile_size, int),
        RG_DOUBLE("alpha_max", raster.alpha_max),
        RG_DOUBLE("alpha_min", raster.alpha_min),
        RG_DOUBLE("t_min", raster.t_min),
        RG_DOUBLE("blur", raster.blur),
        Field{"blend_order", [](RunConfig& c, const std::string& v) { c.raster.order = parse_blend_order(v); },
              [](const RunConfig& c) { return to_string(c.raster.order); }},
        RG_UINT("scene_seed", scene_seed, std::uint64_t),
        RG_UINT("n_points", n_points, std::size_t),
        RG_UINT("n_clusters", n_clusters, std::size_t),
        RG_DOUBLE("cluster_sigma", cluster_sigma),
        RG_DOUBLE("z_min", z_min),
        RG_DOUBLE("z_max", z_max),
        Field{"bgl_a_car", [](RunConfig& c, const std::string& v) { c.bgl.a_per_class["car"] = to_double("bgl_a_car", v); },
              [](const RunConfig& c) { return exact(c.bgl.a_for("car")); }},
        Field{"bgl_a_truck",
              [](RunConfig& c, const std::string& v) { c.bgl.a_per_class["truck"] = to_double("bgl_a_truck", v); },
              [](const RunConfig& c) { return exact(c.bgl.a_for("truck")); }},
        Field{"bgl_a_pedestrian",
              [](RunConfig& c, const std::string& v) {
                  c.bgl.a_per_class["pedestrian"] = to_double("bgl_a_pedestrian", v);
              },
              [](const RunConfig& c) { return exact(c.bgl.a_for("pedestrian")); }},
        Field{"bgl_a_cyclist",
              [](RunConfig& c, const std::string& v) { c.bgl.a_per_class["cyclist"] = to_double("bgl_a_cyclist", v); },
              [](const RunConfig& c) { return exact(c.bgl.a_for("cyclist")); }},
        RG_DOUBLE("bgl_a_default", bgl.default_a),
        RG_DOUBLE("bgl_lambda", bgl.lambda),
        RG_UINT("threads", threads, unsigned),
        RG_UINT("mem_cap_mb", mem_cap_mb, std::size_t),
    };
    return table;
}

#undef RG_DOUBLE
#undef RG_UINT

} // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "preset") {
        if (value == "vod") {
            cfg.range = vod_range();
        } else if (value == "tj4d") {
            cfg.range = tj4d_range();
        } else {
            throw invalid(key, value);
        }
        return;
    }
    for (const auto& f : fields()) {
        if (key == f.key) {
            f.set(cfg, value);
            return;
        }
    }
    throw usage_error("UnknownKey", "unknown config key '" + key + "'");
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
    std::istringstream is(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(is, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw usage_error("InvalidValue", "config line " + std::to_string(line_no) + " is not 'key = value'");
        }
        set_config_value(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw data_error("IoError", "cannot open config " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    RunConfig cfg;
    apply_config_text(cfg, ss.str());
    return cfg;
}

std::string dump_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& f : fields()) out += std::string(f.key) + " = " + f.get(cfg) + "\n";
    return out;
}

void validate_config(const RunConfig& cfg) {
    auto fail = [](const std::string& what) { throw usage_error("InvalidValue", what); };
    if (!(cfg.radius > 0.0)) fail("radius must be > 0");
    if (cfg.channels == 0 || cfg.c_raw == 0) fail("channels and c_raw must be >= 1");
    if (cfg.heads == 0 || cfg.channels % cfg.heads != 0) fail("channels must be divisible by heads");
    if (!(cfg.min_scale > 0.0)) fail("min_scale must be > 0");
    if (!(cfg.cluster_sigma >= 0.0)) fail("cluster_sigma must be >= 0");
    if (!(cfg.z_max >= cfg.z_min)) fail("z_max must be >= z_min");
    if (cfg.mem_cap_mb == 0) fail("mem_cap_mb must be >= 1");
    cfg.range.validate();
    cfg.raster.validate();
    cfg.bgl.validate();
}

PgeDims pge_dims(const RunConfig& cfg) { return {cfg.c_raw, cfg.channels, cfg.heads, cfg.lfa_bias}; }

EncodeOptions encode_options(const RunConfig& cfg) {
    EncodeOptions o;
    o.radius = cfg.radius;
    o.raster = cfg.raster;
    o.attributes.min_scale = cfg.min_scale;
    return o;
}

SceneSpec scene_spec(const RunConfig& cfg) {
    SceneSpec s;
    s.seed = cfg.scene_seed;
    s.n_points = cfg.n_points;
    s.c_raw = cfg.c_raw;
    s.n_clusters = cfg.n_clusters;
    s.cluster_sigma = cfg.cluster_sigma;
    s.range = cfg.range;
    s.z_min = cfg.z_min;
    s.z_max = cfg.z_max;
    return s;
}

std::string fmt9(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 9);
    return std::string(buf, res.ptr);
}

} // namespace rgdet
