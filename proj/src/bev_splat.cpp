#include "rgdet/bev_splat.hpp"

#include "rgdet/binary_io.hpp"
#include "rgdet/error.hpp"
#include "rgdet/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

namespace rgdet {

BlendOrder parse_blend_order(const std::string& s) {
    if (s == "z-asc") return BlendOrder::ZAscending;
    if (s == "z-desc") return BlendOrder::ZDescending;
    if (s == "index") return BlendOrder::Index;
    throw usage_error("InvalidOption", "blend order must be z-asc, z-desc or index, got '" + s + "'");
}

std::string to_string(BlendOrder order) {
    switch (order) {
    case BlendOrder::ZAscending: return "z-asc";
    case BlendOrder::ZDescending: return "z-desc";
    case BlendOrder::Index: return "index";
    }
    return "z-asc";
}

void RasterConfig::validate() const {
    if (tile_size < 1) throw usage_error("InvalidOption", "tile_size must be >= 1");
    if (!(alpha_max > 0.0 && alpha_max < 1.0)) throw usage_error("InvalidOption", "alpha_max must be in (0, 1)");
    if (!(alpha_min > 0.0 && alpha_min <= alpha_max)) throw usage_error("InvalidOption", "alpha_min must be in (0, alpha_max]");
    if (!(t_min >= 0.0 && t_min < 1.0)) throw usage_error("InvalidOption", "t_min must be in [0, 1)");
    if (!(blur >= 0.0)) throw usage_error("InvalidOption", "blur must be >= 0");
}

Mat2x3 bev_projection(const BevRange& range) {
    range.validate();
    Mat2x3 m;
    m(0, 0) = static_cast<double>(range.w) / (range.x_max - range.x_min);
    m(1, 1) = static_cast<double>(range.h) / (range.y_max - range.y_min);
    return m;
}

Splat2D project_to_bev(const GaussianPrimitive3D& g, std::size_t source_index, const BevRange& range, double blur) {
    const Mat2x3 m = bev_projection(range);
    const Mat3 sigma = covariance_from_scale_rot(g.scales, quat_to_rotmat(g.quat));

    Splat2D s;
    s.mean2d = m * Vec3{g.mean[0] - range.x_min, g.mean[1] - range.y_min, g.mean[2]};
    s.cov2d = project_covariance(m, sigma);
    s.cov2d(0, 0) += blur;
    s.cov2d(1, 1) += blur;
    try {
        s.cov2d_inv = mat2_inverse(s.cov2d);
    } catch (const Error&) {
        throw numerical_error("SingularCovariance", "projected covariance of splat " + std::to_string(source_index) +
                                                        " is not invertible");
    }
    s.features = g.features;
    s.opacity = g.opacity;
    s.key = {g.mean[2], source_index};
    return s;
}

Vec2 splat_extent(const Splat2D& s, double alpha_min) {
    if (!(s.opacity >= alpha_min)) return {-1.0, -1.0};
    const double k = std::sqrt(2.0 * std::log(s.opacity / alpha_min));
    return {k * std::sqrt(s.cov2d(0, 0)), k * std::sqrt(s.cov2d(1, 1))};
}

std::vector<std::uint32_t> blend_sequence(const std::vector<Splat2D>& splats, BlendOrder order) {
    std::vector<std::uint32_t> seq(splats.size());
    std::iota(seq.begin(), seq.end(), 0u);
    auto by_index = [&](std::uint32_t a, std::uint32_t b) { return splats[a].key.source_index < splats[b].key.source_index; };
    switch (order) {
    case BlendOrder::ZAscending:
        std::sort(seq.begin(), seq.end(), [&](std::uint32_t a, std::uint32_t b) {
            if (splats[a].key.z != splats[b].key.z) return splats[a].key.z < splats[b].key.z;
            return by_index(a, b);
        });
        break;
    case BlendOrder::ZDescending:
        std::sort(seq.begin(), seq.end(), [&](std::uint32_t a, std::uint32_t b) {
            if (splats[a].key.z != splats[b].key.z) return splats[a].key.z > splats[b].key.z;
            return by_index(a, b);
        });
        break;
    case BlendOrder::Index:
        std::sort(seq.begin(), seq.end(), by_index);
        break;
    }
    return seq;
}

TileGrid build_tile_grid(const std::vector<Splat2D>& splats, const BevRange& range, const RasterConfig& cfg) {
    range.validate();
    cfg.validate();
    TileGrid grid;
    grid.tile_size = cfg.tile_size;
    grid.tiles_x = (range.w + cfg.tile_size - 1) / cfg.tile_size;
    grid.tiles_y = (range.h + cfg.tile_size - 1) / cfg.tile_size;
    grid.tiles.resize(static_cast<std::size_t>(grid.tiles_x) * grid.tiles_y);

    const double ts = cfg.tile_size;
    for (std::uint32_t idx : blend_sequence(splats, cfg.order)) {
        const Splat2D& s = splats[idx];
        const Vec2 ext = splat_extent(s, cfg.alpha_min);
        if (ext[0] < 0.0) continue;
        const double tx_lo = std::floor((s.mean2d[0] - ext[0]) / ts);
        const double tx_hi = std::floor((s.mean2d[0] + ext[0]) / ts);
        const double ty_lo = std::floor((s.mean2d[1] - ext[1]) / ts);
        const double ty_hi = std::floor((s.mean2d[1] + ext[1]) / ts);
        if (!(tx_hi >= 0.0 && ty_hi >= 0.0 && tx_lo < grid.tiles_x && ty_lo < grid.tiles_y)) continue;
        const int x0 = static_cast<int>(std::max(tx_lo, 0.0));
        const int x1 = static_cast<int>(std::min<double>(tx_hi, grid.tiles_x - 1));
        const int y0 = static_cast<int>(std::max(ty_lo, 0.0));
        const int y1 = static_cast<int>(std::min<double>(ty_hi, grid.tiles_y - 1));
        for (int ty = y0; ty <= y1; ++ty)
            for (int tx = x0; tx <= x1; ++tx) grid.tiles[static_cast<std::size_t>(ty) * grid.tiles_x + tx].push_back(idx);
    }
    return grid;
}

namespace {

/// Clamped alpha at a pixel centre, or 0 when below alpha_min.
double splat_alpha(const Splat2D& s, double px, double py, const RasterConfig& cfg) {
    const double dx = px - s.mean2d[0];
    const double dy = py - s.mean2d[1];
    const Mat2& inv = s.cov2d_inv;
    const double power = -0.5 * (inv(0, 0) * dx * dx + 2.0 * inv(0, 1) * dx * dy + inv(1, 1) * dy * dy);
    const double alpha = std::min(cfg.alpha_max, s.opacity * std::exp(power));
    return alpha < cfg.alpha_min ? 0.0 : alpha;
}

std::size_t channel_count(const std::vector<Splat2D>& splats) {
    const std::size_t c = splats.empty() ? 0 : splats.front().features.size();
    for (const auto& s : splats)
        if (s.features.size() != c) throw data_error("ShapeMismatch", "splats disagree on feature length");
    return c;
}

} // namespace

BevFeatureMap rasterize(const std::vector<Splat2D>& splats, const BevRange& range, const RasterConfig& cfg) {
    const std::size_t c = channel_count(splats);
    const TileGrid grid = build_tile_grid(splats, range, cfg);
    BevFeatureMap map(c, range);
    if (c == 0) return map;

    std::vector<float> features(splats.size() * c);
    for (std::size_t i = 0; i < splats.size(); ++i)
        for (std::size_t k = 0; k < c; ++k) features[i * c + k] = static_cast<float>(splats[i].features[k]);

    const float t_min = static_cast<float>(cfg.t_min);
    parallel_for(grid.tiles.size(), [&](std::size_t begin, std::size_t end) {
        std::vector<float> acc(c);
        for (std::size_t t = begin; t < end; ++t) {
            const auto& list = grid.tiles[t];
            if (list.empty()) continue;
            const int tx = static_cast<int>(t % grid.tiles_x), ty = static_cast<int>(t / grid.tiles_x);
            const int col_end = std::min(range.w, (tx + 1) * grid.tile_size);
            const int row_end = std::min(range.h, (ty + 1) * grid.tile_size);
            for (int row = ty * grid.tile_size; row < row_end; ++row) {
                for (int col = tx * grid.tile_size; col < col_end; ++col) {
                    std::fill(acc.begin(), acc.end(), 0.0f);
                    float transmittance = 1.0f;
                    for (std::uint32_t idx : list) {
                        const double alpha = splat_alpha(splats[idx], col + 0.5, row + 0.5, cfg);
                        if (alpha == 0.0) continue;
                        const float a = static_cast<float>(alpha);
                        const float weight = a * transmittance;
                        const float* f = features.data() + static_cast<std::size_t>(idx) * c;
                        for (std::size_t k = 0; k < c; ++k) acc[k] += f[k] * weight;
                        transmittance *= 1.0f - a;
                        if (transmittance < t_min) break;
                    }
                    for (std::size_t k = 0; k < c; ++k) map.at(k, row, col) = acc[k];
                }
            }
        }
    });
    return map;
}

std::vector<double> rasterize_oracle(const std::vector<Splat2D>& splats, const BevRange& range, const RasterConfig& cfg) {
    range.validate();
    cfg.validate();
    const std::size_t c = channel_count(splats);
    const std::size_t hw = static_cast<std::size_t>(range.h) * range.w;
    std::vector<double> out(c * hw, 0.0);
    const auto seq = blend_sequence(splats, cfg.order);
    for (int row = 0; row < range.h; ++row) {
        for (int col = 0; col < range.w; ++col) {
            double transmittance = 1.0;
            const std::size_t pix = static_cast<std::size_t>(row) * range.w + col;
            for (std::uint32_t idx : seq) {
                const double alpha = splat_alpha(splats[idx], col + 0.5, row + 0.5, cfg);
                if (alpha == 0.0) continue;
                for (std::size_t k = 0; k < c; ++k) out[k * hw + pix] += splats[idx].features[k] * alpha * transmittance;
                transmittance *= 1.0 - alpha;
            }
        }
    }
    return out;
}

std::vector<GaussianPrimitive3D> encode_primitives(const PointCloud& cloud, const PgeParams& params,
                                                   const EncodeOptions& opts) {
    params.validate();
    const Matrix f_lfa = lfa_index_scatter(cloud, params.lfa, opts.radius);
    const Matrix f_gfa = gfa(cloud, params.gfa);
    return predict_attributes(cloud, f_lfa, f_gfa, params.head, opts.attributes);
}

BevFeatureMap encode(const PointCloud& cloud, const PgeParams& params, const BevRange& range, const EncodeOptions& opts) {
    range.validate();
    opts.raster.validate();
    if (cloud.empty()) {
        params.validate();
        return BevFeatureMap(params.channels(), range);
    }
    const auto prims = encode_primitives(cloud, params, opts);
    std::vector<Splat2D> splats(prims.size());
    parallel_for(prims.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) splats[i] = project_to_bev(prims[i], i, range, opts.raster.blur);
    });
    return rasterize(splats, range, opts.raster);
}

std::size_t count_nonzero_pixels(const BevFeatureMap& map) {
    const std::size_t hw = static_cast<std::size_t>(map.range.h) * map.range.w;
    std::size_t count = 0;
    for (std::size_t p = 0; p < hw; ++p)
        for (std::size_t k = 0; k < map.channels; ++k)
            if (map.data[k * hw + p] != 0.0f) {
                ++count;
                break;
            }
    return count;
}

std::size_t pillar_occupancy(const PointCloud& cloud, const BevRange& range) {
    const Mat2x3 m = bev_projection(range);
    std::set<std::pair<int, int>> hit;
    for (const auto& p : cloud.points()) {
        if (!range.contains(p.position[0], p.position[1])) continue;
        const int col = std::min(range.w - 1, static_cast<int>(std::floor(m(0, 0) * (p.position[0] - range.x_min))));
        const int row = std::min(range.h - 1, static_cast<int>(std::floor(m(1, 1) * (p.position[1] - range.y_min))));
        hit.emplace(row, col);
    }
    return hit.size();
}

void write_feature_map(const BevFeatureMap& map, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("IoError", "cannot write " + path.string());
    binio::put_magic(os, "RGFM");
    binio::put<std::uint32_t>(os, 1);
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(map.channels));
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(map.range.h));
    binio::put<std::uint32_t>(os, static_cast<std::uint32_t>(map.range.w));
    for (double v : {map.range.x_min, map.range.x_max, map.range.y_min, map.range.y_max}) binio::put(os, v);
    for (float v : map.data) binio::put(os, v);
    if (!os) throw data_error("IoError", "cannot write " + path.string());
}

BevFeatureMap read_feature_map(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw data_error("IoError", "cannot open " + path.string());
    if (!binio::has_magic(is, "RGFM")) throw data_error("FormatError", "bad magic, expected RGFM");
    if (binio::get<std::uint32_t>(is) != 1) throw data_error("FormatError", "unsupported RGFM version");
    const auto c = binio::get<std::uint32_t>(is);
    BevRange r;
    r.h = static_cast<int>(binio::get<std::uint32_t>(is));
    r.w = static_cast<int>(binio::get<std::uint32_t>(is));
    r.x_min = binio::get<double>(is);
    r.x_max = binio::get<double>(is);
    r.y_min = binio::get<double>(is);
    r.y_max = binio::get<double>(is);
    r.validate();
    BevFeatureMap map(c, r);
    for (auto& v : map.data) v = binio::get<float>(is);
    return map;
}

void write_pgm(const BevFeatureMap& map, std::size_t channel, const std::filesystem::path& path) {
    if (channel >= map.channels) throw usage_error("InvalidOption", "PGM channel out of range");
    const std::size_t hw = static_cast<std::size_t>(map.range.h) * map.range.w;
    const float* src = map.data.data() + channel * hw;
    const auto [lo, hi] = std::minmax_element(src, src + hw);
    const float span = *hi - *lo;
    std::ofstream os(path, std::ios::binary);
    if (!os) throw data_error("IoError", "cannot write " + path.string());
    os << "P5\n" << map.range.w << ' ' << map.range.h << "\n255\n";
    // Row 0 is y_min; flip so +y points up in the image.
    for (int row = map.range.h - 1; row >= 0; --row)
        for (int col = 0; col < map.range.w; ++col) {
            const float v = src[static_cast<std::size_t>(row) * map.range.w + col];
            const auto byte = static_cast<unsigned char>(span > 0.0f ? std::lround(255.0f * (v - *lo) / span) : 0);
            os.put(static_cast<char>(byte));
        }
    if (!os) throw data_error("IoError", "cannot write " + path.string());
}

} // namespace rgdet
