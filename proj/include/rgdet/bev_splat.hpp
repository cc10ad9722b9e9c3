#pragma once

#include "rgdet/feature_agg.hpp"
#include "rgdet/geom.hpp"
#include "rgdet/pointcloud.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rgdet {

enum class BlendOrder { ZAscending, ZDescending, Index };

BlendOrder parse_blend_order(const std::string& s);  // "z-asc" | "z-desc" | "index"
std::string to_string(BlendOrder order);

struct BlendKey {
    double z = 0.0;
    std::size_t source_index = 0;
};

/// Screen-space Gaussian in pixel units.
struct Splat2D {
    Vec2 mean2d{};
    Mat2 cov2d{};
    Mat2 cov2d_inv{};
    std::vector<double> features;
    double opacity = 1.0;
    BlendKey key{};
};

struct RasterConfig {
    int tile_size = 16;
    double alpha_max = 0.99;
    double alpha_min = 1.0 / 255.0;
    /// Early-stop transmittance; 0 disables early termination.
    double t_min = 1e-4;
    /// Low-pass term added to the cov2d diagonal, pixels^2.
    double blur = 0.3;
    BlendOrder order = BlendOrder::ZAscending;

    void validate() const;
    bool operator==(const RasterConfig&) const = default;
};

/// C x H x W, channel-major then row-major.
struct BevFeatureMap {
    std::size_t channels = 0;
    BevRange range{};
    std::vector<float> data;

    BevFeatureMap() = default;
    BevFeatureMap(std::size_t c, const BevRange& r)
        : channels(c), range(r), data(c * static_cast<std::size_t>(r.h) * static_cast<std::size_t>(r.w), 0.0f) {}

    float& at(std::size_t c, int row, int col) {
        return data[(c * range.h + static_cast<std::size_t>(row)) * range.w + static_cast<std::size_t>(col)];
    }
    float at(std::size_t c, int row, int col) const {
        return data[(c * range.h + static_cast<std::size_t>(row)) * range.w + static_cast<std::size_t>(col)];
    }
    bool operator==(const BevFeatureMap&) const = default;
};

/// [[W / (x_max - x_min), 0, 0], [0, H / (y_max - y_min), 0]]
Mat2x3 bev_projection(const BevRange& range);

/// mean2d = M (mu - (x_min, y_min, 0)); cov2d = M Sigma M^T + blur * I.
/// Throws SingularCovariance.
Splat2D project_to_bev(const GaussianPrimitive3D& g, std::size_t source_index, const BevRange& range,
                       double blur = 0.3);

struct TileGrid {
    int tile_size = 16;
    int tiles_x = 0;
    int tiles_y = 0;
    /// Splat indices per tile (row-major over tiles), in blend order.
    std::vector<std::vector<std::uint32_t>> tiles;
};

/// Half extents (pixels) of the axis-aligned box enclosing every pixel where
/// the splat's alpha reaches alpha_min: k * sqrt(diag(cov2d)) with
/// k^2 = 2 ln(opacity / alpha_min). Returns {-1, -1} when opacity < alpha_min.
Vec2 splat_extent(const Splat2D& s, double alpha_min);

/// Indices sorted by blend key for the configured order.
std::vector<std::uint32_t> blend_sequence(const std::vector<Splat2D>& splats, BlendOrder order);

TileGrid build_tile_grid(const std::vector<Splat2D>& splats, const BevRange& range, const RasterConfig& cfg);

/// Tiled front-to-back blending with 32-bit accumulation. Pixel (row, col)
/// is sampled at (col + 0.5, row + 0.5).
BevFeatureMap rasterize(const std::vector<Splat2D>& splats, const BevRange& range, const RasterConfig& cfg = {});

/// Brute force in 64-bit: every splat at every pixel, no tiles and no early
/// stop. Returns doubles in the same layout as BevFeatureMap::data.
std::vector<double> rasterize_oracle(const std::vector<Splat2D>& splats, const BevRange& range,
                                     const RasterConfig& cfg = {});

struct EncodeOptions {
    double radius = 0.32;
    RasterConfig raster{};
    AttributeOptions attributes{};
};

std::vector<GaussianPrimitive3D> encode_primitives(const PointCloud& cloud, const PgeParams& params,
                                                   const EncodeOptions& opts = {});
/// Point cloud -> LFA and GFA -> Gaussian attributes -> BEV projection -> rasterize.
BevFeatureMap encode(const PointCloud& cloud, const PgeParams& params, const BevRange& range,
                     const EncodeOptions& opts = {});

/// Pixels where any channel is nonzero.
std::size_t count_nonzero_pixels(const BevFeatureMap& map);
/// Distinct pixels hit by one-pixel-per-point scatter of in-range points.
std::size_t pillar_occupancy(const PointCloud& cloud, const BevRange& range);

/// RGFM: "RGFM", u32 version=1, u32 C, u32 H, u32 W, f64 x_min, x_max, y_min, y_max,
/// then C*H*W little-endian f32.
void write_feature_map(const BevFeatureMap& map, const std::filesystem::path& path);
BevFeatureMap read_feature_map(const std::filesystem::path& path);
/// Binary PGM (P5) of one channel, min-max normalised to 0..255.
void write_pgm(const BevFeatureMap& map, std::size_t channel, const std::filesystem::path& path);

} // namespace rgdet
