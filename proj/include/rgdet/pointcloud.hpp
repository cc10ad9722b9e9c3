#pragma once

#include "rgdet/geom.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace rgdet {

struct RadarPoint {
    Vec3 position{};
    std::vector<double> raw_features;

    bool operator==(const RadarPoint&) const = default;
};

/// Ordered point list. Order matters: it is the blend tie-break downstream.
class PointCloud {
public:
    PointCloud() = default;
    explicit PointCloud(std::size_t c_raw) : c_raw_(c_raw) {}
    PointCloud(std::size_t c_raw, std::vector<RadarPoint> points);

    /// Throws ShapeMismatch if the point's channel count differs from c_raw.
    void push_back(RadarPoint p);

    std::size_t size() const { return points_.size(); }
    bool empty() const { return points_.empty(); }
    std::size_t c_raw() const { return c_raw_; }
    const RadarPoint& operator[](std::size_t i) const { return points_[i]; }
    const std::vector<RadarPoint>& points() const { return points_; }

    bool operator==(const PointCloud&) const = default;

private:
    std::size_t c_raw_ = 0;
    std::vector<RadarPoint> points_;
};

/// Metric BEV window and its pixel resolution. x maps to columns, y to rows.
struct BevRange {
    double x_min = 0.0;
    double x_max = 51.2;
    double y_min = -25.6;
    double y_max = 25.6;
    int h = 320;
    int w = 320;

    /// Throws InvalidRange.
    void validate() const;
    /// Boundary points count as inside.
    bool contains(double x, double y) const {
        return x >= x_min && x <= x_max && y >= y_min && y <= y_max;
    }
    bool operator==(const BevRange&) const = default;
};

/// 320x320 over [0, 51.2] x [-25.6, 25.6].
BevRange vod_range();
/// 0.16 m pixels over [0, 69.12] x [-39.68, 39.68]: w = 432 columns, h = 496 rows.
BevRange tj4d_range();

struct SceneSpec {
    std::uint64_t seed = 0;
    std::size_t n_points = 1000;
    std::size_t c_raw = 4;
    std::size_t n_clusters = 50;
    double cluster_sigma = 0.5;
    BevRange range = vod_range();
    double z_min = -3.0;
    double z_max = 2.0;
};

/// Deterministic clustered scene. With rng = Rng(seed):
///   1. for each cluster k: cx = uniform(x_min, x_max), cy = uniform(y_min, y_max),
///      cz = uniform(z_min, z_max)
///   2. for each point: k = min(floor(uniform() * n_clusters), n_clusters - 1);
///      x, y, z = c + cluster_sigma * normal() (in that order), each clamped into
///      its range; then c_raw features, each normal().
/// Throws InvalidSpec.
PointCloud generate_scene(const SceneSpec& spec);

/// CSV: "# c_raw=<k>" then "x,y,z,f0,...". Values use 17 significant digits.
void write_cloud_csv(const PointCloud& cloud, const std::filesystem::path& path);
/// Binary: "RGPC", u32 version=1, u32 N, u32 c_raw, N*(3+c_raw) little-endian f64.
void write_cloud_binary(const PointCloud& cloud, const std::filesystem::path& path);
/// Chooses the format from the leading magic bytes. Throws IoError, FormatError.
PointCloud read_cloud(const std::filesystem::path& path);
/// Binary if the extension is ".rgpc", CSV otherwise.
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path);

} // namespace rgdet
