#pragma once

#include "rgdet/geom.hpp"
#include "rgdet/layers.hpp"
#include "rgdet/pointcloud.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace rgdet {

/// Neighborhood predicate shared by every LFA path: ||a - b||_2 < r.
inline bool within_radius(const Vec3& a, const Vec3& b, double r) {
    const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
    return std::sqrt(dx * dx + dy * dy + dz * dz) < r;
}

/// (center, neighbor) pairs within the radius, sorted by (row, col).
/// Self pairs are always present.
struct NeighborIndex {
    std::vector<std::uint32_t> row_idx;
    std::vector<std::uint32_t> col_idx;

    std::size_t size() const { return row_idx.size(); }
};

/// Uniform-grid radius search, then the exact predicate per candidate.
NeighborIndex build_neighbor_index(const PointCloud& cloud, double r);

/// Local aggregation: row i = mean over neighbors j of
/// layer(concat(f_j, p_i - p_j)). The offset is center minus neighbor.
/// Reference version: for every center, scan every point.
Matrix lfa_traversal(const PointCloud& cloud, const LinearLayer& layer, double r);

/// Dense version. Builds the N x N mask and the N x N x (c_raw + 3) broadcast
/// tensor, takes the masked mean along the neighbor axis, then projects
/// (the layer is affine so projecting the mean equals averaging projections).
/// Throws AllocationLimit if the dense buffers exceed mem_cap_bytes.
Matrix lfa_broadcast_mask(const PointCloud& cloud, const LinearLayer& layer, double r,
                          std::size_t mem_cap_bytes = std::size_t{1} << 30);

/// Pair-list version: gather (pairs x (c_raw + 3)), project per pair,
/// segment-mean by center index.
Matrix lfa_index_scatter(const PointCloud& cloud, const LinearLayer& layer, double r);

/// Bytes of the dominant transient buffers for each implementation.
std::size_t lfa_broadcast_mask_bytes(std::size_t n, std::size_t c_raw);
std::size_t lfa_index_scatter_bytes(std::size_t n, std::size_t pairs, std::size_t c_raw, std::size_t c_out);
std::size_t lfa_traversal_bytes(std::size_t c_raw, std::size_t c_out);

/// Global aggregation through one attention block; output is N x C.
Matrix gfa(const PointCloud& cloud, const AttentionBlock& block);

struct GaussianPrimitive3D {
    Vec3 mean{};
    Vec3 scales{};
    Quaternion quat{};
    double opacity = 1.0;
    std::vector<double> features;
};

struct AttributeOptions {
    /// Scales are softplus(raw) + min_scale, in meters.
    double min_scale = 1e-3;
};

/// head(concat(f, f_lfa, f_gfa)) split into [3 scales | 4 quat | C features].
/// Means are the point positions and opacity is 1.
/// Throws ShapeMismatch, DegenerateQuaternion.
std::vector<GaussianPrimitive3D> predict_attributes(const PointCloud& cloud, const Matrix& f_lfa,
                                                    const Matrix& f_gfa, const LinearLayer& head,
                                                    const AttributeOptions& opts = {});

struct PgeDims {
    std::size_t c_raw = 4;
    std::size_t channels = 64;
    std::size_t heads = 1;
    bool lfa_bias = true;
};

/// Every learnable tensor of the encoder.
struct PgeParams {
    LinearLayer lfa;        // (c_raw + 3) -> C
    AttentionBlock gfa;
    LinearLayer head;       // (c_raw + 2C) -> (7 + C)

    std::size_t c_raw() const { return gfa.in_dim(); }
    std::size_t channels() const { return gfa.model_dim(); }
    void validate() const;

    bool operator==(const PgeParams&) const = default;
};

/// Weights and biases drawn from Rng(seed) as uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)),
/// tensors in this order, each weight row-major then its bias:
///   lfa, gfa.input, gfa.qkv, gfa.out, gfa.ffn_in, gfa.ffn_out, head.
/// LayerNorm gamma = 1, beta = 0, eps = 1e-5. FFN hidden width is 2C.
PgeParams init_weights(std::uint64_t seed, const PgeDims& dims = {});

/// RGWT: "RGWT", u32 version=1, u32 tensor count, then per tensor
/// u32 name length, name bytes, u32 rank, u32 dims[rank], f64 payload;
/// finally a u64 FNV-1a digest of every preceding byte.
void save_weights(const PgeParams& params, const std::filesystem::path& path);
/// Throws IoError, FormatError (bad magic, digest mismatch, missing tensor), ShapeMismatch.
PgeParams load_weights(const std::filesystem::path& path);

} // namespace rgdet
