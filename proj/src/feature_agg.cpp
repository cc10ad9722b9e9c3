#include "rgdet/feature_agg.hpp"

#include "rgdet/error.hpp"
#include "rgdet/parallel.hpp"
#include "rgdet/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <string>
#include <limits>
#include <tuple>
#include <mutex>

namespace rgdet {

namespace {

void check_lfa_layer(const PointCloud& cloud, const LinearLayer& layer) {
    if (layer.in_dim() != cloud.c_raw() + 3) {
        throw data_error("ShapeMismatch", "LFA layer expects " + std::to_string(layer.in_dim()) +
                                              " inputs, cloud provides c_raw + 3 = " +
                                              std::to_string(cloud.c_raw() + 3));
    }
}

/// concat(f_neighbor, p_center - p_neighbor)
void gather_pair(const PointCloud& cloud, std::size_t center, std::size_t neighbor, std::span<double> out) {
    const auto& nb = cloud[neighbor];
    const auto& ct = cloud[center];
    std::copy(nb.raw_features.begin(), nb.raw_features.end(), out.begin());
    const std::size_t c = nb.raw_features.size();
    for (int k = 0; k < 3; ++k) out[c + k] = ct.position[k] - nb.position[k];
}

// Always inlined, so the AVX return-ABI note does not apply.
#pragma GCC diagnostic ignored "-Wpsabi"
using v4d = double __attribute__((vector_size(32)));

inline __attribute__((always_inline)) v4d load4(const double* p) {
    v4d v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

/// acc += sum over rows of (bias + W x_row), W given transposed (in x out).
/// Per output: bias, then inputs in order, then added to acc row by row.
__attribute__((target_clones("avx2", "default")))
void project_segment(const double* x, std::size_t rows, std::size_t in, std::size_t out, const double* wt,
                     const double* bias, double* acc) {
    const std::size_t blocked = out - out % 16;
    for (std::size_t r = 0; r < rows; ++r) {
        const double* xr = x + r * in;
        for (std::size_t ob = 0; ob < blocked; ob += 16) {
            v4d y0{}, y1{}, y2{}, y3{};
            if (bias) {
                y0 = load4(bias + ob);
                y1 = load4(bias + ob + 4);
                y2 = load4(bias + ob + 8);
                y3 = load4(bias + ob + 12);
            }
            for (std::size_t c = 0; c < in; ++c) {
                const double* w = wt + c * out + ob;
                const v4d xc = v4d{} + xr[c];
                y0 += load4(w) * xc;
                y1 += load4(w + 4) * xc;
                y2 += load4(w + 8) * xc;
                y3 += load4(w + 12) * xc;
            }
            double* a = acc + ob;
            const v4d s0 = load4(a) + y0, s1 = load4(a + 4) + y1, s2 = load4(a + 8) + y2, s3 = load4(a + 12) + y3;
            std::memcpy(a, &s0, sizeof s0);
            std::memcpy(a + 4, &s1, sizeof s1);
            std::memcpy(a + 8, &s2, sizeof s2);
            std::memcpy(a + 12, &s3, sizeof s3);
        }
        for (std::size_t o = blocked; o < out; ++o) {
            double y = bias ? bias[o] : 0.0;
            for (std::size_t c = 0; c < in; ++c) y += wt[c * out + o] * xr[c];
            acc[o] += y;
        }
    }
}

using Cell = std::array<std::int64_t, 3>;



NeighborIndex brute_force_index(const PointCloud& cloud, double r) {
    NeighborIndex idx;
    const std::size_t n = cloud.size();
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (within_radius(cloud[i].position, cloud[j].position, r)) {
                idx.row_idx.push_back(static_cast<std::uint32_t>(i));
                idx.col_idx.push_back(static_cast<std::uint32_t>(j));
            }
    return idx;
}

} // namespace

NeighborIndex build_neighbor_index(const PointCloud& cloud, double r) {
    if (!(r > 0.0)) throw usage_error("InvalidRadius", "radius must be > 0");
    const std::size_t n = cloud.size();
    if (n == 0) return {};

    Vec3 lo = cloud[0].position, hi = cloud[0].position;
    for (const auto& p : cloud.points())
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], p.position[k]);
            hi[k] = std::max(hi[k], p.position[k]);
        }
    // Slightly oversized cells so that rounding in the cell coordinate can
    // never push two in-radius points more than one cell apart.
    const double cell = r * (1.0 + 1e-9);
    for (int k = 0; k < 3; ++k)
        if ((hi[k] - lo[k]) / cell > 1e12) return brute_force_index(cloud, r);

    std::array<std::int64_t, 3> dims;
    for (int k = 0; k < 3; ++k) dims[k] = static_cast<std::int64_t>(std::floor((hi[k] - lo[k]) / cell)) + 1;
    if (static_cast<double>(dims[0]) * static_cast<double>(dims[1]) > 0x1p62) return brute_force_index(cloud, r);
    auto cell_of = [&](const Vec3& p) {
        Cell c;
        // p >= lo, so truncation is floor.
        for (int k = 0; k < 3; ++k) c[k] = static_cast<std::int64_t>((p[k] - lo[k]) / cell);
        return c;
    };

    struct Entry {
        std::int64_t column;
        std::int64_t cz;
        Vec3 pos;
        std::uint32_t id;
    };
    std::vector<Entry> unsorted(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Cell c = cell_of(cloud[i].position);
        unsorted[i] = {c[0] * dims[1] + c[1], c[2], cloud[i].position, static_cast<std::uint32_t>(i)};
    }

    // Columns folded into a power-of-two slot table (column mod size) and
    // entries counting-sorted by slot. Neighbouring y columns land in
    // neighbouring slots; scans compare the column key, so folding only
    // costs time.
    std::size_t n_slots = 16;
    while (n_slots < 2 * n) n_slots <<= 1;
    const std::size_t mask = n_slots - 1;
    auto slot_of = [&](std::int64_t column) { return static_cast<std::size_t>(column) & mask; };
    std::vector<std::uint32_t> slot_start(n_slots + 1, 0);
    for (const Entry& e : unsorted) ++slot_start[slot_of(e.column) + 1];
    for (std::size_t k = 0; k < n_slots; ++k) slot_start[k + 1] += slot_start[k];
    std::vector<Entry> entries(n);
    {
        std::vector<std::uint32_t> fill(slot_start.begin(), slot_start.end() - 1);
        for (const Entry& e : unsorted) entries[fill[slot_of(e.column)]++] = e;
    }

    // Each chunk of rows fills its own flat buffer; concatenated in chunk order.
    std::vector<std::uint32_t> row_len(n);
    std::vector<std::pair<std::size_t, std::vector<std::uint32_t>>> chunks;
    std::mutex chunks_mutex;
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<std::uint32_t> buf;
        buf.reserve(4 * (end - begin));
        for (std::size_t i = begin; i < end; ++i) {
            const Vec3& pi = cloud[i].position;
            const Cell home = cell_of(pi);
            const std::size_t row_begin = buf.size();
            const std::int64_t cy_lo = std::max<std::int64_t>(home[1] - 1, 0);
            const std::int64_t cy_hi = std::min(home[1] + 1, dims[1] - 1);
            // Branch-free: every scanned entry is written, the cursor only
            // advances for accepted ones.
            auto scan = [&](std::size_t k0, std::size_t k1, std::int64_t col_lo, std::int64_t col_hi) {
                std::size_t len = buf.size();
                buf.resize(len + (k1 - k0) + 1);
                for (std::size_t k = k0; k < k1; ++k) {
                    const Entry& e = entries[k];
                    const bool near = (e.column >= col_lo) & (e.column <= col_hi) & (e.cz >= home[2] - 1) &
                                      (e.cz <= home[2] + 1) & within_radius(pi, e.pos, r);
                    buf[len] = e.id;
                    len += near;
                }
                buf.resize(len);
            };
            for (std::int64_t dx = -1; dx <= 1; ++dx) {
                const std::int64_t cx = home[0] + dx;
                if (cx < 0 || cx >= dims[0]) continue;
                const std::int64_t col_lo = cx * dims[1] + cy_lo, col_hi = cx * dims[1] + cy_hi;
                const std::size_t s_lo = slot_of(col_lo), s_hi = slot_of(col_hi);
                if (s_lo <= s_hi) {
                    scan(slot_start[s_lo], slot_start[s_hi + 1], col_lo, col_hi);
                } else {  // wraps around the table end
                    scan(slot_start[s_lo], slot_start[n_slots], col_lo, col_hi);
                    scan(0, slot_start[s_hi + 1], col_lo, col_hi);
                }
            }
            for (std::size_t a = row_begin + 1; a < buf.size(); ++a)  // rows are short
                for (std::size_t b = a; b > row_begin && buf[b - 1] > buf[b]; --b) std::swap(buf[b - 1], buf[b]);
            row_len[i] = static_cast<std::uint32_t>(buf.size() - row_begin);
        }
        const std::lock_guard lock(chunks_mutex);
        chunks.emplace_back(begin, std::move(buf));
    });
    std::sort(chunks.begin(), chunks.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    NeighborIndex idx;
    std::size_t total = 0;
    for (const auto& ch : chunks) total += ch.second.size();
    idx.row_idx.reserve(total);
    idx.col_idx.reserve(total);
    for (std::size_t i = 0; i < n; ++i) idx.row_idx.insert(idx.row_idx.end(), row_len[i], static_cast<std::uint32_t>(i));
    for (const auto& ch : chunks) idx.col_idx.insert(idx.col_idx.end(), ch.second.begin(), ch.second.end());
    return idx;
}

Matrix lfa_traversal(const PointCloud& cloud, const LinearLayer& layer, double r) {
    check_lfa_layer(cloud, layer);
    const std::size_t n = cloud.size(), c_in = layer.in_dim(), c_out = layer.out_dim();
    Matrix out(n, c_out);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> x(c_in), y(c_out);
        for (std::size_t i = begin; i < end; ++i) {
            auto acc = out.row(i);
            std::size_t count = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (!within_radius(cloud[i].position, cloud[j].position, r)) continue;
                gather_pair(cloud, i, j, x);
                layer.apply(x, y);
                for (std::size_t c = 0; c < c_out; ++c) acc[c] += y[c];
                ++count;
            }
            for (auto& v : acc) v /= static_cast<double>(count);
        }
    });
    return out;
}

std::size_t lfa_broadcast_mask_bytes(std::size_t n, std::size_t c_raw) {
    // broadcast tensor + mask
    return n * n * (c_raw + 3) * sizeof(double) + n * n;
}

std::size_t lfa_index_scatter_bytes(std::size_t n, std::size_t pairs, std::size_t c_raw, std::size_t c_out) {
    // row/col indices, segment starts, gathered segment (bounded by all
    // pairs), one projected row
    return pairs * 2 * sizeof(std::uint32_t) + (n + 1) * sizeof(std::size_t) + pairs * (c_raw + 3) * sizeof(double) +
           c_out * sizeof(double);
}

std::size_t lfa_traversal_bytes(std::size_t c_raw, std::size_t c_out) {
    return (c_raw + 3 + c_out) * sizeof(double);
}

Matrix lfa_broadcast_mask(const PointCloud& cloud, const LinearLayer& layer, double r, std::size_t mem_cap_bytes) {
    check_lfa_layer(cloud, layer);
    const std::size_t n = cloud.size(), c_in = layer.in_dim();
    const std::size_t need = lfa_broadcast_mask_bytes(n, cloud.c_raw());
    if (need > mem_cap_bytes) {
        throw Error(ErrorKind::Data, "AllocationLimit",
                    "broadcast tensor needs " + std::to_string(need) + " bytes, cap is " +
                        std::to_string(mem_cap_bytes));
    }

    std::vector<unsigned char> mask(n * n);
    std::vector<double> tensor(n * n * c_in);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                mask[i * n + j] = within_radius(cloud[i].position, cloud[j].position, r) ? 1 : 0;
                gather_pair(cloud, i, j, std::span<double>(tensor.data() + (i * n + j) * c_in, c_in));
            }
    });

    Matrix mean(n, c_in);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            auto acc = mean.row(i);
            std::size_t count = 0;
            for (std::size_t j = 0; j < n; ++j) {
                if (!mask[i * n + j]) continue;
                const double* t = tensor.data() + (i * n + j) * c_in;
                for (std::size_t c = 0; c < c_in; ++c) acc[c] += t[c];
                ++count;
            }
            for (auto& v : acc) v /= static_cast<double>(count);
        }
    });
    return layer.apply_rows(mean);
}

Matrix lfa_index_scatter(const PointCloud& cloud, const LinearLayer& layer, double r) {
    check_lfa_layer(cloud, layer);
    const std::size_t n = cloud.size(), c_in = layer.in_dim(), c_out = layer.out_dim();
    if (n == 0) return Matrix(0, c_out);

    const NeighborIndex idx = build_neighbor_index(cloud, r);

    // Transposed weights: the output index runs innermost.
    const Matrix& w = layer.weight();
    std::vector<double> wt(c_in * c_out);
    for (std::size_t o = 0; o < c_out; ++o)
        for (std::size_t k = 0; k < c_in; ++k) wt[k * c_out + o] = w(o, k);

    // Rows are contiguous because the index is row-sorted.
    std::vector<std::size_t> start(n + 1, 0);
    for (auto row : idx.row_idx) ++start[row + 1];
    for (std::size_t i = 0; i < n; ++i) start[i + 1] += start[i];

    // Gather one segment at a time, project each pair, reduce.
    Matrix out(n, c_out);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> gathered;
        for (std::size_t i = begin; i < end; ++i) {
            const std::size_t len = start[i + 1] - start[i];
            gathered.resize(len * c_in);
            for (std::size_t k = 0; k < len; ++k)
                gather_pair(cloud, i, idx.col_idx[start[i] + k], std::span<double>(gathered.data() + k * c_in, c_in));
            project_segment(gathered.data(), len, c_in, c_out, wt.data(), layer.has_bias() ? layer.bias().data() : nullptr,
                            out.row(i).data());
            if (len > 1)  // x / 1 == x
                for (auto& v : out.row(i)) v /= static_cast<double>(len);
        }
    });
    return out;
}

Matrix gfa(const PointCloud& cloud, const AttentionBlock& block) {
    block.validate();
    if (block.in_dim() != cloud.c_raw()) {
        throw data_error("ShapeMismatch", "GFA expects c_raw = " + std::to_string(block.in_dim()) + ", cloud has " +
                                              std::to_string(cloud.c_raw()));
    }
    const std::size_t n = cloud.size(), c = block.model_dim();
    const std::size_t hidden = block.ffn_in.out_dim();
    const std::size_t d_head = c / block.heads;
    const double scale = 1.0 / std::sqrt(static_cast<double>(d_head));

    Matrix f1(n, c), qkv(n, 3 * c);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> normed(c);
        for (std::size_t i = begin; i < end; ++i) {
            block.input.apply(cloud[i].raw_features, f1.row(i));
            block.ln1.apply(f1.row(i), normed);
            block.qkv.apply(normed, qkv.row(i));
        }
    });

    Matrix out(n, c);
    parallel_for(n, [&](std::size_t begin, std::size_t end) {
        std::vector<double> weights(n), attn(c), f2(c), normed(c), mid(hidden), ffn(c);
        for (std::size_t i = begin; i < end; ++i) {
            const double* q = qkv.row(i).data();
            for (std::size_t h = 0; h < block.heads; ++h) {
                const std::size_t off = h * d_head;
                double max_score = -std::numeric_limits<double>::infinity();
                for (std::size_t j = 0; j < n; ++j) {
                    const double* k = qkv.row(j).data() + c;
                    double s = 0.0;
                    for (std::size_t d = 0; d < d_head; ++d) s += q[off + d] * k[off + d];
                    weights[j] = s * scale;
                    max_score = std::max(max_score, weights[j]);
                }
                double denom = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    weights[j] = std::exp(weights[j] - max_score);
                    denom += weights[j];
                }
                for (std::size_t d = 0; d < d_head; ++d) attn[off + d] = 0.0;
                for (std::size_t j = 0; j < n; ++j) {
                    const double* v = qkv.row(j).data() + 2 * c;
                    const double w = weights[j] / denom;
                    for (std::size_t d = 0; d < d_head; ++d) attn[off + d] += w * v[off + d];
                }
            }
            block.out.apply(attn, f2);
            const auto f1_row = f1.row(i);
            for (std::size_t d = 0; d < c; ++d) f2[d] += f1_row[d];

            block.ln2.apply(f2, normed);
            block.ffn_in.apply(normed, mid);
            for (auto& v : mid) v = gelu(v);
            block.ffn_out.apply(mid, ffn);
            auto dst = out.row(i);
            for (std::size_t d = 0; d < c; ++d) dst[d] = ffn[d] + f2[d];
        }
    });
    return out;
}

std::vector<GaussianPrimitive3D> predict_attributes(const PointCloud& cloud, const Matrix& f_lfa, const Matrix& f_gfa,
                                                    const LinearLayer& head, const AttributeOptions& opts) {
    const std::size_t n = cloud.size(), c_raw = cloud.c_raw();
    if (f_lfa.rows != n || f_gfa.rows != n || f_lfa.cols != f_gfa.cols) {
        throw data_error("ShapeMismatch", "LFA/GFA feature matrices must both be N x C");
    }
    const std::size_t c = f_lfa.cols;
    if (head.in_dim() != c_raw + 2 * c || head.out_dim() != 7 + c) {
        throw data_error("ShapeMismatch", "attribute head must map c_raw + 2C -> 7 + C");
    }
    if (!(opts.min_scale > 0.0)) throw usage_error("InvalidOption", "min_scale must be > 0");

    std::vector<GaussianPrimitive3D> prims(n);
    std::vector<double> x(head.in_dim()), raw(head.out_dim());
    for (std::size_t i = 0; i < n; ++i) {
        const auto& f = cloud[i].raw_features;
        std::copy(f.begin(), f.end(), x.begin());
        std::copy(f_lfa.row(i).begin(), f_lfa.row(i).end(), x.begin() + c_raw);
        std::copy(f_gfa.row(i).begin(), f_gfa.row(i).end(), x.begin() + c_raw + c);
        head.apply(x, raw);

        auto& g = prims[i];
        g.mean = cloud[i].position;
        for (int k = 0; k < 3; ++k) g.scales[k] = softplus(raw[k]) + opts.min_scale;
        g.quat = quat_normalize({raw[3], raw[4], raw[5], raw[6]});
        g.opacity = 1.0;
        g.features.assign(raw.begin() + 7, raw.end());
    }
    return prims;
}

void PgeParams::validate() const {
    gfa.validate();
    const std::size_t c = channels(), c_raw = gfa.in_dim();
    if (lfa.in_dim() != c_raw + 3 || lfa.out_dim() != c) throw data_error("ShapeMismatch", "LFA layer shape");
    if (head.in_dim() != c_raw + 2 * c || head.out_dim() != 7 + c) throw data_error("ShapeMismatch", "head shape");
}

namespace {
void fill_uniform(LinearLayer& layer, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(layer.in_dim()));
    for (auto& w : layer.weight().data) w = rng.uniform(-bound, bound);
    if (layer.has_bias())
        for (auto& b : layer.bias()) b = rng.uniform(-bound, bound);
}

LayerNorm unit_norm(std::size_t c) { return {std::vector<double>(c, 1.0), std::vector<double>(c, 0.0), 1e-5}; }
} // namespace

PgeParams init_weights(std::uint64_t seed, const PgeDims& dims) {
    if (dims.c_raw == 0 || dims.channels == 0 || dims.heads == 0 || dims.channels % dims.heads != 0) {
        throw usage_error("InvalidDims", "c_raw, C >= 1 and C divisible by heads required");
    }
    const std::size_t c = dims.channels;
    PgeParams p;
    p.lfa = LinearLayer(dims.c_raw + 3, c, dims.lfa_bias);
    p.gfa.input = LinearLayer(dims.c_raw, c);
    p.gfa.ln1 = unit_norm(c);
    p.gfa.qkv = LinearLayer(c, 3 * c);
    p.gfa.out = LinearLayer(c, c);
    p.gfa.ln2 = unit_norm(c);
    p.gfa.ffn_in = LinearLayer(c, 2 * c);
    p.gfa.ffn_out = LinearLayer(2 * c, c);
    p.gfa.heads = dims.heads;
    p.head = LinearLayer(dims.c_raw + 2 * c, 7 + c);

    Rng rng(seed);
    for (LinearLayer* l : {&p.lfa, &p.gfa.input, &p.gfa.qkv, &p.gfa.out, &p.gfa.ffn_in, &p.gfa.ffn_out, &p.head})
        fill_uniform(*l, rng);
    return p;
}

} // namespace rgdet
