#include "rgdet/selftest.hpp"

#include "rgdet/bev_splat.hpp"
#include "rgdet/box_loss.hpp"
#include "rgdet/error.hpp"
#include "rgdet/feature_agg.hpp"
#include "rgdet/parallel.hpp"
#include "rgdet/rng.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <numbers>

namespace rgdet {

namespace {

using Check = std::function<std::string()>;  // empty string = pass

PointCloud scattered(std::uint64_t seed, std::size_t n, double extent) {
    Rng rng(seed);
    PointCloud c(4);
    for (std::size_t i = 0; i < n; ++i) {
        RadarPoint p;
        for (auto& v : p.position) v = rng.uniform(0.0, extent);
        p.raw_features = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        c.push_back(std::move(p));
    }
    return c;
}

double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

Box3D random_box(Rng& rng) {
    return {rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-2, 2), rng.uniform(0.3, 6.0),
            rng.uniform(0.3, 3.0),  rng.uniform(0.3, 3.0), rng.uniform(-std::numbers::pi, std::numbers::pi)};
}

Box3D perturb(const Box3D& b, Rng& rng) {
    return {b.x + rng.normal(), b.y + rng.normal(), b.z + 0.3 * rng.normal(), b.l * rng.uniform(0.6, 1.5),
            b.w * rng.uniform(0.6, 1.5), b.h * rng.uniform(0.6, 1.5), b.theta + 0.5 * rng.normal()};
}

} // namespace

std::vector<CheckResult> run_selftest(const SelftestOptions& opts) {
    std::optional<PgeParams> loaded;
    std::vector<std::pair<std::string, Check>> checks;

    checks.emplace_back("weights-file", [&]() -> std::string {
        if (opts.weights_path) {
            loaded = load_weights(*opts.weights_path);
            return {};
        }
        const auto path = std::filesystem::temp_directory_path() / "rgdet_selftest.rgwt";
        const PgeParams p = init_weights(0, {4, 16, 2, true});
        save_weights(p, path);
        loaded = load_weights(path);
        std::filesystem::remove(path);
        return *loaded == p ? "" : "weights differ after round trip";
    });

    checks.emplace_back("geom-identities", []() -> std::string {
        Rng rng(1);
        for (int t = 0; t < 200; ++t) {
            const Mat3 r = quat_to_rotmat(quat_normalize({rng.normal(), rng.normal(), rng.normal(), rng.normal()}));
            const Mat3 c = covariance_from_scale_rot({rng.uniform(0.1, 3), rng.uniform(0.1, 3), rng.uniform(0.1, 3)}, r);
            const Mat3 id = mat3_inverse(c) * c;
            for (int i = 0; i < 9; ++i)
                if (std::abs(id.m[i] - Mat3::identity().m[i]) > 1e-10) return "inverse(A) A != I";
        }
        return {};
    });

    checks.emplace_back("prng-trace", []() -> std::string {
        Rng rng(0);
        return rng.next_u64() == 11091344671253066420ULL ? "" : "xoshiro256** reference output mismatch";
    });

    checks.emplace_back("neighbor-index", []() -> std::string {
        for (std::uint64_t s = 0; s < 6; ++s) {
            const double r = std::array{0.1, 0.32, 1.0}[s % 3];
            const PointCloud c = scattered(s, 200, 3.0);
            const NeighborIndex idx = build_neighbor_index(c, r);
            std::size_t k = 0;
            for (std::uint32_t i = 0; i < c.size(); ++i)
                for (std::uint32_t j = 0; j < c.size(); ++j) {
                    const auto& a = c[i].position;
                    const auto& b = c[j].position;
                    const double d = std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) +
                                               (a[2] - b[2]) * (a[2] - b[2]));
                    if (!(d < r)) continue;
                    if (k >= idx.size() || idx.row_idx[k] != i || idx.col_idx[k] != j) return "pair list differs";
                    ++k;
                }
            if (k != idx.size()) return "extra pairs";
        }
        return {};
    });

    checks.emplace_back("lfa-equivalence", []() -> std::string {
        const PgeParams p = init_weights(3, {4, 64, 1, true});
        for (std::uint64_t s = 0; s < 6; ++s) {
            const double r = std::array{0.1, 0.32, 1.0}[s % 3];
            SceneSpec spec;
            spec.seed = s;
            spec.n_points = 300;
            spec.n_clusters = 30;
            const PointCloud c = generate_scene(spec);
            const Matrix ref = lfa_traversal(c, p.lfa, r);
            if (max_diff(lfa_index_scatter(c, p.lfa, r).data, ref.data) > 1e-9) return "index_scatter differs";
            if (max_diff(lfa_broadcast_mask(c, p.lfa, r).data, ref.data) > 1e-9) return "broadcast_mask differs";
        }
        return {};
    });

    checks.emplace_back("gfa-permutation", []() -> std::string {
        const PgeParams p = init_weights(4, {4, 16, 2, true});
        const PointCloud c = scattered(5, 50, 5.0);
        PointCloud rev(4);
        for (std::size_t i = c.size(); i-- > 0;) rev.push_back(c[i]);
        const Matrix a = gfa(c, p.gfa), b = gfa(rev, p.gfa);
        for (std::size_t i = 0; i < c.size(); ++i)
            for (std::size_t d = 0; d < 16; ++d)
                if (std::abs(a(i, d) - b(c.size() - 1 - i, d)) > 1e-9) return "not permutation equivariant";
        return {};
    });

    checks.emplace_back("attribute-invariants", [&]() -> std::string {
        const PgeParams& p = *loaded;
        const PointCloud c = scattered(6, 100, 5.0);
        const auto prims = encode_primitives(PointCloud(p.c_raw(), c.points()), p);
        for (std::size_t i = 0; i < prims.size(); ++i) {
            if (std::abs(prims[i].quat.norm() - 1.0) > 1e-12) return "quaternion not unit";
            for (double s : prims[i].scales)
                if (!(s >= 1e-3)) return "scale below floor";
            if (prims[i].mean != c[i].position) return "mean moved";
            if (prims[i].opacity != 1.0) return "opacity not 1";
        }
        return {};
    });

    checks.emplace_back("raster-oracle", []() -> std::string {
        RasterConfig cfg;
        cfg.t_min = 0.0;
        for (std::uint64_t s = 0; s < 5; ++s) {
            const BevRange range{0.0, 64 * 0.16, -3.2, 3.2, 40, 64};
            Rng rng(s);
            std::vector<Splat2D> splats;
            for (std::size_t i = 0; i < 100; ++i) {
                GaussianPrimitive3D g;
                g.mean = {rng.uniform(0, 10.24), rng.uniform(-3.2, 3.2), rng.uniform(-3, 2)};
                g.scales = {rng.uniform(0.05, 1), rng.uniform(0.05, 1), rng.uniform(0.05, 1)};
                g.quat = quat_normalize({rng.normal(), rng.normal(), rng.normal(), rng.normal()});
                g.features = {rng.uniform(-1, 1), rng.uniform(-1, 1)};
                splats.push_back(project_to_bev(g, i, range));
            }
            const BevFeatureMap tiled = rasterize(splats, range, cfg);
            const auto brute = rasterize_oracle(splats, range, cfg);
            for (std::size_t i = 0; i < brute.size(); ++i)
                if (std::abs(tiled.data[i] - brute[i]) > 1e-4) return "tiled output differs from brute force";
        }
        return {};
    });

    checks.emplace_back("raster-single-splat", []() -> std::string {
        const BevRange range{0.0, 2.56, 0.0, 2.56, 16, 16};
        Splat2D s;
        s.mean2d = {5.5, 7.5};
        s.cov2d = {{1.3, 0.0, 0.0, 1.3}};
        s.cov2d_inv = mat2_inverse(s.cov2d);
        s.features = {1.0};
        const float one = rasterize({s}, range).at(0, 7, 5);
        if (one != 0.99f) return "single splat != 0.99 f";
        Splat2D t = s;
        t.key.source_index = 1;
        const double two = rasterize({s, t}, range).at(0, 7, 5);
        return std::abs(two - (0.99 + 0.99 * 0.01)) <= 1e-6 * 0.9999 ? "" : "two-splat blend wrong";
    });

    checks.emplace_back("density-vs-pillar", [&]() -> std::string {
        const PgeParams& p = *loaded;
        for (std::uint64_t s = 0; s < 3; ++s) {
            SceneSpec spec;
            spec.seed = s;
            spec.n_points = 200;
            spec.c_raw = p.c_raw();
            spec.n_clusters = 20;
            const PointCloud c = generate_scene(spec);
            if (count_nonzero_pixels(encode(c, p, spec.range)) <= pillar_occupancy(c, spec.range))
                return "PGE map not denser than pillar scatter";
        }
        return {};
    });

    checks.emplace_back("encode-determinism", [&]() -> std::string {
        const PgeParams& p = *loaded;
        SceneSpec spec;
        spec.n_points = 150;
        spec.c_raw = p.c_raw();
        spec.n_clusters = 10;
        const PointCloud c = generate_scene(spec);
        const unsigned saved = thread_count();
        set_thread_count(1);
        const BevFeatureMap a = encode(c, p, spec.range);
        set_thread_count(4);
        const BevFeatureMap b = encode(c, p, spec.range);
        set_thread_count(saved);
        return a == b ? "" : "encode differs across thread counts";
    });

    checks.emplace_back("kl-examples", []() -> std::string {
        const GaussianDistribution3D id{{0, 0, 0}, Mat3::identity(), std::nullopt};
        if (kl_divergence(id, id).total != 0.0) return "KL(g, g) != 0";
        const GaussianDistribution3D shift{{1, 0, 0}, Mat3::identity(), std::nullopt};
        if (std::abs(kl_divergence(shift, id).total - 0.5) > 1e-12) return "unit shift != 0.5";
        const GaussianDistribution3D wide{{0, 0, 0}, Mat3::diag({4, 4, 4}), std::nullopt};
        if (std::abs(kl_divergence(wide, id).total - 0.5 * (9 - 6 * std::log(2.0))) > 1e-12) return "4I case wrong";
        Rng rng(2);
        for (int t = 0; t < 2000; ++t) {
            const Box3D a = random_box(rng);
            if (kl_divergence(box_to_gaussian(perturb(a, rng), 1.0), box_to_gaussian(a, 1.0)).total < -1e-12)
                return "negative KL";
        }
        return {};
    });

    checks.emplace_back("a-invariance", []() -> std::string {
        Rng rng(3);
        for (int t = 0; t < 500; ++t) {
            const Box3D g = random_box(rng), p = perturb(g, rng);
            const KlTerms base = kl_divergence(box_to_gaussian(p, 1.0), box_to_gaussian(g, 1.0));
            for (double a : {0.5, 3.0}) {
                const KlTerms k = kl_divergence(box_to_gaussian(p, a), box_to_gaussian(g, a));
                if (std::abs(k.trace - base.trace) > 1e-10 || std::abs(k.logdet - base.logdet) > 1e-10)
                    return "trace/logdet depend on a";
                if (std::abs(k.mahalanobis - a * a * base.mahalanobis) > 1e-10 * std::abs(a * a * base.mahalanobis))
                    return "mahalanobis not a^2-scaled";
            }
        }
        return {};
    });

    checks.emplace_back("gradient-check", []() -> std::string {
        Rng rng(4);
        for (int t = 0; t < 200; ++t) {
            const Box3D g = random_box(rng), p = perturb(g, rng);
            if (gradient_rel_error(bgl_gradient(p, g, 1.0), bgl_gradient_fd(p, g, 1.0)) >= 1e-4)
                return "analytic gradient disagrees with finite differences";
        }
        return {};
    });

    std::vector<CheckResult> results;
    for (const auto& [name, check] : checks) {
        CheckResult r{name, false, {}};
        if (!loaded && (name == "attribute-invariants" || name == "density-vs-pillar" || name == "encode-determinism")) {
            r.detail = "skipped: no usable weights";
            results.push_back(r);
            continue;
        }
        try {
            r.detail = check();
            r.passed = r.detail.empty();
        } catch (const std::exception& e) {
            r.detail = e.what();
        }
        results.push_back(r);
    }
    return results;
}

} // namespace rgdet
