// Acceptance checks: one PASS/FAIL line per criterion, nonzero exit on any
// failure. argv[1] is the rgk executable.

#include "rgdet/bench.hpp"
#include "rgdet/bev_splat.hpp"
#include "rgdet/box_loss.hpp"
#include "rgdet/feature_agg.hpp"
#include "rgdet/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <unistd.h>

using namespace rgdet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string g_rgk;
fs::path g_work;
int g_failures = 0;

void verdict(int id, bool pass, const std::string& what, const std::string& detail) {
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << id << ": " << what << " [" << detail << "]" << std::endl;
    if (!pass) ++g_failures;
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(6);
    os << v;
    return os.str();
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) return INFINITY;
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

PointCloud uniform_cloud(Rng& rng, std::size_t n, double extent) {
    PointCloud c(4);
    for (std::size_t i = 0; i < n; ++i) {
        RadarPoint p;
        p.position = {rng.uniform(0.0, extent), rng.uniform(0.0, extent), rng.uniform(0.0, extent / 4)};
        p.raw_features = {rng.normal(), rng.normal(), rng.normal(), rng.normal()};
        c.push_back(std::move(p));
    }
    return c;
}

Box3D random_box(Rng& rng) {
    return {rng.uniform(-30, 30), rng.uniform(-30, 30), rng.uniform(-2, 2), rng.uniform(0.3, 6.0),
            rng.uniform(0.3, 3.0),  rng.uniform(0.3, 3.0), rng.uniform(-std::numbers::pi, std::numbers::pi)};
}

Box3D perturbed(const Box3D& b, Rng& rng) {
    return {b.x + rng.normal(),           b.y + rng.normal(),           b.z + 0.3 * rng.normal(),
            b.l * rng.uniform(0.5, 1.6), b.w * rng.uniform(0.5, 1.6), b.h * rng.uniform(0.5, 1.6),
            b.theta + rng.normal()};
}

// ---------------------------------------------------------------------------

void lfa_equivalence() {
    const auto t0 = Clock::now();
    const std::array<std::size_t, 5> sizes{1, 10, 100, 1000, 2000};
    const std::array<double, 3> radii{0.1, 0.32, 1.0};
    double worst = 0.0;
    std::size_t scenes = 0;
    for (std::uint64_t s = 0; s < 200; ++s) {
        const std::size_t n = sizes[s % sizes.size()];
        const double r = radii[(s / sizes.size()) % radii.size()];
        const PgeParams p = init_weights(1000 + s, {4, 64, 1, true});
        PointCloud cloud;
        if (s % 2 == 0) {
            SceneSpec spec;
            spec.seed = s;
            spec.n_points = n;
            spec.n_clusters = std::max<std::size_t>(1, n / 10);
            spec.cluster_sigma = 0.5;
            cloud = generate_scene(spec);
        } else {
            Rng rng(s);
            cloud = uniform_cloud(rng, n, std::max(1.0, std::cbrt(static_cast<double>(n))));
        }
        const Matrix ref = lfa_traversal(cloud, p.lfa, r);
        worst = std::max(worst, max_abs_diff(lfa_index_scatter(cloud, p.lfa, r), ref));
        worst = std::max(worst, max_abs_diff(lfa_broadcast_mask(cloud, p.lfa, r), ref));
        ++scenes;
    }
    const double secs = seconds_since(t0);
    verdict(1, worst <= 1e-9 && secs < 120.0, "LFA implementations match traversal",
            std::to_string(scenes) + " scenes, max |diff| " + num(worst) + ", " + num(secs) + " s");
}

void lfa_speed() {
    BenchOptions o;
    o.sizes = {1000};
    o.c_raw = 4;
    o.channels = 64;
    o.radius = 0.32;
    o.reps = 31;
    const BenchReport rep = run_lfa_bench(o);
    const BenchRow *trav = nullptr, *bm = nullptr, *is = nullptr;
    for (const auto& row : rep.rows) {
        if (row.impl == "traversal") trav = &row;
        if (row.impl == "broadcast_mask") bm = &row;
        if (row.impl == "index_scatter") is = &row;
    }
    if (!trav || !bm || !is || !rep.gate_passed) {
        verdict(2, false, "LFA speed and memory ordering", "bench gate failed or rows missing");
        return;
    }
    const double time_ratio = is->median_ms / trav->median_ms;
    const double mem_ratio = static_cast<double>(is->mem_bytes) / static_cast<double>(bm->mem_bytes);
    verdict(2, time_ratio <= 0.1 && mem_ratio <= 0.1, "LFA speed and memory ordering at N=1000",
            "median " + num(is->median_ms) + " ms vs " + num(trav->median_ms) + " ms (ratio " + num(time_ratio) +
                "), memory ratio " + num(mem_ratio));
}

void raster_equivalence() {
    const auto t0 = Clock::now();
    RasterConfig cfg;
    cfg.t_min = 0.0;
    double worst = 0.0;
    for (std::uint64_t s = 0; s < 50; ++s) {
        Rng rng(7000 + s);
        const int w = 16 + static_cast<int>(rng.uniform() * 113.0);  // 16..128
        const int h = 16 + static_cast<int>(rng.uniform() * 113.0);
        const double px = 0.16;
        const BevRange range{0.0, w * px, -h * px / 2, h * px / 2, h, w};
        const std::size_t count = 1 + static_cast<std::size_t>(rng.uniform() * 200.0);
        const std::size_t channels = 1 + s % 4;
        std::vector<Splat2D> splats;
        for (std::size_t i = 0; i < count; ++i) {
            GaussianPrimitive3D g;
            g.mean = {rng.uniform(range.x_min, range.x_max), rng.uniform(range.y_min, range.y_max), rng.uniform(-3, 2)};
            g.scales = {rng.uniform(0.02, 1.5), rng.uniform(0.02, 1.5), rng.uniform(0.02, 1.5)};
            g.quat = quat_normalize({rng.normal(), rng.normal(), rng.normal(), rng.normal()});
            g.opacity = rng.uniform(0.2, 1.0);
            for (std::size_t c = 0; c < channels; ++c) g.features.push_back(rng.uniform(-2, 2));
            splats.push_back(project_to_bev(g, i, range));
        }
        const BevFeatureMap tiled = rasterize(splats, range, cfg);
        const std::vector<double> brute = rasterize_oracle(splats, range, cfg);
        for (std::size_t i = 0; i < brute.size(); ++i)
            worst = std::max(worst, std::abs(static_cast<double>(tiled.data[i]) - brute[i]));
    }
    const double secs = seconds_since(t0);
    verdict(3, worst <= 1e-4 && secs < 60.0, "tiled rasterizer matches brute force",
            "50 scenes, max |diff| " + num(worst) + ", " + num(secs) + " s");
}

void single_splat() {
    const BevRange range{0.0, 32 * 0.16, 0.0, 32 * 0.16, 32, 32};
    const double f = 1.7;
    Splat2D s;
    s.mean2d = {10.5, 20.5};  // center of column 10, row 20
    s.cov2d = {{2.0, 0.3, 0.3, 1.5}};
    s.cov2d_inv = mat2_inverse(s.cov2d);
    s.features = {f};
    s.opacity = 1.0;
    const double one = rasterize({s}, range).at(0, 20, 10);
    const double want1 = 0.99 * f;
    const bool ok1 = std::abs(one - want1) <= 2.0 * std::ldexp(1.0, -23) * want1;

    Splat2D t = s;
    t.key.source_index = 1;
    const double two = rasterize({s, t}, range).at(0, 20, 10);
    const double want2 = f * (0.99 + 0.99 * 0.01);
    const bool ok2 = std::abs(two - want2) <= 1e-6 * want2;
    verdict(4, ok1 && ok2, "single and stacked splat values",
            "one " + num(one) + " (want " + num(want1) + "), two " + num(two) + " (want " + num(want2) + ")");
}

void density() {
    std::size_t strictly = 0, at_least = 0;
    std::string counts;
    for (std::uint64_t s = 0; s < 20; ++s) {
        SceneSpec spec;
        spec.seed = 300 + s;
        spec.n_points = 500;
        spec.n_clusters = 25;
        const PointCloud cloud = generate_scene(spec);
        const PgeParams p = init_weights(s, {4, 64, 1, true});
        const std::size_t pge = count_nonzero_pixels(encode(cloud, p, spec.range));
        const std::size_t pillars = pillar_occupancy(cloud, spec.range);
        at_least += pge >= pillars;
        strictly += pge > pillars;
        if (s < 3) counts += std::to_string(pge) + "/" + std::to_string(pillars) + " ";
    }
    verdict(5, at_least == 20 && strictly >= 18, "PGE map denser than pillar scatter",
            std::to_string(at_least) + "/20 >=, " + std::to_string(strictly) + "/20 >, e.g. " + counts);
}

void kl_cases() {
    const GaussianDistribution3D id{{0, 0, 0}, Mat3::identity(), std::nullopt};
    const double self = kl_divergence(id, id).total;
    Rng rng(11);
    double self_random_worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const auto g = box_to_gaussian(random_box(rng), 1.0 + (i % 3));
        self_random_worst = std::max(self_random_worst, std::abs(kl_divergence(g, g).total));
    }
    const GaussianDistribution3D shift{{1, 0, 0}, Mat3::identity(), std::nullopt};
    const double unit = kl_divergence(shift, id).total;
    const GaussianDistribution3D four{{0, 0, 0}, Mat3::diag({4, 4, 4}), std::nullopt};
    const double fourx = kl_divergence(four, id).total;
    const double want4 = 0.5 * (9.0 - 6.0 * std::log(2.0));

    double min_kl = INFINITY;
    for (int i = 0; i < 100000; ++i) {
        auto spd = [&]() {
            Mat3 a;
            for (auto& v : a.m) v = rng.normal();
            Mat3 s = a * transpose(a);
            for (int k = 0; k < 3; ++k) s.m[4 * k] += 0.05;
            return s;
        };
        const GaussianDistribution3D p{{rng.normal(), rng.normal(), rng.normal()}, spd(), std::nullopt};
        const GaussianDistribution3D q{{rng.normal(), rng.normal(), rng.normal()}, spd(), std::nullopt};
        min_kl = std::min(min_kl, kl_divergence(p, q).total);
    }
    const bool ok = self == 0.0 && self_random_worst == 0.0 && std::abs(unit - 0.5) <= 1e-12 &&
                    std::abs(fourx - want4) <= 1e-12 && min_kl >= -1e-12;
    verdict(6, ok, "KL divergence cases",
            "KL(g,g)=" + num(self) + ", boxes " + num(self_random_worst) + ", shift " + num(unit - 0.5) +
                " off, 4I " + num(fourx - want4) + " off, min over 1e5 " + num(min_kl));
}

void a_invariance() {
    Rng rng(12);
    double trace_dev = 0.0, logdet_dev = 0.0, maha_rel = 0.0;
    const std::array<double, 3> as{0.5, 1.0, 3.0};
    for (int i = 0; i < 10000; ++i) {
        const Box3D gt = random_box(rng), pred = perturbed(gt, rng);
        const KlTerms base = kl_divergence(box_to_gaussian(pred, 1.0), box_to_gaussian(gt, 1.0));
        for (double a : as) {
            const KlTerms k = kl_divergence(box_to_gaussian(pred, a), box_to_gaussian(gt, a));
            trace_dev = std::max(trace_dev, std::abs(k.trace - base.trace));
            logdet_dev = std::max(logdet_dev, std::abs(k.logdet - base.logdet));
            const double want = a * a * base.mahalanobis;
            if (want != 0.0) maha_rel = std::max(maha_rel, std::abs(k.mahalanobis - want) / std::abs(want));
        }
    }
    verdict(7, trace_dev <= 1e-10 && logdet_dev <= 1e-10 && maha_rel <= 1e-10,
            "scaling a only affects the mahalanobis term",
            "trace " + num(trace_dev) + ", logdet " + num(logdet_dev) + ", mahalanobis rel " + num(maha_rel));
}

void gradient_check() {
    const auto t0 = Clock::now();
    Rng rng(13);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Box3D gt = random_box(rng), pred = perturbed(gt, rng);
        const double a = std::array{0.5, 1.0, 3.0}[i % 3];
        worst = std::max(worst, gradient_rel_error(bgl_gradient(pred, gt, a), bgl_gradient_fd(pred, gt, a, 1e-5)));
    }
    const double secs = seconds_since(t0);
    verdict(8, worst < 1e-4 && secs < 30.0, "analytic gradient vs central differences",
            "1000 pairs, max rel error " + num(worst) + ", " + num(secs) + " s");
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

int run(const std::string& args, const fs::path& stdout_file) {
    const std::string cmd = "\"" + g_rgk + "\" " + args + " > \"" + stdout_file.string() + "\" 2>&1";
    return std::system(cmd.c_str());
}

void determinism() {
    const fs::path cloud = g_work / "scene.rgpc";
    std::string why;
    if (run("generate --seed 5 -n 3000 -o \"" + cloud.string() + "\"", g_work / "gen.txt") != 0) why = "generate failed";

    BoxList pred, gt;
    Rng rng(14);
    const std::array<const char*, 4> cls{"car", "pedestrian", "cyclist", "truck"};
    for (int i = 0; i < 500; ++i) {
        gt.boxes.push_back(random_box(rng));
        pred.boxes.push_back(perturbed(gt.boxes.back(), rng));
        gt.classes.emplace_back(cls[i % 4]);
        pred.classes.emplace_back(cls[i % 4]);
    }
    write_boxes(pred, g_work / "pred.csv");
    write_boxes(gt, g_work / "gt.csv");

    std::vector<std::string> enc_maps, enc_out, bgl_out;
    for (const char* threads : {"1", "8", "1", "8"}) {
        const std::string tag = std::string(threads) + "_" + std::to_string(enc_maps.size());
        const fs::path map = g_work / ("map_" + tag + ".rgfm");
        if (run(std::string("--threads ") + threads + " encode \"" + cloud.string() + "\" -o \"" + map.string() +
                    "\" --compare-pillar",
                g_work / ("enc_" + tag + ".txt")) != 0)
            why = "encode failed";
        if (run(std::string("--threads ") + threads + " bgl \"" + (g_work / "pred.csv").string() + "\" \"" +
                    (g_work / "gt.csv").string() + "\" --grad-check",
                g_work / ("bgl_" + tag + ".txt")) != 0)
            why = "bgl failed";
        enc_maps.push_back(slurp(map));
        enc_out.push_back(slurp(g_work / ("enc_" + tag + ".txt")));
        bgl_out.push_back(slurp(g_work / ("bgl_" + tag + ".txt")));
    }
    auto all_same = [](const std::vector<std::string>& v) {
        return !v[0].empty() && std::all_of(v.begin(), v.end(), [&](const std::string& s) { return s == v[0]; });
    };
    if (why.empty() && !all_same(enc_maps)) why = "encode feature maps differ";
    if (why.empty() && !all_same(enc_out)) why = "encode stdout differs";
    if (why.empty() && !all_same(bgl_out)) why = "bgl output differs";
    verdict(9, why.empty(), "encode and bgl bit-identical across runs and --threads 1/8",
            why.empty() ? std::to_string(enc_maps[0].size()) + " byte map, " + std::to_string(bgl_out[0].size()) +
                              " byte bgl output, 4 runs each"
                        : why);
}

void selftest_smoke() {
    const auto t0 = Clock::now();
    const int rc = run("selftest", g_work / "selftest.txt");
    const double secs = seconds_since(t0);
    verdict(10, rc == 0 && secs < 60.0, "selftest passes", "exit " + std::to_string(rc) + ", " + num(secs) + " s");
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-rgk>\n";
        return 2;
    }
    g_rgk = argv[1];
    g_work = fs::temp_directory_path() / ("rgk_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(g_work);

    lfa_equivalence();
    lfa_speed();
    raster_equivalence();
    single_splat();
    density();
    kl_cases();
    a_invariance();
    gradient_check();
    determinism();
    selftest_smoke();

    fs::remove_all(g_work);
    std::cout << (g_failures == 0 ? "all criteria passed" : std::to_string(g_failures) + " criteria failed") << "\n";
    return g_failures == 0 ? 0 : 1;
}
