// rgk: synthetic radar scenes, encoder runs, LFA benchmark, box loss.

#include "rgdet/bench.hpp"
#include "rgdet/config.hpp"
#include "rgdet/error.hpp"
#include "rgdet/parallel.hpp"
#include "rgdet/selftest.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <sstream>

using namespace rgdet;

namespace {

std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    return s;
}

const char* kind_name(ErrorKind k) {
    switch (k) {
    case ErrorKind::Usage: return "usage";
    case ErrorKind::Data: return "data";
    case ErrorKind::Numerical: return "numerical";
    case ErrorKind::Gate: return "gate";
    }
    return "unknown";
}

int report(ErrorKind kind, const std::string& code, const std::string& msg) {
    std::cerr << "rgk: error kind=" << kind_name(kind) << " code=" << code << " msg=" << one_line(msg) << "\n";
    return exit_code(kind);
}

struct Globals {
    std::string config_path;
    std::string preset;
    std::vector<std::string> sets;
    bool dump = false;
    std::optional<unsigned> threads;
};

RunConfig resolve_config(const Globals& g) {
    RunConfig cfg;
    if (!g.config_path.empty()) cfg = load_config_file(g.config_path);
    if (const char* env = std::getenv("RGK_THREADS"); env && *env) set_config_value(cfg, "threads", env);
    if (!g.preset.empty()) set_config_value(cfg, "preset", g.preset);
    for (const auto& kv : g.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw usage_error("InvalidOption", "--set expects key=value, got '" + kv + "'");
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string{} : s.substr(b, e - b + 1);
        };
        set_config_value(cfg, trim(kv.substr(0, eq)), trim(kv.substr(eq + 1)));
    }
    if (g.threads) cfg.threads = *g.threads;
    validate_config(cfg);
    return cfg;
}

std::vector<std::size_t> parse_sizes(const std::string& text) {
    std::vector<std::size_t> out;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        std::size_t v = 0;
        const auto r = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (r.ec != std::errc{} || r.ptr != tok.data() + tok.size() || v == 0)
            throw usage_error("InvalidOption", "bad size '" + tok + "' in --sizes");
        out.push_back(v);
    }
    if (out.empty()) throw usage_error("InvalidOption", "--sizes is empty");
    return out;
}

PgeParams encoder_weights(const RunConfig& cfg, const std::string& weights_path, std::size_t c_raw) {
    if (weights_path.empty()) {
        PgeDims dims = pge_dims(cfg);
        dims.c_raw = c_raw;
        return init_weights(cfg.weight_seed, dims);
    }
    PgeParams p = load_weights(weights_path);
    if (p.c_raw() != c_raw)
        throw data_error("ShapeMismatch", "weights expect c_raw=" + std::to_string(p.c_raw()) + ", cloud has " +
                                              std::to_string(c_raw));
    return p;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"rgk: radar Gaussian encoder toolkit"};
    app.require_subcommand(0, 1);

    Globals g;
    app.add_option("--config", g.config_path, "key = value config file");
    app.add_option("--preset", g.preset, "BEV grid preset: vod | tj4d");
    app.add_option("--set", g.sets, "override one config key (key=value), repeatable");
    app.add_flag("--dump-config", g.dump, "print the effective config and exit");
    app.add_option("--threads", g.threads, "worker threads, 0 = auto (env RGK_THREADS)");

    // generate
    auto* gen = app.add_subcommand("generate", "write a seeded synthetic point cloud");
    std::string gen_out;
    std::optional<std::uint64_t> gen_seed;
    std::optional<std::size_t> gen_n, gen_craw, gen_clusters;
    gen->add_option("-o,--out", gen_out, "output path (.csv or .rgpc)")->required();
    gen->add_option("--seed", gen_seed);
    gen->add_option("-n,--points", gen_n);
    gen->add_option("--c-raw", gen_craw);
    gen->add_option("--clusters", gen_clusters);

    // encode
    auto* enc = app.add_subcommand("encode", "run the encoder and write a BEV feature map");
    std::string enc_in, enc_out, enc_weights, enc_pgm, enc_save_weights;
    std::optional<std::size_t> enc_pgm_channel;
    std::optional<std::string> enc_order;
    std::optional<double> enc_radius;
    bool enc_compare = false;
    enc->add_option("input", enc_in, "point cloud file")->required();
    enc->add_option("-o,--out", enc_out, "RGFM output path")->required();
    enc->add_option("--weights", enc_weights, "RGWT weights (default: seeded from weight_seed)");
    enc->add_option("--save-weights", enc_save_weights, "also write the weights used");
    enc->add_option("--pgm-channel", enc_pgm_channel, "export this channel as PGM");
    enc->add_option("--pgm-out", enc_pgm, "PGM path (default: <out>.pgm)");
    enc->add_option("--blend-order", enc_order, "z-asc | z-desc | index");
    enc->add_option("--radius", enc_radius);
    enc->add_flag("--compare-pillar", enc_compare, "report density against pillar scatter");

    // bench-lfa
    auto* bench = app.add_subcommand("bench-lfa", "time the three LFA implementations");
    std::string bench_sizes = "1000", bench_csv_path;
    std::optional<std::size_t> bench_reps, bench_craw, bench_channels;
    std::optional<double> bench_radius;
    std::optional<std::uint64_t> bench_seed;
    bench->add_option("--sizes", bench_sizes, "comma-separated N list");
    bench->add_option("--reps", bench_reps);
    bench->add_option("--c-raw", bench_craw);
    bench->add_option("--channels", bench_channels);
    bench->add_option("--radius", bench_radius);
    bench->add_option("--seed", bench_seed);
    bench->add_option("--csv", bench_csv_path, "write CSV here instead of stdout");

    // bgl
    auto* bglc = app.add_subcommand("bgl", "box Gaussian loss for aligned box files");
    std::string bgl_pred, bgl_gt;
    std::optional<double> bgl_a;
    bool bgl_grad = false;
    bglc->add_option("pred", bgl_pred)->required();
    bglc->add_option("gt", bgl_gt)->required();
    bglc->add_option("--a", bgl_a, "one scaling for every class");
    bglc->add_flag("--grad-check", bgl_grad, "finite-difference check of the analytic gradient");

    // selftest
    auto* self = app.add_subcommand("selftest", "reduced-size oracle and property checks");
    std::string self_weights;
    self->add_option("--weights", self_weights, "validate and use this weights file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        return report(ErrorKind::Usage, "BadArguments", e.what());
    }

    try {
        RunConfig cfg = resolve_config(g);
        // Command flags feed the config so --dump-config shows what would run.
        if (gen_seed) cfg.scene_seed = *gen_seed;
        if (gen_n) cfg.n_points = *gen_n;
        if (gen_craw) cfg.c_raw = *gen_craw;
        if (gen_clusters) cfg.n_clusters = *gen_clusters;
        if (enc_order) cfg.raster.order = parse_blend_order(*enc_order);
        if (enc_radius) cfg.radius = *enc_radius;
        if (bench_craw) cfg.c_raw = *bench_craw;
        if (bench_channels) cfg.channels = *bench_channels;
        if (bench_radius) cfg.radius = *bench_radius;
        if (bench_seed) cfg.scene_seed = *bench_seed;
        if (bgl_a) {
            for (auto& [cls, a] : cfg.bgl.a_per_class) a = *bgl_a;
            cfg.bgl.default_a = *bgl_a;
        }
        validate_config(cfg);
        set_thread_count(cfg.threads);

        if (g.dump) {
            std::cout << dump_config(cfg);
            return 0;
        }
        if (app.get_subcommands().empty()) {
            std::cout << app.help();
            return exit_code(ErrorKind::Usage);
        }

        if (*gen) {
            const PointCloud cloud = generate_scene(scene_spec(cfg));
            write_cloud(cloud, gen_out);
            std::cout << "N=" << cloud.size() << " c_raw=" << cloud.c_raw() << "\n";
            return 0;
        }

        if (*enc) {
            const PointCloud cloud = read_cloud(enc_in);
            const PgeParams params = encoder_weights(cfg, enc_weights, cloud.c_raw());
            if (!enc_save_weights.empty()) save_weights(params, enc_save_weights);
            const BevFeatureMap map = encode(cloud, params, cfg.range, encode_options(cfg));
            write_feature_map(map, enc_out);
            if (enc_pgm_channel) {
                if (*enc_pgm_channel >= map.channels)
                    throw usage_error("InvalidOption", "--pgm-channel out of range");
                write_pgm(map, *enc_pgm_channel, enc_pgm.empty() ? enc_out + ".pgm" : enc_pgm);
            }
            const std::size_t nz = count_nonzero_pixels(map);
            std::cout << "nonzero_pixels=" << nz << "\n";
            if (enc_compare) {
                const std::size_t pillars = pillar_occupancy(cloud, cfg.range);
                std::cout << "pillar_pixels=" << pillars << "\n";
                std::cout << "density_ratio="
                          << (pillars == 0 ? std::string(nz == 0 ? "nan" : "inf")
                                           : fmt9(static_cast<double>(nz) / static_cast<double>(pillars)))
                          << "\n";
            }
            return 0;
        }

        if (*bench) {
            BenchOptions o;
            o.sizes = parse_sizes(bench_sizes);
            o.c_raw = cfg.c_raw;
            o.channels = cfg.channels;
            o.radius = cfg.radius;
            o.seed = cfg.scene_seed;
            o.mem_cap_bytes = cfg.mem_cap_mb << 20;
            if (bench_reps) o.reps = *bench_reps;
            if (o.reps == 0) throw usage_error("InvalidOption", "--reps must be >= 1");
            const BenchReport rep = run_lfa_bench(o);
            for (const auto& row : rep.rows)
                if (row.status != "OOM-guard")
                    std::cout << "gate " << row.impl << " n=" << row.n << " max_abs_diff=" << fmt9(row.max_abs_diff)
                              << " " << (row.status == "gate-failed" ? "FAIL" : "ok") << "\n";
            std::cout << "gate " << (rep.gate_passed ? "PASS" : "FAIL") << "\n";
            if (!rep.gate_passed) {
                std::cerr << "rgk: error kind=gate code=GateFailed msg=LFA outputs disagree; timings withheld\n";
                return exit_code(ErrorKind::Gate);
            }
            if (bench_csv_path.empty()) {
                std::cout << bench_csv(rep);
            } else {
                std::ofstream f(bench_csv_path, std::ios::binary);
                f << bench_csv(rep);
                if (!f) throw data_error("IoError", "cannot write " + bench_csv_path);
            }
            std::cout << bench_table(rep);
            return 0;
        }

        if (*bglc) {
            const BoxList pred = read_boxes(bgl_pred);
            const BoxList gt = read_boxes(bgl_gt);
            // Class labels come from the ground-truth file.
            const auto terms = bgl_terms(pred.boxes, gt.boxes, gt.classes, cfg.bgl);
            std::vector<double> m, t, l, tot;
            std::cout << "idx,mahalanobis,trace,logdet,total\n";
            for (std::size_t i = 0; i < terms.size(); ++i) {
                const KlTerms& k = terms[i];
                std::cout << i << ',' << fmt9(k.mahalanobis) << ',' << fmt9(k.trace) << ',' << fmt9(k.logdet) << ','
                          << fmt9(k.total) << "\n";
                m.push_back(k.mahalanobis);
                t.push_back(k.trace);
                l.push_back(k.logdet);
                tot.push_back(k.total);
            }
            const double n = static_cast<double>(terms.size());
            std::cout << "mean," << fmt9(pairwise_sum(m.data(), m.size()) / n) << ','
                      << fmt9(pairwise_sum(t.data(), t.size()) / n) << ','
                      << fmt9(pairwise_sum(l.data(), l.size()) / n) << ','
                      << fmt9(pairwise_sum(tot.data(), tot.size()) / n) << "\n";
            if (bgl_grad) {
                double worst = 0.0;
                for (std::size_t i = 0; i < terms.size(); ++i) {
                    const double a = cfg.bgl.a_for(gt.classes[i]);
                    worst = std::max(worst, gradient_rel_error(bgl_gradient(pred.boxes[i], gt.boxes[i], a),
                                                               bgl_gradient_fd(pred.boxes[i], gt.boxes[i], a)));
                }
                std::cout << "grad_check_max_rel_error=" << fmt9(worst) << "\n";
                if (!(worst < 1e-4)) return report(ErrorKind::Gate, "GradCheckFailed", "max rel error " + fmt9(worst));
            }
            return 0;
        }

        if (*self) {
            SelftestOptions o;
            if (!self_weights.empty()) o.weights_path = self_weights;
            const auto results = run_selftest(o);
            std::vector<std::string> failed;
            for (const auto& r : results) {
                std::cout << (r.passed ? "PASS " : "FAIL ") << r.name;
                if (!r.passed) std::cout << " (" << one_line(r.detail) << ")";
                std::cout << "\n";
                if (!r.passed) failed.push_back(r.name);
            }
            if (failed.empty()) {
                std::cout << "selftest: all " << results.size() << " checks passed\n";
                return 0;
            }
            std::string names;
            for (const auto& f : failed) names += (names.empty() ? "" : ",") + f;
            return report(ErrorKind::Gate, "SelftestFailed", "failed checks: " + names);
        }
    } catch (const Error& e) {
        return report(e.kind(), e.code(), e.what());
    } catch (const std::bad_alloc&) {
        return report(ErrorKind::Data, "OutOfMemory", "allocation failed");
    } catch (const std::exception& e) {
        return report(ErrorKind::Data, "Unexpected", e.what());
    }
    return 0;
}
