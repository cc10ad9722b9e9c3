#include "rgdet/bench.hpp"

#include "rgdet/config.hpp"
#include "rgdet/error.hpp"
#include "rgdet/feature_agg.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>

namespace rgdet {

std::uint64_t matrix_checksum(const std::vector<double>& values) {
    std::uint64_t acc = 0;
    for (double v : values) acc += static_cast<std::uint64_t>(std::llround(v * 1e6));
    return acc;
}

namespace {

struct Impl {
    const char* name;
    std::function<Matrix(const PointCloud&, const LinearLayer&)> run;
};

double percentile(std::vector<double> v, double q) {
    std::sort(v.begin(), v.end());
    const std::size_t idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
    return v[std::min(idx, v.size() - 1)];
}

} // namespace

BenchReport run_lfa_bench(const BenchOptions& opts) {
    if (opts.reps == 0) throw usage_error("InvalidValue", "reps must be >= 1");
    if (!(opts.radius > 0.0)) throw usage_error("InvalidValue", "radius must be > 0");

    const std::vector<Impl> impls = {
        {"traversal", [&](const PointCloud& c, const LinearLayer& l) { return lfa_traversal(c, l, opts.radius); }},
        {"broadcast_mask",
         [&](const PointCloud& c, const LinearLayer& l) { return lfa_broadcast_mask(c, l, opts.radius, opts.mem_cap_bytes); }},
        {"index_scatter", [&](const PointCloud& c, const LinearLayer& l) { return lfa_index_scatter(c, l, opts.radius); }},
    };
    const PgeParams params = init_weights(opts.seed, {opts.c_raw, opts.channels, 1, true});

    BenchReport report;
    for (std::size_t n : opts.sizes) {
        SceneSpec spec;
        spec.seed = opts.seed;
        spec.n_points = n;
        spec.c_raw = opts.c_raw;
        spec.n_clusters = std::max<std::size_t>(1, n / 10);
        const PointCloud cloud = generate_scene(spec);
        const std::size_t pairs = n == 0 ? 0 : build_neighbor_index(cloud, opts.radius).size();

        // Correctness gate first.
        std::vector<BenchRow> rows;
        std::optional<Matrix> reference;
        for (const auto& impl : impls) {
            BenchRow row;
            row.impl = impl.name;
            row.n = n;
            row.pairs = pairs;
            row.reps = opts.reps;
            if (row.impl == "traversal") row.mem_bytes = lfa_traversal_bytes(opts.c_raw, opts.channels);
            if (row.impl == "broadcast_mask") row.mem_bytes = lfa_broadcast_mask_bytes(n, opts.c_raw);
            if (row.impl == "index_scatter") row.mem_bytes = lfa_index_scatter_bytes(n, pairs, opts.c_raw, opts.channels);
            try {
                const Matrix out = impl.run(cloud, params.lfa);
                row.checksum = matrix_checksum(out.data);
                if (!reference) reference = out;
                for (std::size_t i = 0; i < out.data.size(); ++i)
                    row.max_abs_diff = std::max(row.max_abs_diff, std::abs(out.data[i] - reference->data[i]));
                if (!(row.max_abs_diff <= opts.tolerance)) {
                    row.status = "gate-failed";
                    report.gate_passed = false;
                }
            } catch (const Error& e) {
                if (e.code() != "AllocationLimit") throw;
                row.status = "OOM-guard";
            }
            rows.push_back(row);
        }

        if (report.gate_passed) {
            // Round-robin over implementations so drift in machine speed hits
            // all of them alike; each timed run directly follows an untimed
            // run of the same implementation so its caches are warm.
            std::vector<std::vector<double>> ms(impls.size());
            for (std::size_t rep = 0; rep < opts.reps; ++rep)
                for (std::size_t k = 0; k < impls.size(); ++k) {
                    if (rows[k].status != "ok") continue;
                    (void)impls[k].run(cloud, params.lfa);
                    const auto t0 = std::chrono::steady_clock::now();
                    const Matrix out = impls[k].run(cloud, params.lfa);
                    const auto t1 = std::chrono::steady_clock::now();
                    ms[k].push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
                    if (out.rows != n) throw Error(ErrorKind::Gate, "BenchGate", "output size changed between runs");
                }
            for (std::size_t k = 0; k < impls.size(); ++k) {
                if (ms[k].empty()) continue;
                rows[k].mean_ms = std::accumulate(ms[k].begin(), ms[k].end(), 0.0) / static_cast<double>(ms[k].size());
                rows[k].median_ms = percentile(ms[k], 0.5);
                rows[k].p95_ms = percentile(ms[k], 0.95);
            }
        }
        report.rows.insert(report.rows.end(), rows.begin(), rows.end());
    }
    return report;
}

std::string bench_csv(const BenchReport& report) {
    std::string out = "impl,n,pairs,reps,mean_ms,median_ms,p95_ms,mem_bytes,checksum,max_abs_diff,status\n";
    for (const auto& r : report.rows) {
        char sum[32];
        std::snprintf(sum, sizeof(sum), "%016llx", static_cast<unsigned long long>(r.checksum));
        out += r.impl + "," + std::to_string(r.n) + "," + std::to_string(r.pairs) + "," + std::to_string(r.reps) + "," +
               fmt9(r.mean_ms) + "," + fmt9(r.median_ms) + "," + fmt9(r.p95_ms) + "," + std::to_string(r.mem_bytes) +
               "," + sum + "," + fmt9(r.max_abs_diff) + "," + r.status + "\n";
    }
    return out;
}

std::string bench_table(const BenchReport& report) {
    std::string out;
    char line[200];
    std::snprintf(line, sizeof(line), "%-16s %7s %9s %12s %12s %14s %5s  %s\n", "algorithm", "N", "pairs", "median ms",
                  "mean ms", "memory MB", "rank", "status");
    out += line;
    for (const auto& r : report.rows) {
        // Rank by median among the timed rows of the same N.
        std::string rank = "-";
        if (r.status == "ok") {
            std::size_t k = 1;
            for (const auto& o : report.rows)
                if (o.n == r.n && o.status == "ok" && o.median_ms < r.median_ms) ++k;
            rank = std::to_string(k);
        }
        std::snprintf(line, sizeof(line), "%-16s %7zu %9zu %12s %12s %14s %5s  %s\n", r.impl.c_str(), r.n, r.pairs,
                      fmt9(r.median_ms).c_str(), fmt9(r.mean_ms).c_str(),
                      fmt9(static_cast<double>(r.mem_bytes) / (1024.0 * 1024.0)).c_str(), rank.c_str(), r.status.c_str());
        out += line;
    }
    return out;
}

} // namespace rgdet
