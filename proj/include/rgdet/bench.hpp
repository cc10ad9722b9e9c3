#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace rgdet {

struct BenchOptions {
    std::vector<std::size_t> sizes{1000};
    std::size_t c_raw = 4;
    std::size_t channels = 64;
    double radius = 0.32;
    std::size_t reps = 5;
    std::uint64_t seed = 0;
    std::size_t mem_cap_bytes = std::size_t{1} << 30;
    /// Gate tolerance against the traversal output.
    double tolerance = 1e-9;
};

struct BenchRow {
    std::string impl;     // traversal | broadcast_mask | index_scatter
    std::size_t n = 0;
    std::size_t pairs = 0;
    std::size_t reps = 0;
    double mean_ms = 0.0;
    double median_ms = 0.0;
    double p95_ms = 0.0;
    std::size_t mem_bytes = 0;  // analytic transient-buffer estimate
    std::uint64_t checksum = 0;
    double max_abs_diff = 0.0;  // vs traversal
    std::string status = "ok";  // ok | OOM-guard | gate-failed
};

struct BenchReport {
    std::vector<BenchRow> rows;
    bool gate_passed = true;
};

/// Scenes come from generate_scene (seed, n, n / 10 clusters, 0.5 m spread,
/// default range). For each size: run every implementation once, compare to
/// traversal (the gate), then time `reps` runs of each. Rows of an
/// implementation that hit the allocation cap are marked OOM-guard.
BenchReport run_lfa_bench(const BenchOptions& opts);

/// Order-independent digest of values quantised to 1e-6.
std::uint64_t matrix_checksum(const std::vector<double>& values);

std::string bench_csv(const BenchReport& report);
std::string bench_table(const BenchReport& report);

} // namespace rgdet
