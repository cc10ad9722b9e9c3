#include "rgdet/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace rgdet {

namespace {
std::atomic<unsigned> g_threads{0};
} // namespace

void set_thread_count(unsigned n) { g_threads.store(n); }

unsigned thread_count() {
    const unsigned n = g_threads.load();
    if (n != 0) return n;
    return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t n, const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    const std::size_t workers = std::min<std::size_t>(thread_count(), n);
    if (workers <= 1) {
        body(0, n);
        return;
    }
    const std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t b = w * chunk;
        const std::size_t e = std::min(n, b + chunk);
        if (b >= e) break;
        pool.emplace_back([&body, b, e] { body(b, e); });
    }
    for (auto& t : pool) t.join();
}

} // namespace rgdet
