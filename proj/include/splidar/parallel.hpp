#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <thread>
#include <vector>

namespace splidar {

/// Global worker-thread cap. 0 means use std::thread::hardware_concurrency().
inline unsigned& thread_count() {
    static unsigned n = 0;
    return n;
}

inline void set_thread_count(unsigned n) { thread_count() = n; }

inline unsigned effective_threads() {
    unsigned n = thread_count();
    if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
    return n;
}

/// Parallel map over [0, n). Each index must write only to its own output
/// slot; the result is then independent of the thread count and scheduling.
template <typename F>
void parallel_for(std::size_t n, F&& body) {
    if (n == 0) return;
    unsigned workers = effective_threads();
    if (workers <= 1 || n < 64) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
    std::size_t chunk = (n + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        std::size_t lo = w * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

/// Deterministic pairwise-tree sum: the reduction order depends only on the
/// length of the input, never on thread scheduling.
inline double pairwise_sum(std::span<const double> v) {
    if (v.empty()) return 0.0;
    if (v.size() <= 8) {
        double s = 0.0;
        for (double x : v) s += x;
        return s;
    }
    std::size_t half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

}  // namespace splidar
