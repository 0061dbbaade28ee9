#pragma once

#include <algorithm>
#include <cstdint>
#include <thread>
#include <vector>

namespace pickplace {

/// Global worker cap for all parallel loops (CLI --threads). 0 = hardware.
void set_thread_count(int n);
int thread_count();

/// Runs fn(i) for i in [0, n), chunked over threads. Results must be written
/// positionally so the outcome is independent of scheduling.
template <typename Fn>
void parallel_for(int64_t n, Fn&& fn) {
    const int workers = std::min<int64_t>(thread_count(), n);
    if (workers <= 1) {
        for (int64_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    const int64_t chunk = (n + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
        const int64_t begin = w * chunk;
        const int64_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([begin, end, &fn] {
            for (int64_t i = begin; i < end; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace pickplace
