#pragma once

#include <atomic>
#include <functional>
#include <thread>
#include <vector>

namespace rfsf {

// Runs fn(block, begin, end) over a fixed partition of [0, n_items) into
// n_blocks contiguous ranges. The partition depends only on (n_items,
// n_blocks), never on the worker count, so per-block results are
// reproducible for any `jobs`.
inline void parallel_blocks(int n_items, int n_blocks, int jobs,
                            const std::function<void(int, int, int)>& fn) {
    if (n_items <= 0) return;
    if (n_blocks > n_items) n_blocks = n_items;
    auto block_range = [&](int b) {
        int begin = static_cast<int>(static_cast<int64_t>(b) * n_items / n_blocks);
        int end = static_cast<int>(static_cast<int64_t>(b + 1) * n_items / n_blocks);
        return std::pair<int, int>(begin, end);
    };
    if (jobs <= 1 || n_blocks == 1) {
        for (int b = 0; b < n_blocks; ++b) {
            auto [begin, end] = block_range(b);
            fn(b, begin, end);
        }
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            int b = next.fetch_add(1);
            if (b >= n_blocks) return;
            auto [begin, end] = block_range(b);
            fn(b, begin, end);
        }
    };
    int n_threads = std::min(jobs, n_blocks);
    std::vector<std::thread> threads;
    threads.reserve(static_cast<size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
}

}  // namespace rfsf
