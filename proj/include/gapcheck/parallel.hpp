#pragma once

#include <atomic>
#include <thread>
#include <vector>

namespace gapcheck::detail {

/// Runs fn(i) for i in [0, n) on up to `parallelism` worker threads. Each
/// index is processed exactly once; fn writes results into its own slot, so
/// output does not depend on scheduling order. fn must not throw.
template <typename Fn>
void parallel_for(size_t n, int parallelism, Fn&& fn) {
    if (n == 0) return;
    const size_t workers = std::min<size_t>(n, static_cast<size_t>(std::max(1, parallelism)));
    if (workers == 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::vector<std::thread> threads;
    threads.reserve(workers);
    for (size_t w = 0; w < workers; ++w) {
        threads.emplace_back([&] {
            for (size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    }
    for (auto& t : threads) t.join();
}

} // namespace gapcheck::detail
