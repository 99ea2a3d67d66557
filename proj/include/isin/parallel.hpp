#pragma once

#include <atomic>
#include <thread>
#include <vector>

namespace isin {

/// Run fn(i) for i in [0, n). Results must be written to per-index slots;
/// callers reduce in index order afterwards, so the outcome is
/// independent of the number of jobs.
template <typename Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
    if (jobs <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    auto worker = [&]() {
        for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    };
    std::vector<std::thread> threads;
    const int t = std::min(jobs, n);
    threads.reserve(static_cast<size_t>(t));
    for (int i = 0; i < t; ++i) threads.emplace_back(worker);
    for (auto& th : threads) th.join();
}

}  // namespace isin
