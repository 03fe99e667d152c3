#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace detreg {

/// Static-partition parallel loop. Work items write only their own slots,
/// so the result is identical for any thread count; reductions over the
/// produced arrays stay sequential.
template <typename Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    if (count == 0) return;
    if (threads <= 1 || count < 2) {
        fn(std::size_t{0}, count);
        return;
    }
    const std::size_t workers = std::min<std::size_t>(threads, count);
    const std::size_t chunk = (count + workers - 1) / workers;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(count, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

inline unsigned default_thread_count() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

}  // namespace detreg
