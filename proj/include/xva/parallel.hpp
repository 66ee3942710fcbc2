#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace xva {

/// Runs `fn(block_index, begin, end)` over fixed-size blocks of [0, n).
///
/// Block boundaries depend only on `n` and `block_size`, never on `threads`, so
/// per-block partial results combined in block order are scheduling-independent.
template <class Fn>
void for_each_block(std::size_t n, std::size_t block_size, unsigned threads, Fn&& fn) {
    if (n == 0)
        return;
    block_size = std::max<std::size_t>(block_size, 1);
    const std::size_t blocks = (n + block_size - 1) / block_size;
    auto run_block = [&](std::size_t b) {
        const std::size_t begin = b * block_size;
        fn(b, begin, std::min(n, begin + block_size));
    };
    threads = std::max(1u, threads);
    if (threads == 1 || blocks == 1) {
        for (std::size_t b = 0; b < blocks; ++b)
            run_block(b);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= blocks)
                return;
            try {
                run_block(b);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t count = std::min<std::size_t>(threads, blocks);
    pool.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
        pool.emplace_back(worker);
    for (auto& t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

/// Sum in a fixed pairwise order.
template <class Range>
double pairwise_sum(const Range& values, std::size_t begin, std::size_t end) {
    if (end - begin <= 8) {
        double s = 0.0;
        for (std::size_t i = begin; i < end; ++i)
            s += values[i];
        return s;
    }
    const std::size_t mid = begin + (end - begin) / 2;
    return pairwise_sum(values, begin, mid) + pairwise_sum(values, mid, end);
}

template <class Range>
double pairwise_sum(const Range& values) {
    return pairwise_sum(values, 0, values.size());
}

} // namespace xva
