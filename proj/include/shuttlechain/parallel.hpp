#pragma once

#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

#include "shuttlechain/common.hpp"

namespace shuttlechain {

// Run fn(i) for i in [0, n) on up to `threads` workers. Results must be
// written into preallocated per-index slots by the caller, which keeps the
// output deterministic regardless of scheduling. The first exception thrown
// by any worker is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
    if (threads == 0) threads = 1;
    const unsigned hw = std::thread::hardware_concurrency();
    if (hw > 0) threads = std::min(threads, hw * 4);
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));

    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }

    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            try {
                // strided assignment: cheap, deterministic, balanced for
                // the homogeneous work items used here
                for (std::size_t i = w; i < n; i += threads) fn(i);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace shuttlechain
