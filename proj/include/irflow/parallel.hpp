#pragma once

#include <algorithm>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace irflow {

// Runs fn(i) for i in [0, n), striped over at most `threads` workers.  Callers
// write into pre-sized slots and reduce in index order afterwards, so results
// do not depend on the thread count.  The first captured exception (by worker
// index) is rethrown after all workers join.
inline void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
    if (threads <= 1 || n <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    const int n_workers = std::min(threads, n);
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(n_workers));
    pool.reserve(static_cast<size_t>(n_workers));
    for (int w = 0; w < n_workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int i = w; i < n; i += n_workers) fn(i);
            } catch (...) {
                errors[static_cast<size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace irflow
