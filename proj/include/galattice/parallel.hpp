#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <functional>
#include <thread>
#include <vector>

namespace galattice {

/// Runs fn(i, worker) for i in [0, n) on up to `threads` workers. Worker w
/// handles i = w, w + T, w + 2T, ...; the first exception is rethrown.
inline void parallel_for(std::size_t n, std::size_t threads,
                         const std::function<void(std::size_t index, std::size_t worker)>& fn) {
    const std::size_t t = std::max<std::size_t>(1, std::min(threads, n));
    if (t == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i, 0);
        return;
    }
    std::vector<std::exception_ptr> errors(t);
    std::vector<std::thread> pool;
    pool.reserve(t);
    for (std::size_t w = 0; w < t; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t i = w; i < n; i += t) fn(i, w);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace galattice
