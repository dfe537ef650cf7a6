// Copyright Contributors to the GaussAD Project
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace gad {

/// Resolves a worker request: 0 means hardware concurrency.
inline int resolve_workers(int requested) {
    if (requested > 0) {
        return requested;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(begin, end, worker) over contiguous chunks of [0, n). Each index
/// is visited by exactly one worker; chunk boundaries depend only on n and
/// the worker count. The first exception thrown by a worker is rethrown.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
    const auto w = static_cast<std::size_t>(std::max(1, workers));
    if (w == 1 || n < 2) {
        fn(std::size_t{0}, n, 0);
        return;
    }
    const std::size_t chunks = std::min(w, n);
    std::vector<std::exception_ptr> errors(chunks);
    std::vector<std::thread> threads;
    threads.reserve(chunks);
    for (std::size_t t = 0; t < chunks; ++t) {
        const std::size_t begin = n * t / chunks;
        const std::size_t end = n * (t + 1) / chunks;
        threads.emplace_back([&, begin, end, t] {
            try {
                fn(begin, end, static_cast<int>(t));
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : threads) {
        th.join();
    }
    for (auto& e : errors) {
        if (e) {
            std::rethrow_exception(e);
        }
    }
}

} // namespace gad
