#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace roving {

inline unsigned default_workers() {
    return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(0) .. fn(tasks-1) on up to `workers` threads. Task results must not depend on
/// which thread runs them; the first exception is rethrown after all threads join.
template <class Fn>
void parallel_for(std::size_t tasks, unsigned workers, Fn &&fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(tasks, 1))));
    if (workers == 1) {
        for (std::size_t t = 0; t < tasks; ++t) fn(t);
        return;
    }
    std::exception_ptr failure;
    std::mutex guard;
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t t = w; t < tasks; t += workers) {
                try {
                    fn(t);
                } catch (...) {
                    std::lock_guard lock(guard);
                    if (!failure) failure = std::current_exception();
                    return;
                }
            }
        });
    }
    for (auto &th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace roving
