#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace cimpact {

/// Runs fn(0) .. fn(n-1) on up to `jobs` threads. Work items must write to
/// disjoint slots so the merged result does not depend on scheduling. The
/// first exception thrown by a worker is rethrown on the caller's thread.
inline void parallel_for_indexed(std::size_t n, int jobs,
                                 const std::function<void(std::size_t)>& fn) {
    if (jobs <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;

    auto worker = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n)
                return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure)
                    failure = std::current_exception();
                return;
            }
        }
    };

    const std::size_t thread_count =
        std::min(static_cast<std::size_t>(jobs), n);
    std::vector<std::thread> pool;
    pool.reserve(thread_count);
    for (std::size_t t = 0; t < thread_count; ++t)
        pool.emplace_back(worker);
    for (auto& th : pool)
        th.join();

    if (failure)
        std::rethrow_exception(failure);
}

} // namespace cimpact
