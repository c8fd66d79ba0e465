#pragma once

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>
#include <vector>

namespace ecslab {

inline int default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

/// out[i] = fn(i) for i in [0, n) on up to `jobs` threads. Results are stored
/// by index, so the output never depends on scheduling. The first exception
/// (lowest index) is rethrown after all workers finish.
template <typename R, typename F>
std::vector<R> parallel_map(std::size_t n, int jobs, F&& fn) {
    std::vector<R> out(n);
    std::vector<std::exception_ptr> errs(n);
    const std::size_t workers = std::min<std::size_t>(std::max(1, jobs), n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
            try {
                out[i] = fn(i);
            } catch (...) {
                errs[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
    for (auto& e : errs)
        if (e) std::rethrow_exception(e);
    return out;
}

} // namespace ecslab
