#pragma once

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace hfsig {

// Worker count: HFSIG_THREADS env var wins, then hardware concurrency.
inline unsigned default_threads() {
    if (const char* env = std::getenv("HFSIG_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hc = std::thread::hardware_concurrency();
    return hc ? hc : 1;
}

inline unsigned resolve_threads(unsigned requested) {
    return requested ? requested : default_threads();
}

// Runs fn(i) for i in [0, n) with each index handled by exactly one
// worker.  Outputs must be disjoint per index; under that contract the
// result is bit-identical no matter how many threads run.
inline void parallel_for(size_t n, unsigned threads,
                         const std::function<void(size_t)>& fn) {
    threads = resolve_threads(threads);
    if (threads <= 1 || n < 2) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    if (threads > n) threads = static_cast<unsigned>(n);
    std::atomic<size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr first_error;
    std::mutex err_mutex;
    const size_t chunk = std::max<size_t>(1, n / (size_t{threads} * 8));
    auto worker = [&] {
        while (!failed.load(std::memory_order_relaxed)) {
            const size_t begin = next.fetch_add(chunk);
            if (begin >= n) return;
            const size_t end = std::min(begin + chunk, n);
            try {
                for (size_t i = begin; i < end; ++i) fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mutex);
                if (!first_error) first_error = std::current_exception();
                failed.store(true, std::memory_order_relaxed);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace hfsig
