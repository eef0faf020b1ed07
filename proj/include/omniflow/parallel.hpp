#pragma once

// Row-parallel loops and reductions whose results do not depend on the
// number of worker threads.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <span>
#include <thread>
#include <vector>

namespace omniflow {

namespace detail {

inline int default_thread_count() {
    if (const char* env = std::getenv("OMNIFLOW_THREADS")) {
        int n = std::atoi(env);
        if (n > 0)
            return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

inline std::atomic<int>& thread_cap() {
    static std::atomic<int> cap{default_thread_count()};
    return cap;
}

} // namespace detail

inline void set_thread_count(int n) { detail::thread_cap().store(std::max(1, n)); }
inline int thread_count() { return detail::thread_cap().load(); }

// Calls fn(i) for i in [begin, end). Iterations are split into contiguous
// chunks, one per worker; fn must not depend on which worker runs it.
template <class Fn>
void parallel_for(std::ptrdiff_t begin, std::ptrdiff_t end, Fn&& fn) {
    const std::ptrdiff_t n = end - begin;
    if (n <= 0)
        return;
    const std::ptrdiff_t workers = std::min<std::ptrdiff_t>(thread_count(), n);
    if (workers <= 1) {
        for (std::ptrdiff_t i = begin; i < end; ++i)
            fn(i);
        return;
    }

    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto run_chunk = [&](std::ptrdiff_t w) {
        const std::ptrdiff_t lo = begin + n * w / workers;
        const std::ptrdiff_t hi = begin + n * (w + 1) / workers;
        try {
            for (std::ptrdiff_t i = lo; i < hi; ++i)
                fn(i);
        } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure)
                failure = std::current_exception();
        }
    };

    {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(workers - 1));
        for (std::ptrdiff_t w = 1; w < workers; ++w)
            pool.emplace_back(run_chunk, w);
        run_chunk(0);
    }
    if (failure)
        std::rethrow_exception(failure);
}

// Fixed-shape pairwise summation: the reduction tree depends only on the
// length of the input.
inline double pairwise_sum(std::span<const double> values) {
    if (values.empty())
        return 0.0;
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values)
            s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

} // namespace omniflow
