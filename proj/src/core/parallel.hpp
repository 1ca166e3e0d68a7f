#pragma once

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace skl {

// Worker count resolution: explicit flag > CL_WORKERS env > hardware size.
inline unsigned resolve_workers(unsigned flag_value) {
    if (flag_value >= 1) return flag_value;
    if (const char* env = std::getenv("CL_WORKERS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw >= 1 ? hw : 1;
}

// Run fn(i) for i in [0, count). Each index is processed exactly once; fn must
// be safe to call concurrently and must not depend on execution order. The
// first exception thrown (by lowest index) is rethrown on the calling thread.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
    if (count == 0) return;
    if (workers <= 1 || count == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::atomic<bool> failed{false};

    auto body = [&] {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
                failed.store(true);
            }
        }
    };

    const unsigned n_threads = static_cast<unsigned>(
        std::min<std::size_t>(workers, count));
    std::vector<std::thread> pool;
    pool.reserve(n_threads - 1);
    for (unsigned t = 0; t + 1 < n_threads; ++t) pool.emplace_back(body);
    body();
    for (auto& th : pool) th.join();

    if (failed.load())
        for (auto& err : errors)
            if (err) std::rethrow_exception(err);
}

}  // namespace skl
