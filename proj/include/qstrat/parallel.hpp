#pragma once

// Minimal fork-join helper. Work items write into preassigned slots, so
// results are identical regardless of thread count or interleaving.

#include <cstdlib>
#include <functional>
#include <thread>
#include <vector>

namespace qstrat {

// Configured worker count: QSTRAT_THREADS env var, else hardware threads.
inline int worker_count() {
    if (const char* env = std::getenv("QSTRAT_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

// Runs body(i) for i in [0, count) on a static chunk schedule.
// body must be pure apart from writing to its own slot.
inline void parallel_for(std::size_t count,
                         const std::function<void(std::size_t)>& body,
                         int threads = 0) {
    if (threads <= 0) threads = worker_count();
    if (threads == 1 || count <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    const std::size_t nworkers =
        std::min<std::size_t>(static_cast<std::size_t>(threads), count);
    std::vector<std::thread> pool;
    pool.reserve(nworkers);
    for (std::size_t w = 0; w < nworkers; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += nworkers) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace qstrat
