#pragma once

#include <atomic>
#include <cstdlib>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace covkit {

/// Worker count resolution: explicit request > COVKIT_WORKERS env > hardware.
inline int resolve_workers(int requested = 0) {
    if (requested > 0) return requested;
    if (const char* env = std::getenv("COVKIT_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0) return v;
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc > 0 ? static_cast<int>(hc) : 1;
}

/// Fixed chunk width used by all deterministic reductions. Chunk boundaries
/// depend only on the task count, never on the worker count, so per-chunk
/// partial results can be combined in chunk order and reproduce bit-identical
/// output for any number of workers.
inline constexpr std::size_t kChunkSize = 32;

inline std::size_t chunk_count(std::size_t tasks, std::size_t chunk = kChunkSize) {
    return (tasks + chunk - 1) / chunk;
}

/// Run fn(chunk_index, begin, end) over [0, tasks) split into fixed chunks.
/// Workers pull chunks from a shared counter; within a chunk, indices are
/// processed sequentially by one worker. Exceptions are rethrown on the
/// calling thread (first one wins).
inline void parallel_chunks(std::size_t tasks, int workers,
                            const std::function<void(std::size_t, std::size_t, std::size_t)>& fn,
                            std::size_t chunk = kChunkSize) {
    const std::size_t nchunks = chunk_count(tasks, chunk);
    if (nchunks == 0) return;
    workers = resolve_workers(workers);
    if (workers > static_cast<int>(nchunks)) workers = static_cast<int>(nchunks);

    if (workers <= 1) {
        for (std::size_t c = 0; c < nchunks; ++c) {
            std::size_t b = c * chunk;
            std::size_t e = std::min(tasks, b + chunk);
            fn(c, b, e);
        }
        return;
    }

    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;

    auto body = [&]() {
        for (;;) {
            std::size_t c = next.fetch_add(1);
            if (c >= nchunks) return;
            std::size_t b = c * chunk;
            std::size_t e = std::min(tasks, b + chunk);
            try {
                fn(c, b, e);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(body);
    for (auto& t : pool) t.join();

    if (first_error) std::rethrow_exception(first_error);
}

/// Map [0, tasks) -> per-index results with deterministic storage.
template <typename T, typename Fn>
std::vector<T> parallel_map(std::size_t tasks, int workers, Fn&& fn) {
    std::vector<T> out(tasks);
    parallel_chunks(tasks, workers, [&](std::size_t, std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) out[i] = fn(i);
    });
    return out;
}

} // namespace covkit
