#include "mpsfin/parallel.hpp"

#include <atomic>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mpsfin {

void parallel_for_blocks(std::size_t n, std::size_t n_threads,
                         const std::function<void(std::size_t, std::size_t)>& fn) {
    if (n == 0) return;
    const std::size_t n_blocks = (n + kParallelBlock - 1) / kParallelBlock;
    if (n_threads <= 1 || n_blocks == 1) {
        for (std::size_t b = 0; b < n_blocks; ++b)
            fn(b * kParallelBlock, std::min(n, (b + 1) * kParallelBlock));
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const std::size_t b = next.fetch_add(1);
            if (b >= n_blocks) return;
            try {
                fn(b * kParallelBlock, std::min(n, (b + 1) * kParallelBlock));
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                next.store(n_blocks);
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    const std::size_t spawn = std::min(n_threads, n_blocks);
    pool.reserve(spawn);
    for (std::size_t t = 0; t < spawn; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (error) std::rethrow_exception(error);
}

} // namespace mpsfin
