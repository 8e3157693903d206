#pragma once

#include <cstddef>
#include <functional>

namespace mpsfin {

// Runs fn(begin, end) over fixed-size blocks of [0, n). The block grid is a
// function of n only, never of n_threads, so per-block results (and any
// block-ordered reduction built on them) are identical for every worker
// count. Blocks are dispatched to std::thread workers when n_threads > 1.
void parallel_for_blocks(std::size_t n, std::size_t n_threads,
                         const std::function<void(std::size_t, std::size_t)>& fn);

inline constexpr std::size_t kParallelBlock = 1024;

} // namespace mpsfin
