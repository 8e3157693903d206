#pragma once

#include <cstdint>
#include <vector>

#include "mpsfin/mps.hpp"
#include "mpsfin/paths.hpp"
#include "mpsfin/rng.hpp"

namespace mpsfin {

struct SampleBatch {
    SymbolPaths symbols;
    PathSet decoded; // decode() applied elementwise, first column is t_1
    std::uint64_t seed = 0;
};

// Exact autoregressive sampler. Holds a right-canonical copy of the model so
// each conditional P(x_k | x_1..x_{k-1}) is the squared norm of the running
// left vector pushed through site k; the joint law of one draw is exactly
// the model's Born distribution. Construction costs one gauge sweep, each
// draw O(M P D^2). Immutable after construction and safe to share across
// threads.
class MpsSampler {
public:
    explicit MpsSampler(const Mps& mps);

    // Draws one symbol path, consuming exactly one uniform per site from
    // `rng`. If `log_prob` is given it receives the log of the product of
    // the conditionals used, which equals log(amplitude^2 / Z) of the
    // returned path. At each site the inverse CDF breaks ties toward the
    // lower symbol.
    std::vector<std::uint32_t> sample(RngStream& rng, double* log_prob = nullptr) const;

    const Mps& gauged() const { return model_; }

private:
    Mps model_;
};

// Single draw from a caller-supplied stream.
std::vector<std::uint32_t> sample_one(const Mps& mps, RngStream& rng, double* log_prob = nullptr);

// n independent draws; path i consumes the dedicated stream
// (seed, sample-path domain, i), so the batch is reproducible and identical
// for every thread count. Decoded values use the model's quantizer; `dt` is
// recorded as the decoded PathSet's step metadata.
SampleBatch sample_paths(const Mps& mps, std::size_t n, std::uint64_t seed,
                         std::size_t n_threads = 1, double dt = 0.0);

} // namespace mpsfin
