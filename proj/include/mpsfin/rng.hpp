#pragma once

#include <array>
#include <cstdint>

namespace mpsfin {

// All randomness in this project comes from the Philox4x32-10 counter-based
// generator (Salmon et al., "Parallel random numbers: as easy as 1, 2, 3").
// A stream is addressed by (seed, domain, index): the 64-bit seed forms the
// Philox key and (index, domain) occupy the upper counter words, so distinct
// domains and indices give statistically independent streams. Reports that
// echo a seed name the algorithm as "philox4x32-10".
inline constexpr const char* kRngAlgorithm = "philox4x32-10";

// Domain tags carving the counter space into non-overlapping streams.
namespace rng_domain {
inline constexpr std::uint32_t kInitMps = 1;    // index = site
inline constexpr std::uint32_t kHestonPath = 2; // index = path
inline constexpr std::uint32_t kSamplePath = 3; // index = path
inline constexpr std::uint32_t kBootstrap = 4;  // index = pricing run
inline constexpr std::uint32_t kRunSeed = 5;    // index = run, via derive_seed
inline constexpr std::uint32_t kBatch = 6;      // index = gradient step
inline constexpr std::uint32_t kTest = 900;     // scratch streams in tests
} // namespace rng_domain

// One keyed block of Philox4x32-10.
std::array<std::uint32_t, 4> philox4x32_block(const std::array<std::uint32_t, 4>& counter,
                                              const std::array<std::uint32_t, 2>& key);

// A single logical stream of the generator. Cheap to construct; no shared
// state, so any number of streams may be consumed concurrently.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::uint32_t domain, std::uint32_t index);

    std::uint32_t next_u32();
    std::uint64_t next_u64();

    // Uniform integer in [0, n) via the multiply-shift reduction.
    std::uint64_t bounded(std::uint64_t n);

    // Uniform on the open interval (0, 1) with 53-bit resolution.
    double uniform01();

    // Standard normal via the inverse CDF (Wichura's AS241 PPND16 applied to
    // uniform01). Exactly one uniform is consumed per variate.
    double normal();

private:
    void refill();

    std::array<std::uint32_t, 2> key_;
    std::array<std::uint32_t, 4> base_counter_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buffer_{};
    int left_ = 0;
};

// Derives an independent 64-bit seed for a nested run (e.g. per pricing run).
std::uint64_t derive_seed(std::uint64_t seed, std::uint32_t domain, std::uint32_t index);

// Inverse standard normal CDF, AS241 PPND16 (|error| < 1e-15 on (0,1)).
double inverse_normal_cdf(double p);

} // namespace mpsfin
