#pragma once

#include <cstdint>
#include <utility>

#include "mpsfin/paths.hpp"
#include "mpsfin/rng.hpp"

namespace mpsfin {

// Parameters of the Heston stochastic-volatility model under a zero
// risk-free rate:
//   dS = sqrt(v) S dW_S,   dv = kappa (theta - v) dt + xi sqrt(v) dW_v,
// with corr(dW_S, dW_v) = rho. Defaults follow the benchmark setting
// (daily steps over one trading week).
struct HestonParams {
    double s0 = 100.0;
    double v0 = 0.04;  // initial squared volatility
    double kappa = 1.0;
    double theta = 0.04;
    double xi = 2.0;
    double rho = -0.7;
    double dt = 1.0 / 250.0;
    std::size_t n_steps = 5;

    void validate() const;
};

// (z_s, z_v) with z_s standard normal and z_v = rho z_s + sqrt(1-rho^2) z',
// z' independent standard normal. Consumes exactly two normals from `rng`,
// z_s first.
std::pair<double, double> correlated_normal_pair(double rho, RngStream& rng);

// Euler-Maruyama paths with reflected variance (v <- -v whenever a step
// makes it negative, before the next step uses sqrt(v)). The result has
// n_steps + 1 columns including the deterministic t_0 = s0 column. Path i
// draws from the dedicated stream (seed, heston domain, i), so output is
// reproducible and independent of the thread count.
PathSet heston_paths(const HestonParams& params, std::size_t n_paths, std::uint64_t seed,
                     std::size_t n_threads = 1);

} // namespace mpsfin
