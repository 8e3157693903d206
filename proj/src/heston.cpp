#include "mpsfin/heston.hpp"

#include <cmath>
#include <string>

#include "mpsfin/errors.hpp"
#include "mpsfin/parallel.hpp"

namespace mpsfin {

void HestonParams::validate() const {
    if (!(s0 > 0.0)) throw ContractError("HestonParams: s0 must be positive");
    if (!(v0 >= 0.0)) throw ContractError("HestonParams: v0 must be non-negative");
    if (!(kappa >= 0.0) || !(theta >= 0.0) || !(xi >= 0.0))
        throw ContractError("HestonParams: kappa, theta, xi must be non-negative");
    if (!(std::fabs(rho) <= 1.0)) throw ContractError("HestonParams: |rho| must not exceed 1");
    if (!(dt > 0.0)) throw ContractError("HestonParams: dt must be positive");
    if (n_steps < 1) throw ContractError("HestonParams: need at least one step");
}

std::pair<double, double> correlated_normal_pair(double rho, RngStream& rng) {
    if (!(std::fabs(rho) <= 1.0)) throw ContractError("correlated_normal_pair: |rho| must not exceed 1");
    const double z_s = rng.normal();
    const double z_perp = rng.normal();
    const double z_v = rho * z_s + std::sqrt(1.0 - rho * rho) * z_perp;
    return {z_s, z_v};
}

PathSet heston_paths(const HestonParams& params, std::size_t n_paths, std::uint64_t seed,
                     std::size_t n_threads) {
    params.validate();
    if (n_paths < 1) throw ContractError("heston_paths: need at least one path");

    const std::size_t cols = params.n_steps + 1;
    PathSet out;
    out.n_paths = n_paths;
    out.n_cols = cols;
    out.first_time_index = 0;
    out.dt = params.dt;
    out.values.resize(n_paths * cols);

    const double sqrt_dt = std::sqrt(params.dt);
    parallel_for_blocks(n_paths, n_threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            RngStream rng(seed, rng_domain::kHestonPath, static_cast<std::uint32_t>(i));
            double s = params.s0;
            double v = params.v0;
            double* row = out.values.data() + i * cols;
            row[0] = s;
            for (std::size_t step = 0; step < params.n_steps; ++step) {
                const auto [z_s, z_v] = correlated_normal_pair(params.rho, rng);
                const double root_v = std::sqrt(v);
                s += root_v * s * sqrt_dt * z_s;
                v += params.kappa * (params.theta - v) * params.dt + params.xi * root_v * sqrt_dt * z_v;
                if (v < 0.0) v = -v; // reflection keeps the CIR variance non-negative
                if (!std::isfinite(s) || !std::isfinite(v))
                    throw NumericalError("heston_paths: non-finite state on path " +
                                         std::to_string(i) + " at step " + std::to_string(step + 1));
                row[step + 1] = s;
            }
        }
    });
    return out;
}

} // namespace mpsfin
