#pragma once

#include <optional>
#include <span>
#include <string>

#include "mpsfin/paths.hpp"

namespace mpsfin {

enum class OptionKind { European, Asian, Lookback, UpAndOutBarrier };

std::string to_string(OptionKind kind);
OptionKind option_kind_from_string(const std::string& name);

// A call option on the discrete path S_{t_1}..S_{t_M}. `barrier` is required
// exactly for the up-and-out kind.
struct OptionSpec {
    OptionKind kind = OptionKind::European;
    double strike = 100.0;
    std::optional<double> barrier;

    void validate() const;
};

// Discrete payoffs, zero risk-free rate:
//   European:  max(S_M - K, 0)
//   Asian:     max(mean_j S_j - K, 0)
//   Lookback:  max(max_j S_j - K, 0)
//   Barrier:   max(S_M - K, 0) if max_j S_j < B (strictly), else 0.
// `path` holds the stochastic observations t_1..t_M only.
double payoff(const OptionSpec& spec, std::span<const double> path);

struct PriceEstimate {
    double mean = 0.0;
    double std_error = 0.0; // sample standard deviation / sqrt(n)
    std::size_t n_samples = 0;
};

// Sample mean and standard error of the payoff over the stochastic columns
// of `paths` (a leading t_0 column is skipped).
PriceEstimate monte_carlo_price(const OptionSpec& spec, const PathSet& paths);

// Black-Scholes call at zero rate: C = Phi(d+) s0 - Phi(d-) k, with Phi
// computed from erfc. The sigma -> 0 limit degenerates to max(s0 - k, 0).
double bs_call_price(double s0, double k, double t, double sigma);

// The unique sigma in [1e-6, 5] with bs_call_price(s0, k, t, sigma) = c,
// bracketed root search to |price error| <= 1e-10. Prices outside the
// zero-rate no-arbitrage bounds max(s0-k, 0) < c < s0 raise NumericalError
// naming the violated bound.
double implied_vol(double c, double s0, double k, double t);

} // namespace mpsfin
