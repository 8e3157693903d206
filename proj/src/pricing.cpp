#include "mpsfin/pricing.hpp"

#include <algorithm>
#include <cmath>

#include "mpsfin/errors.hpp"

namespace mpsfin {

namespace {

constexpr double kSigmaLo = 1e-6;
constexpr double kSigmaHi = 5.0;
constexpr double kPriceTol = 1e-10;

double norm_cdf(double x) { return 0.5 * std::erfc(-x * M_SQRT1_2); }

} // namespace

std::string to_string(OptionKind kind) {
    switch (kind) {
    case OptionKind::European: return "european";
    case OptionKind::Asian: return "asian";
    case OptionKind::Lookback: return "lookback";
    case OptionKind::UpAndOutBarrier: return "barrier";
    }
    throw ContractError("to_string: unknown option kind");
}

OptionKind option_kind_from_string(const std::string& name) {
    if (name == "european") return OptionKind::European;
    if (name == "asian") return OptionKind::Asian;
    if (name == "lookback") return OptionKind::Lookback;
    if (name == "barrier") return OptionKind::UpAndOutBarrier;
    throw ContractError("unknown option kind '" + name + "'");
}

void OptionSpec::validate() const {
    if (!(strike > 0.0)) throw ContractError("OptionSpec: strike must be positive");
    if (kind == OptionKind::UpAndOutBarrier) {
        if (!barrier) throw ContractError("OptionSpec: barrier level required for the up-and-out kind");
        if (!(*barrier > 0.0)) throw ContractError("OptionSpec: barrier must be positive");
    } else if (barrier) {
        throw ContractError("OptionSpec: barrier given for a non-barrier option");
    }
}

double payoff(const OptionSpec& spec, std::span<const double> path) {
    spec.validate();
    if (path.empty()) throw ContractError("payoff: empty path");
    switch (spec.kind) {
    case OptionKind::European:
        return std::max(path.back() - spec.strike, 0.0);
    case OptionKind::Asian: {
        double sum = 0.0;
        for (const double s : path) sum += s;
        return std::max(sum / static_cast<double>(path.size()) - spec.strike, 0.0);
    }
    case OptionKind::Lookback:
        return std::max(*std::max_element(path.begin(), path.end()) - spec.strike, 0.0);
    case OptionKind::UpAndOutBarrier: {
        const double peak = *std::max_element(path.begin(), path.end());
        if (!(peak < *spec.barrier)) return 0.0; // knocked out on touching the barrier
        return std::max(path.back() - spec.strike, 0.0);
    }
    }
    throw ContractError("payoff: unknown option kind");
}

PriceEstimate monte_carlo_price(const OptionSpec& spec, const PathSet& paths) {
    spec.validate();
    if (paths.n_paths < 2) throw ContractError("monte_carlo_price: need at least two paths");
    const double n = static_cast<double>(paths.n_paths);
    double sum = 0.0;
    for (std::size_t i = 0; i < paths.n_paths; ++i) sum += payoff(spec, paths.stochastic_row(i));
    const double mean = sum / n;
    double ss = 0.0;
    for (std::size_t i = 0; i < paths.n_paths; ++i) {
        const double d = payoff(spec, paths.stochastic_row(i)) - mean;
        ss += d * d;
    }
    const double sample_sd = std::sqrt(ss / (n - 1.0));
    return {mean, sample_sd / std::sqrt(n), paths.n_paths};
}

double bs_call_price(double s0, double k, double t, double sigma) {
    if (!(s0 > 0.0) || !(k > 0.0) || !(t > 0.0))
        throw ContractError("bs_call_price: s0, k, t must be positive");
    if (!(sigma >= 0.0)) throw ContractError("bs_call_price: sigma must be non-negative");
    const double vol = sigma * std::sqrt(t);
    if (vol < 1e-12) return std::max(s0 - k, 0.0);
    const double d_plus = std::log(s0 / k) / vol + 0.5 * vol;
    const double d_minus = d_plus - vol;
    return norm_cdf(d_plus) * s0 - norm_cdf(d_minus) * k;
}

double implied_vol(double c, double s0, double k, double t) {
    if (!(s0 > 0.0) || !(k > 0.0) || !(t > 0.0))
        throw ContractError("implied_vol: s0, k, t must be positive");
    const double intrinsic = std::max(s0 - k, 0.0);
    if (!(c > intrinsic))
        throw NumericalError("implied_vol: price " + std::to_string(c) +
                             " does not exceed the intrinsic bound max(s0-k,0) = " +
                             std::to_string(intrinsic));
    if (!(c < s0))
        throw NumericalError("implied_vol: price " + std::to_string(c) +
                             " reaches the upper bound s0 = " + std::to_string(s0));

    auto f = [&](double sigma) { return bs_call_price(s0, k, t, sigma) - c; };
    double lo = kSigmaLo, hi = kSigmaHi;
    double flo = f(lo), fhi = f(hi);
    if (flo > 0.0) return lo; // price sits below the resolution of the bracket's low edge
    if (fhi < 0.0)
        throw NumericalError("implied_vol: price " + std::to_string(c) +
                             " exceeds the Black-Scholes price at the bracket top sigma = 5");

    // Bisection interleaved with secant steps; vega > 0 makes the root
    // unique, and the shrinking bracket guarantees convergence.
    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        const double sec = lo - flo * (hi - lo) / (fhi - flo);
        mid = (iter % 2 == 0 && sec > lo && sec < hi) ? sec : 0.5 * (lo + hi);
        const double fm = f(mid);
        if (std::fabs(fm) <= kPriceTol) return mid;
        if (fm < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
            fhi = fm;
        }
    }
    return mid;
}

} // namespace mpsfin
