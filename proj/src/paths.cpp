#include "mpsfin/paths.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mpsfin/errors.hpp"

namespace mpsfin {

void DiscretizationMap::validate() const {
    if (!(x_max > x_min)) throw ContractError("DiscretizationMap: x_max must exceed x_min");
    if (m < 1 || m > 16) throw ContractError("DiscretizationMap: m must lie in [1, 16]");
    if (!std::isfinite(x_min) || !std::isfinite(x_max))
        throw ContractError("DiscretizationMap: bounds must be finite");
}

void PathSet::validate() const {
    if (values.size() != n_paths * n_cols) throw ContractError("PathSet: ragged value matrix");
    if (first_time_index != 0 && first_time_index != 1)
        throw ContractError("PathSet: first_time_index must be 0 or 1");
    for (const double v : values)
        if (!std::isfinite(v)) throw ContractError("PathSet: non-finite value");
}

void SymbolPaths::validate() const {
    if (symbols.size() != n_paths * n_steps) throw ContractError("SymbolPaths: ragged matrix");
    const std::uint32_t limit = std::uint32_t(1) << m;
    for (const std::uint32_t s : symbols)
        if (s >= limit) throw ContractError("SymbolPaths: symbol out of range");
}

std::pair<SymbolPaths, DiscretizationMap> encode(const PathSet& paths, unsigned m) {
    if (paths.n_paths < 1 || paths.n_cols < 1) throw ContractError("encode: empty path set");
    if (m < 1 || m > 16) throw ContractError("encode: m must lie in [1, 16]");
    double lo = paths.values.front(), hi = paths.values.front();
    for (const double v : paths.values) {
        if (!std::isfinite(v)) throw ContractError("encode: non-finite value in path set");
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (!(hi > lo))
        throw ContractError("encode: degenerate dataset, all values equal " + std::to_string(lo));

    DiscretizationMap disc{lo, hi, m};
    const double levels = static_cast<double>((std::uint32_t(1) << m) - 1);
    const double scale = levels / (hi - lo);
    SymbolPaths out;
    out.n_paths = paths.n_paths;
    out.n_steps = paths.n_cols;
    out.m = m;
    out.symbols.resize(paths.values.size());
    for (std::size_t i = 0; i < paths.values.size(); ++i) {
        const double t = (paths.values[i] - lo) * scale;
        auto s = static_cast<std::uint32_t>(std::floor(t));
        s = std::min<std::uint32_t>(s, static_cast<std::uint32_t>(levels));
        out.symbols[i] = s;
    }
    return {std::move(out), disc};
}

double decode(std::uint32_t symbol, const DiscretizationMap& disc) {
    disc.validate();
    if (symbol >= disc.n_symbols())
        throw ContractError("decode: symbol " + std::to_string(symbol) + " out of range for m=" +
                            std::to_string(disc.m));
    const double levels = static_cast<double>(disc.n_symbols() - 1);
    return disc.x_min + static_cast<double>(symbol) / levels * (disc.x_max - disc.x_min);
}

PathSet decode_paths(const SymbolPaths& paths, const DiscretizationMap& disc, double dt) {
    PathSet out;
    out.n_paths = paths.n_paths;
    out.n_cols = paths.n_steps;
    out.first_time_index = 1;
    out.dt = dt;
    out.values.resize(paths.symbols.size());
    for (std::size_t i = 0; i < paths.symbols.size(); ++i)
        out.values[i] = decode(paths.symbols[i], disc);
    return out;
}

SymbolPaths drop_first_column(const SymbolPaths& paths) {
    if (paths.n_steps < 2) throw ContractError("drop_first_column: need at least two columns");
    SymbolPaths out;
    out.n_paths = paths.n_paths;
    out.n_steps = paths.n_steps - 1;
    out.m = paths.m;
    out.symbols.reserve(out.n_paths * out.n_steps);
    for (std::size_t p = 0; p < paths.n_paths; ++p)
        for (std::size_t j = 1; j < paths.n_steps; ++j) out.symbols.push_back(paths(p, j));
    return out;
}

} // namespace mpsfin
