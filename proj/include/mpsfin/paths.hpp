#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace mpsfin {

// Affine quantizer between real prices on [x_min, x_max] and m-bit integer
// symbols. encode() maps x to floor((2^m - 1) (x - x_min) / (x_max - x_min));
// decode() maps symbol k back to x_min + k / (2^m - 1) * (x_max - x_min).
struct DiscretizationMap {
    double x_min = 0.0;
    double x_max = 1.0;
    unsigned m = 1; // bits per symbol, 1..16

    std::size_t n_symbols() const { return std::size_t(1) << m; }
    void validate() const;
};

// A rectangular set of real-valued paths, one row per path. Column j holds
// the price at time (first_time_index + j) * dt; Heston output carries the
// deterministic t_0 = S_0 column (first_time_index = 0), model samples start
// at t_1 (first_time_index = 1).
struct PathSet {
    std::size_t n_paths = 0;
    std::size_t n_cols = 0;
    int first_time_index = 0;
    double dt = 0.0;
    std::vector<double> values; // row-major, n_paths * n_cols

    double operator()(std::size_t path, std::size_t col) const { return values[path * n_cols + col]; }
    double& operator()(std::size_t path, std::size_t col) { return values[path * n_cols + col]; }
    std::span<const double> row(std::size_t path) const {
        return {values.data() + path * n_cols, n_cols};
    }
    // Columns t_1..t_M, i.e. the stochastic part of the path.
    std::span<const double> stochastic_row(std::size_t path) const {
        const std::size_t skip = first_time_index == 0 ? 1 : 0;
        return {values.data() + path * n_cols + skip, n_cols - skip};
    }
    void validate() const;
};

// Encoded counterpart of PathSet: integer symbols in [0, 2^m).
struct SymbolPaths {
    std::size_t n_paths = 0;
    std::size_t n_steps = 0;
    unsigned m = 1;
    std::vector<std::uint32_t> symbols; // row-major

    std::uint32_t operator()(std::size_t path, std::size_t step) const {
        return symbols[path * n_steps + step];
    }
    std::span<const std::uint32_t> row(std::size_t path) const {
        return {symbols.data() + path * n_steps, n_steps};
    }
    void validate() const;
};

// Quantizes every entry of `paths`; x_min/x_max are the global minimum and
// maximum over all entries. Throws ContractError for a constant dataset
// (x_max == x_min) or non-finite values.
std::pair<SymbolPaths, DiscretizationMap> encode(const PathSet& paths, unsigned m);

// Inverse map for a single symbol. Symbols out of [0, 2^m) are a contract
// violation.
double decode(std::uint32_t symbol, const DiscretizationMap& disc);

// Elementwise decode of a symbol matrix into real paths starting at t_1.
PathSet decode_paths(const SymbolPaths& paths, const DiscretizationMap& disc, double dt);

// Drops the leading (t_0) column; used when training on Heston output.
SymbolPaths drop_first_column(const SymbolPaths& paths);

} // namespace mpsfin
