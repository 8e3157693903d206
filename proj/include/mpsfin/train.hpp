#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "mpsfin/matrix.hpp"
#include "mpsfin/mps.hpp"
#include "mpsfin/paths.hpp"

namespace mpsfin {

struct TrainConfig {
    std::size_t d_max = 64;     // hard cap on bond dimensions
    double learning_rate = 1e-2;
    std::size_t epochs = 10;
    double trunc_cutoff = 1e-10; // relative singular value cutoff s_i / s_1
    std::uint64_t seed = 0;
    std::size_t batch = 0;      // 0 = full batch, otherwise samples per step
    std::size_t n_threads = 1;

    void validate() const;
};

// Two adjacent sites contracted over their shared bond: shape
// (D_left, P, P, D_right), stored row-major in that index order. Viewed as a
// (D_left * P) x (P * D_right) matrix with row index (bond, first symbol),
// the flat buffer is already the matricisation the split works on.
struct MergedPair {
    std::size_t left_site = 0; // index j of the pair (j, j+1), 0-based
    std::size_t dim_left = 1;
    std::size_t phys = 1;
    std::size_t dim_right = 1;
    std::vector<double> a;

    MergedPair() = default;
    MergedPair(std::size_t j, std::size_t dl, std::size_t p, std::size_t dr)
        : left_site(j), dim_left(dl), phys(p), dim_right(dr), a(dl * p * p * dr, 0.0) {}

    double& at(std::size_t l, std::size_t p, std::size_t q, std::size_t r) {
        return a[((l * phys + p) * phys + q) * dim_right + r];
    }
    double at(std::size_t l, std::size_t p, std::size_t q, std::size_t r) const {
        return a[((l * phys + p) * phys + q) * dim_right + r];
    }
};

// Everything outside the active pair that the NLL gradient needs: the bond
// Gram matrices of the traced-out halves and, per data row, the chained
// row/column environment vectors together with the row's two physical
// symbols. Empty Gram matrices mean "identity", the mixed-canonical fast
// path used inside sweeps.
struct PairEnvironment {
    Matrix left_vecs;  // N x D_left
    Matrix right_vecs; // N x D_right
    std::vector<std::uint32_t> sym_left;  // per-row symbol at site j
    std::vector<std::uint32_t> sym_right; // per-row symbol at site j+1
    Matrix left_gram;  // empty => identity
    Matrix right_gram; // empty => identity
    std::vector<std::uint32_t> active; // row subset for mini-batches; empty => all

    std::size_t n_rows() const { return sym_left.size(); }
};

// Near-uniform strictly positive start: every entry i.i.d. uniform on
// [0.9, 1.1], interior bonds min(2, d_max). Every configuration has positive
// amplitude, so no training row can start at zero probability.
Mps init_mps(std::size_t n_sites, unsigned m, const DiscretizationMap& disc, std::size_t d_max,
             std::uint64_t seed);

// Contracts sites j and j+1 over their shared bond.
MergedPair merge_pair(const Mps& mps, std::size_t j);

// Builds the gradient environment for pair (j, j+1) in an arbitrary gauge.
PairEnvironment make_pair_environment(const Mps& mps, std::size_t j, const SymbolPaths& data);

// d NLL / d merged. With L the negative log-likelihood over the environment's
// rows, the entry gradient is (1/Z) dZ/dA - (2/N) sum_i (1/psi_i) dpsi_i/dA,
// where dZ/dA = 2 * (Gram-contracted merged tensor) and dpsi_i/dA is the
// outer product of the row's environment vectors at its symbol slice.
// Throws NumericalError naming the first row with zero amplitude.
MergedPair nll_gradient(const MergedPair& merged, const PairEnvironment& env);

// Plain descent step merged - eta * grad; a non-finite result is a
// NumericalError (exploded step).
MergedPair apply_update(const MergedPair& merged, const MergedPair& grad, double eta);

// Which factor absorbs the singular values when a pair is re-split.
// `symmetric` distributes sqrt(S) to both sides; `left`/`right` keep the
// opposite factor orthogonal, which is what moving sweeps use to hold the
// mixed-canonical gauge.
enum class SplitDirection { symmetric, left, right };

struct SplitResult {
    SiteTensor left;
    SiteTensor right;
    std::size_t bond_dim = 1;
};

// SVD of the matricised pair, truncation via truncate_rank, and reshape back
// to two rank-3 tensors. Reconstruction error is bounded by the discarded
// singular-value weight.
SplitResult split_pair(const MergedPair& merged, double cutoff, std::size_t d_max,
                       SplitDirection direction);

struct TrainReport {
    std::vector<double> epoch_nll; // [0] = NLL of the initial model
    std::vector<std::size_t> final_bond_dims;
    double wall_seconds = 0.0;
    std::uint64_t seed = 0;
    std::string rng_algorithm;
};

// One full sweep: pairs M-2..0 right-to-left, then 0..M-2 left-to-right,
// each step doing merge -> gradient -> update -> split. Returns the updated
// model and its NLL on `data` measured after the sweep. `epoch_index` only
// seeds the mini-batch draws.
std::pair<Mps, double> sweep_epoch(Mps mps, const SymbolPaths& data, const TrainConfig& config,
                                   std::size_t epoch_index = 0);

// init_mps + config.epochs sweeps. Deterministic given (data, config).
std::pair<Mps, TrainReport> train(const SymbolPaths& data, const DiscretizationMap& disc,
                                  const TrainConfig& config);

} // namespace mpsfin
