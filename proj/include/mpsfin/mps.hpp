#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mpsfin/matrix.hpp"
#include "mpsfin/paths.hpp"

namespace mpsfin {

// One site of the chain: a rank-3 tensor with shape
// (left bond, physical, right bond), stored row-major in that index order.
struct SiteTensor {
    std::size_t left = 1;
    std::size_t phys = 1;
    std::size_t right = 1;
    std::vector<double> a;

    SiteTensor() : a(1, 0.0) {}
    SiteTensor(std::size_t l, std::size_t p, std::size_t r) : left(l), phys(p), right(r), a(l * p * r, 0.0) {}

    double& at(std::size_t l, std::size_t p, std::size_t r) { return a[(l * phys + p) * right + r]; }
    double at(std::size_t l, std::size_t p, std::size_t r) const { return a[(l * phys + p) * right + r]; }

    // Pointer/leading-dimension pair of the physical slice A[p] viewed as a
    // (left x right) matrix.
    const double* slice(std::size_t p) const { return a.data() + p * right; }
    std::size_t slice_ld() const { return phys * right; }

    bool all_finite() const;
};

// Matrix product state over M sites with physical dimension 2^m, plus the
// price quantizer it was trained against. The amplitude of a symbol string
// x is the chained product A^(1)[x_1] ... A^(M)[x_M]; probabilities follow
// the Born rule p(x) = amplitude(x)^2 / Z.
struct Mps {
    std::vector<SiteTensor> sites;
    DiscretizationMap disc;

    std::size_t n_sites() const { return sites.size(); }
    std::size_t phys_dim() const { return sites.empty() ? 0 : sites.front().phys; }
    // D_0..D_M; boundary entries are always 1.
    std::vector<std::size_t> bond_dims() const;
    void validate() const;
};

// value = mantissa * 2^exponent. Keeps chained contractions representable
// regardless of chain length; mantissa is renormalised whenever it leaves
// [1e-150, 1e150].
struct Scaled {
    double mantissa = 0.0;
    std::int64_t exponent = 0;

    bool is_zero() const { return mantissa == 0.0; }
    double to_double() const;
    // ln |value|; requires a non-zero value.
    double log_abs() const;
};

// Amplitude of one full-length symbol string.
double evaluate(const Mps& mps, std::span<const std::uint32_t> symbols);
Scaled evaluate_scaled(const Mps& mps, std::span<const std::uint32_t> symbols);

// Z = sum over all configurations of amplitude^2, contracted as a transfer
// ladder in O(M P D^3). Throws NumericalError for an identically zero model.
double partition_function(const Mps& mps);
Scaled partition_function_scaled(const Mps& mps);

// P(x_1..x_k) for a prefix of length k <= M; the empty prefix gives 1.
double marginal(const Mps& mps, std::span<const std::uint32_t> prefix);

// L = -(1/N) sum_i ln(amplitude(x^i)^2 / Z). A zero-amplitude row is a
// NumericalError naming the row. Rows are processed as a parallel map with a
// fixed-block reduction, so the value does not depend on n_threads.
double negative_log_likelihood(const Mps& mps, const SymbolPaths& data, std::size_t n_threads = 1);

// Forward KL divergence between the empirical distribution of `data` and the
// model, summed over the empirical support. Returns +infinity if the model
// assigns zero probability to an observed row. Diagnostic; requires
// M * m <= 20 bits.
double kl_to_empirical(const Mps& mps, const SymbolPaths& data);

// Suffix Gram ladder G[k] = sum over configurations of sites k..M-1 of the
// outer product of their chained matrices; G[M] = [[1]]. G[0] is Z up to the
// returned power-of-two exponent. Shared by marginal() and the sampler.
struct ScaledMatrix {
    Matrix mat;
    std::int64_t exponent = 0;
};
std::vector<ScaledMatrix> suffix_grams(const Mps& mps);

// One transfer step of either Gram ladder.
Matrix gram_step_right(const SiteTensor& t, const Matrix& g); // sum_p A[p] G A[p]^T
Matrix gram_step_left(const SiteTensor& t, const Matrix& g);  // sum_p A[p]^T G A[p]

// Gauge moves; the Born distribution is unchanged. left_normalize_site makes
// site j left-orthogonal (QR), pushing the triangular factor into site j+1;
// right_normalize_site is the mirror (LQ, factor into site j-1). Either may
// shrink the adjacent bond to its rank bound.
void left_normalize_site(Mps& mps, std::size_t j);
void right_normalize_site(Mps& mps, std::size_t j);

} // namespace mpsfin
