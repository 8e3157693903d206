#include "mpsfin/mps.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>
#include <unordered_map>

#include "mpsfin/errors.hpp"
#include "mpsfin/parallel.hpp"

namespace mpsfin {

namespace {

constexpr double kRescaleHi = 1e150;
constexpr double kRescaleLo = 1e-150;
constexpr double kLn2 = 0.6931471805599453094172321214581766;

// Renormalises a buffer by a power of two once its largest magnitude leaves
// [1e-150, 1e150]; the shift is accumulated in `exponent`.
void rescale(std::vector<double>& buf, std::int64_t& exponent) {
    double peak = 0.0;
    for (const double v : buf) peak = std::max(peak, std::fabs(v));
    if (peak == 0.0 || (peak < kRescaleHi && peak > kRescaleLo)) return;
    const int k = std::ilogb(peak);
    for (double& v : buf) v = std::ldexp(v, -k);
    exponent += k;
}

void check_row(const Mps& mps, std::span<const std::uint32_t> symbols, std::size_t expected_len) {
    if (symbols.size() != expected_len)
        throw ContractError("mps: symbol sequence has length " + std::to_string(symbols.size()) +
                            ", expected " + std::to_string(expected_len));
    const std::size_t p = mps.phys_dim();
    for (const std::uint32_t s : symbols)
        if (s >= p) throw ContractError("mps: symbol " + std::to_string(s) + " out of range");
}

// v <- v * A[x] for a row vector v of length t.left.
void apply_site(const SiteTensor& t, std::uint32_t x, std::vector<double>& v,
                std::vector<double>& scratch) {
    scratch.assign(t.right, 0.0);
    const double* slice = t.slice(x);
    const std::size_t ld = t.slice_ld();
    for (std::size_t l = 0; l < t.left; ++l) {
        const double vl = v[l];
        if (vl == 0.0) continue;
        const double* row = slice + l * ld;
        for (std::size_t r = 0; r < t.right; ++r) scratch[r] += vl * row[r];
    }
    v.swap(scratch);
}

Scaled eval_unchecked(const Mps& mps, std::span<const std::uint32_t> symbols) {
    std::vector<double> v{1.0}, scratch;
    std::int64_t exponent = 0;
    for (std::size_t j = 0; j < mps.n_sites(); ++j) {
        apply_site(mps.sites[j], symbols[j], v, scratch);
        rescale(v, exponent);
    }
    return {v[0], exponent};
}

} // namespace

// G_new = sum_p A[p] G A[p]^T via two GEMMs: W = reshape(A) G, then the
// (l, l') contraction of W against A over the fused (p, r) index.
Matrix gram_step_right(const SiteTensor& t, const Matrix& g) {
    const std::size_t L = t.left, P = t.phys, R = t.right;
    if (g.rows != R || g.cols != R) throw ContractError("gram_step_right: shape mismatch");
    Matrix w(L * P, R);
    gemm(false, false, L * P, R, R, 1.0, t.a.data(), R, g.data.data(), R, 0.0, w.data.data(), R);
    Matrix out(L, L);
    gemm(false, true, L, L, P * R, 1.0, w.data.data(), P * R, t.a.data(), P * R, 0.0,
         out.data.data(), L);
    return out;
}

Matrix gram_step_left(const SiteTensor& t, const Matrix& g) {
    const std::size_t L = t.left, P = t.phys, R = t.right;
    if (g.rows != L || g.cols != L) throw ContractError("gram_step_left: shape mismatch");
    Matrix w(L, P * R);
    gemm(false, false, L, P * R, L, 1.0, g.data.data(), L, t.a.data(), P * R, 0.0, w.data.data(),
         P * R);
    Matrix out(R, R);
    gemm(true, false, R, R, L * P, 1.0, t.a.data(), R, w.data.data(), R, 0.0, out.data.data(), R);
    return out;
}

void left_normalize_site(Mps& mps, std::size_t j) {
    if (j + 1 >= mps.n_sites())
        throw ContractError("left_normalize_site: site needs a right neighbour");
    SiteTensor& s = mps.sites[j];
    auto [q, r] = qr_thin(Matrix(s.left * s.phys, s.right, s.a));
    const std::size_t k = q.cols;

    SiteTensor& t = mps.sites[j + 1];
    Matrix absorbed = matmul(r, Matrix(t.left, t.phys * t.right, std::move(t.a)));

    SiteTensor nj(s.left, s.phys, k);
    nj.a = std::move(q.data);
    SiteTensor nt(k, t.phys, t.right);
    nt.a = std::move(absorbed.data);
    mps.sites[j] = std::move(nj);
    mps.sites[j + 1] = std::move(nt);
}

void right_normalize_site(Mps& mps, std::size_t j) {
    if (j == 0 || j >= mps.n_sites())
        throw ContractError("right_normalize_site: site needs a left neighbour");
    SiteTensor& s = mps.sites[j];
    auto [l, q] = lq_thin(Matrix(s.left, s.phys * s.right, s.a));
    const std::size_t k = q.rows;

    SiteTensor& t = mps.sites[j - 1];
    Matrix absorbed = matmul(Matrix(t.left * t.phys, t.right, std::move(t.a)), l);

    SiteTensor nj(k, s.phys, s.right);
    nj.a = std::move(q.data);
    SiteTensor nt(t.left, t.phys, k);
    nt.a = std::move(absorbed.data);
    mps.sites[j] = std::move(nj);
    mps.sites[j - 1] = std::move(nt);
}

bool SiteTensor::all_finite() const {
    return std::all_of(a.begin(), a.end(), [](double x) { return std::isfinite(x); });
}

std::vector<std::size_t> Mps::bond_dims() const {
    std::vector<std::size_t> d;
    d.reserve(sites.size() + 1);
    d.push_back(sites.empty() ? 1 : sites.front().left);
    for (const auto& s : sites) d.push_back(s.right);
    return d;
}

void Mps::validate() const {
    if (sites.empty()) throw ContractError("Mps: no sites");
    disc.validate();
    const std::size_t p = disc.n_symbols();
    if (sites.front().left != 1 || sites.back().right != 1)
        throw ContractError("Mps: boundary bond dimensions must be 1");
    for (std::size_t j = 0; j < sites.size(); ++j) {
        const auto& s = sites[j];
        if (s.phys != p) throw ContractError("Mps: site " + std::to_string(j) + " physical dimension mismatch");
        if (s.a.size() != s.left * s.phys * s.right)
            throw ContractError("Mps: site " + std::to_string(j) + " has inconsistent storage");
        if (j + 1 < sites.size() && s.right != sites[j + 1].left)
            throw ContractError("Mps: bond mismatch between sites " + std::to_string(j) + " and " +
                                std::to_string(j + 1));
        if (!s.all_finite()) throw ContractError("Mps: site " + std::to_string(j) + " has non-finite entries");
    }
}

double Scaled::to_double() const {
    if (mantissa == 0.0) return 0.0;
    if (exponent > std::numeric_limits<int>::max()) return mantissa > 0 ? HUGE_VAL : -HUGE_VAL;
    if (exponent < std::numeric_limits<int>::min()) return 0.0;
    return std::ldexp(mantissa, static_cast<int>(exponent));
}

double Scaled::log_abs() const {
    return std::log(std::fabs(mantissa)) + static_cast<double>(exponent) * kLn2;
}

double evaluate(const Mps& mps, std::span<const std::uint32_t> symbols) {
    return evaluate_scaled(mps, symbols).to_double();
}

Scaled evaluate_scaled(const Mps& mps, std::span<const std::uint32_t> symbols) {
    mps.validate();
    check_row(mps, symbols, mps.n_sites());
    return eval_unchecked(mps, symbols);
}

std::vector<ScaledMatrix> suffix_grams(const Mps& mps) {
    const std::size_t M = mps.n_sites();
    std::vector<ScaledMatrix> g(M + 1);
    g[M].mat = Matrix(1, 1);
    g[M].mat(0, 0) = 1.0;
    g[M].exponent = 0;
    for (std::size_t k = M; k-- > 0;) {
        // The site enters the step squared, so extreme magnitudes must be
        // pulled out of the tensor before multiplying, not after.
        const SiteTensor& t = mps.sites[k];
        double peak = 0.0;
        for (const double v : t.a) peak = std::max(peak, std::fabs(v));
        int shift = 0;
        if (peak > 0.0 && (peak > 1e120 || peak < 1e-120)) shift = std::ilogb(peak);
        if (shift == 0) {
            g[k].mat = gram_step_right(t, g[k + 1].mat);
            g[k].exponent = g[k + 1].exponent;
        } else {
            SiteTensor scaled = t;
            for (double& v : scaled.a) v = std::ldexp(v, -shift);
            g[k].mat = gram_step_right(scaled, g[k + 1].mat);
            g[k].exponent = g[k + 1].exponent + 2 * static_cast<std::int64_t>(shift);
        }
        rescale(g[k].mat.data, g[k].exponent);
    }
    return g;
}

Scaled partition_function_scaled(const Mps& mps) {
    mps.validate();
    const auto grams = suffix_grams(mps);
    return {grams[0].mat(0, 0), grams[0].exponent};
}

double partition_function(const Mps& mps) {
    const Scaled z = partition_function_scaled(mps);
    if (z.is_zero() || !(z.mantissa > 0.0))
        throw NumericalError("partition_function: model is identically zero");
    return z.to_double();
}

double marginal(const Mps& mps, std::span<const std::uint32_t> prefix) {
    mps.validate();
    const std::size_t M = mps.n_sites();
    if (prefix.size() > M) throw ContractError("marginal: prefix longer than the chain");
    const std::size_t p = mps.phys_dim();
    for (const std::uint32_t s : prefix)
        if (s >= p) throw ContractError("marginal: symbol " + std::to_string(s) + " out of range");

    const auto grams = suffix_grams(mps);
    if (!(grams[0].mat(0, 0) > 0.0))
        throw NumericalError("marginal: model is identically zero");

    std::vector<double> v{1.0}, scratch;
    std::int64_t v_exp = 0;
    for (std::size_t j = 0; j < prefix.size(); ++j) {
        apply_site(mps.sites[j], prefix[j], v, scratch);
        rescale(v, v_exp);
    }
    const Matrix& g = grams[prefix.size()].mat;
    double num = 0.0;
    for (std::size_t a = 0; a < v.size(); ++a) {
        if (v[a] == 0.0) continue;
        for (std::size_t b = 0; b < v.size(); ++b) num += v[a] * g(a, b) * v[b];
    }
    num = std::max(num, 0.0);
    const std::int64_t num_exp = 2 * v_exp + grams[prefix.size()].exponent;
    const Scaled ratio{num / grams[0].mat(0, 0), num_exp - grams[0].exponent};
    return ratio.to_double();
}

double negative_log_likelihood(const Mps& mps, const SymbolPaths& data, std::size_t n_threads) {
    mps.validate();
    if (data.n_paths == 0) throw ContractError("negative_log_likelihood: empty dataset");
    if (data.n_steps != mps.n_sites())
        throw ContractError("negative_log_likelihood: dataset has " + std::to_string(data.n_steps) +
                            " steps, model has " + std::to_string(mps.n_sites()) + " sites");
    if ((std::size_t(1) << data.m) != mps.phys_dim())
        throw ContractError("negative_log_likelihood: symbol width does not match model");

    const Scaled z = partition_function_scaled(mps);
    if (z.is_zero() || !(z.mantissa > 0.0))
        throw NumericalError("negative_log_likelihood: degenerate model, Z = 0");
    const double log_z = z.log_abs();

    const std::size_t n = data.n_paths;
    std::vector<double> log_amp(n);
    std::atomic<std::size_t> bad_row{n};
    parallel_for_blocks(n, n_threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const Scaled amp = eval_unchecked(mps, data.row(i));
            if (amp.is_zero()) {
                // Record the smallest offending row so the error is stable
                // across thread counts.
                std::size_t seen = bad_row.load();
                while (i < seen && !bad_row.compare_exchange_weak(seen, i)) {
                }
                return;
            }
            log_amp[i] = amp.log_abs();
        }
    });
    if (bad_row.load() != n)
        throw NumericalError("negative_log_likelihood: zero amplitude for data row " +
                             std::to_string(bad_row.load()));

    // Fixed-block pairwise reduction; independent of thread count.
    double total = 0.0;
    for (std::size_t b = 0; b < n; b += kParallelBlock) {
        double block = 0.0;
        for (std::size_t i = b; i < std::min(n, b + kParallelBlock); ++i) block += log_amp[i];
        total += block;
    }
    return log_z - 2.0 * total / static_cast<double>(n);
}

double kl_to_empirical(const Mps& mps, const SymbolPaths& data) {
    mps.validate();
    if (data.n_paths == 0) throw ContractError("kl_to_empirical: empty dataset");
    const std::size_t bits = data.n_steps * data.m;
    if (bits > 20) throw ContractError("kl_to_empirical: diagnostic restricted to M*m <= 20 bits");

    const Scaled z = partition_function_scaled(mps);
    if (z.is_zero() || !(z.mantissa > 0.0))
        throw NumericalError("kl_to_empirical: degenerate model, Z = 0");
    const double log_z = z.log_abs();

    std::unordered_map<std::uint64_t, std::size_t> counts;
    for (std::size_t i = 0; i < data.n_paths; ++i) {
        std::uint64_t key = 0;
        const auto row = data.row(i);
        for (std::size_t j = 0; j < row.size(); ++j)
            key |= static_cast<std::uint64_t>(row[j]) << (j * data.m);
        ++counts[key];
    }

    const double n = static_cast<double>(data.n_paths);
    double kl = 0.0;
    std::vector<std::uint32_t> row(data.n_steps);
    for (const auto& [key, count] : counts) {
        for (std::size_t j = 0; j < data.n_steps; ++j)
            row[j] = static_cast<std::uint32_t>((key >> (j * data.m)) & ((1u << data.m) - 1));
        const Scaled amp = eval_unchecked(mps, row);
        if (amp.is_zero()) return std::numeric_limits<double>::infinity();
        const double log_p = 2.0 * amp.log_abs() - log_z;
        const double phat = static_cast<double>(count) / n;
        kl += phat * (std::log(phat) - log_p);
    }
    return kl;
}

} // namespace mpsfin
