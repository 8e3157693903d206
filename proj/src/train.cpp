#include "mpsfin/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <string>

#include "mpsfin/errors.hpp"
#include "mpsfin/rng.hpp"

namespace mpsfin {

namespace {

void check_data(const Mps& mps, const SymbolPaths& data) {
    if (data.n_paths == 0) throw ContractError("train: empty dataset");
    if (data.n_steps != mps.n_sites())
        throw ContractError("train: dataset step count does not match the chain length");
    if ((std::size_t(1) << data.m) != mps.phys_dim())
        throw ContractError("train: symbol width does not match the model");
}

// new(i, :) = old(i, :) * A[x_i]
Matrix advance_left_vectors(const Matrix& vecs, const SiteTensor& t, const SymbolPaths& data,
                            std::size_t col) {
    Matrix out(vecs.rows, t.right);
    const std::size_t ld = t.slice_ld();
    for (std::size_t i = 0; i < vecs.rows; ++i) {
        const double* v = vecs.data.data() + i * vecs.cols;
        const double* slice = t.slice(data(i, col));
        double* o = out.data.data() + i * t.right;
        for (std::size_t l = 0; l < t.left; ++l) {
            const double vl = v[l];
            if (vl == 0.0) continue;
            const double* row = slice + l * ld;
            for (std::size_t r = 0; r < t.right; ++r) o[r] += vl * row[r];
        }
    }
    return out;
}

// new(i, :) = A[x_i] * old(i, :)
Matrix advance_right_vectors(const Matrix& vecs, const SiteTensor& t, const SymbolPaths& data,
                             std::size_t col) {
    Matrix out(vecs.rows, t.left);
    const std::size_t ld = t.slice_ld();
    for (std::size_t i = 0; i < vecs.rows; ++i) {
        const double* v = vecs.data.data() + i * vecs.cols;
        const double* slice = t.slice(data(i, col));
        double* o = out.data.data() + i * t.left;
        for (std::size_t l = 0; l < t.left; ++l) {
            const double* row = slice + l * ld;
            double acc = 0.0;
            for (std::size_t r = 0; r < t.right; ++r) acc += row[r] * v[r];
            o[l] = acc;
        }
    }
    return out;
}

std::vector<std::uint32_t> draw_batch(std::size_t n, std::size_t batch, std::uint64_t seed,
                                      std::uint32_t step) {
    std::vector<std::uint32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0u);
    RngStream rng(seed, rng_domain::kBatch, step);
    const std::size_t take = std::min(batch, n);
    for (std::size_t i = 0; i < take; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.bounded(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(take);
    return idx;
}

MergedPair merge_tensors(std::size_t j, const SiteTensor& a, const SiteTensor& b) {
    MergedPair out(j, a.left, a.phys, b.right);
    gemm(false, false, a.left * a.phys, b.phys * b.right, a.right, 1.0, a.a.data(), a.right,
         b.a.data(), b.phys * b.right, 0.0, out.a.data(), b.phys * b.right);
    return out;
}

} // namespace

void TrainConfig::validate() const {
    if (d_max < 1) throw ContractError("TrainConfig: d_max must be at least 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ContractError("TrainConfig: learning rate must be finite and non-negative");
    if (!(trunc_cutoff >= 0.0 && trunc_cutoff < 1.0))
        throw ContractError("TrainConfig: trunc_cutoff must lie in [0, 1)");
}

Mps init_mps(std::size_t n_sites, unsigned m, const DiscretizationMap& disc, std::size_t d_max,
             std::uint64_t seed) {
    if (n_sites < 2) throw ContractError("init_mps: need at least two sites");
    if (d_max < 1) throw ContractError("init_mps: d_max must be at least 1");
    disc.validate();
    if (disc.m != m) throw ContractError("init_mps: m disagrees with the discretization map");

    const std::size_t phys = std::size_t(1) << m;
    const std::size_t interior = std::min<std::size_t>(2, d_max);
    Mps mps;
    mps.disc = disc;
    mps.sites.reserve(n_sites);
    for (std::size_t j = 0; j < n_sites; ++j) {
        SiteTensor t(j == 0 ? 1 : interior, phys, j + 1 == n_sites ? 1 : interior);
        RngStream rng(seed, rng_domain::kInitMps, static_cast<std::uint32_t>(j));
        for (double& x : t.a) x = 0.9 + 0.2 * rng.uniform01();
        mps.sites.push_back(std::move(t));
    }
    return mps;
}

MergedPair merge_pair(const Mps& mps, std::size_t j) {
    mps.validate();
    if (j + 1 >= mps.n_sites()) throw ContractError("merge_pair: no pair starts at site " + std::to_string(j));
    return merge_tensors(j, mps.sites[j], mps.sites[j + 1]);
}

PairEnvironment make_pair_environment(const Mps& mps, std::size_t j, const SymbolPaths& data) {
    mps.validate();
    check_data(mps, data);
    if (j + 1 >= mps.n_sites())
        throw ContractError("make_pair_environment: no pair starts at site " + std::to_string(j));
    const std::size_t M = mps.n_sites(), n = data.n_paths;

    PairEnvironment env;
    env.left_gram = Matrix(1, 1);
    env.left_gram(0, 0) = 1.0;
    for (std::size_t s = 0; s < j; ++s) env.left_gram = gram_step_left(mps.sites[s], env.left_gram);
    env.right_gram = Matrix(1, 1);
    env.right_gram(0, 0) = 1.0;
    for (std::size_t s = M; s-- > j + 2;)
        env.right_gram = gram_step_right(mps.sites[s], env.right_gram);

    env.left_vecs = Matrix(n, 1);
    std::fill(env.left_vecs.data.begin(), env.left_vecs.data.end(), 1.0);
    for (std::size_t s = 0; s < j; ++s)
        env.left_vecs = advance_left_vectors(env.left_vecs, mps.sites[s], data, s);
    env.right_vecs = Matrix(n, 1);
    std::fill(env.right_vecs.data.begin(), env.right_vecs.data.end(), 1.0);
    for (std::size_t s = M; s-- > j + 2;)
        env.right_vecs = advance_right_vectors(env.right_vecs, mps.sites[s], data, s);

    env.sym_left.resize(n);
    env.sym_right.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        env.sym_left[i] = data(i, j);
        env.sym_right[i] = data(i, j + 1);
    }
    return env;
}

MergedPair nll_gradient(const MergedPair& merged, const PairEnvironment& env) {
    const std::size_t dl = merged.dim_left, dr = merged.dim_right, p = merged.phys;
    const std::size_t n = env.n_rows();
    if (n == 0) throw ContractError("nll_gradient: environment has no rows");
    if (env.left_vecs.rows != n || env.right_vecs.rows != n)
        throw ContractError("nll_gradient: environment row count mismatch");
    if (env.left_vecs.cols != dl || env.right_vecs.cols != dr)
        throw ContractError("nll_gradient: environment bond dimensions do not match the pair");

    const bool canonical = env.left_gram.data.empty() && env.right_gram.data.empty();

    // Gram-contracted merged tensor C and the partition function
    // Z = <merged, C>; in the canonical gauge C is the merged tensor itself.
    MergedPair contracted = merged;
    if (!canonical) {
        if (env.left_gram.rows != dl || env.right_gram.rows != dr)
            throw ContractError("nll_gradient: Gram shapes do not match the pair");
        const std::size_t row_stride = p * p * dr;
        std::vector<double> tmp(dl * dr);
        for (std::size_t a = 0; a < p; ++a)
            for (std::size_t b = 0; b < p; ++b) {
                const double* slice = merged.a.data() + (a * p + b) * dr;
                // tmp = Lg * A[a,b]
                gemm(false, false, dl, dr, dl, 1.0, env.left_gram.data.data(), dl, slice,
                     row_stride, 0.0, tmp.data(), dr);
                double* out = contracted.a.data() + (a * p + b) * dr;
                gemm(false, false, dl, dr, dr, 1.0, tmp.data(), dr, env.right_gram.data.data(), dr,
                     0.0, out, row_stride);
            }
    }
    double z = 0.0;
    for (std::size_t i = 0; i < merged.a.size(); ++i) z += merged.a[i] * contracted.a[i];
    if (!(z > 0.0)) throw NumericalError("nll_gradient: partition function is not positive");

    MergedPair grad(merged.left_site, dl, p, dr);
    const double zc = 2.0 / z;
    for (std::size_t i = 0; i < grad.a.size(); ++i) grad.a[i] = zc * contracted.a[i];

    const std::size_t row_stride = p * p * dr;
    std::vector<double> t(dl);
    const std::size_t n_active = env.active.empty() ? n : env.active.size();
    const double w = 2.0 / static_cast<double>(n_active);
    for (std::size_t ii = 0; ii < n_active; ++ii) {
        const std::size_t i = env.active.empty() ? ii : env.active[ii];
        const double* lv = env.left_vecs.data.data() + i * dl;
        const double* rv = env.right_vecs.data.data() + i * dr;
        const double* slice = merged.a.data() + (env.sym_left[i] * p + env.sym_right[i]) * dr;
        // psi_i = lv . A[x, y] . rv
        double psi = 0.0;
        for (std::size_t l = 0; l < dl; ++l) {
            const double* row = slice + l * row_stride;
            double acc = 0.0;
            for (std::size_t r = 0; r < dr; ++r) acc += row[r] * rv[r];
            t[l] = acc;
            psi += lv[l] * acc;
        }
        if (psi == 0.0)
            throw NumericalError("nll_gradient: zero amplitude for data row " + std::to_string(i));
        const double coef = w / psi;
        double* gslice = grad.a.data() + (env.sym_left[i] * p + env.sym_right[i]) * dr;
        for (std::size_t l = 0; l < dl; ++l) {
            const double c = coef * lv[l];
            double* grow = gslice + l * row_stride;
            for (std::size_t r = 0; r < dr; ++r) grow[r] -= c * rv[r];
        }
    }
    return grad;
}

MergedPair apply_update(const MergedPair& merged, const MergedPair& grad, double eta) {
    if (merged.a.size() != grad.a.size() || merged.dim_left != grad.dim_left ||
        merged.phys != grad.phys || merged.dim_right != grad.dim_right)
        throw ContractError("apply_update: shape mismatch between pair and gradient");
    MergedPair out = merged;
    for (std::size_t i = 0; i < out.a.size(); ++i) {
        out.a[i] -= eta * grad.a[i];
        if (!std::isfinite(out.a[i]))
            throw NumericalError("apply_update: non-finite entry after step (exploded update)");
    }
    return out;
}

SplitResult split_pair(const MergedPair& merged, double cutoff, std::size_t d_max,
                       SplitDirection direction) {
    const std::size_t dl = merged.dim_left, dr = merged.dim_right, p = merged.phys;
    const SvdResult dec = svd(Matrix(dl * p, p * dr, merged.a));
    const std::size_t rank = truncate_rank(dec.singular_values, cutoff, d_max);

    std::vector<double> wl(rank), wr(rank);
    for (std::size_t k = 0; k < rank; ++k) {
        const double s = dec.singular_values[k];
        switch (direction) {
        case SplitDirection::symmetric:
            wl[k] = wr[k] = std::sqrt(s);
            break;
        case SplitDirection::left:
            wl[k] = s;
            wr[k] = 1.0;
            break;
        case SplitDirection::right:
            wl[k] = 1.0;
            wr[k] = s;
            break;
        }
    }

    SplitResult out;
    out.bond_dim = rank;
    out.left = SiteTensor(dl, p, rank);
    for (std::size_t row = 0; row < dl * p; ++row)
        for (std::size_t k = 0; k < rank; ++k) out.left.a[row * rank + k] = dec.u(row, k) * wl[k];
    out.right = SiteTensor(rank, p, dr);
    for (std::size_t k = 0; k < rank; ++k)
        for (std::size_t col = 0; col < p * dr; ++col)
            out.right.a[k * p * dr + col] = wr[k] * dec.vt(k, col);
    return out;
}

std::pair<Mps, double> sweep_epoch(Mps mps, const SymbolPaths& data, const TrainConfig& config,
                                   std::size_t epoch_index) {
    config.validate();
    mps.validate();
    check_data(mps, data);
    const std::size_t M = mps.n_sites();
    if (M < 2) throw ContractError("sweep_epoch: need at least two sites");
    const std::size_t n = data.n_paths;

    // Move the orthogonality centre to the rightmost pair so that Z and the
    // sample environments stay local throughout the sweep.
    for (std::size_t s = 0; s + 2 < M; ++s) left_normalize_site(mps, s);

    std::vector<Matrix> left_stack(M), right_stack(M + 1);
    left_stack[0] = Matrix(n, 1);
    std::fill(left_stack[0].data.begin(), left_stack[0].data.end(), 1.0);
    for (std::size_t s = 0; s + 2 < M; ++s)
        left_stack[s + 1] = advance_left_vectors(left_stack[s], mps.sites[s], data, s);
    right_stack[M] = Matrix(n, 1);
    std::fill(right_stack[M].data.begin(), right_stack[M].data.end(), 1.0);

    std::uint32_t step = static_cast<std::uint32_t>(epoch_index * 2 * (M - 1));
    auto update_pair = [&](std::size_t j, SplitDirection direction) {
        PairEnvironment env;
        env.left_vecs = left_stack[j];
        env.right_vecs = right_stack[j + 2];
        env.sym_left.resize(n);
        env.sym_right.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            env.sym_left[i] = data(i, j);
            env.sym_right[i] = data(i, j + 1);
        }
        if (config.batch > 0 && config.batch < n)
            env.active = draw_batch(n, config.batch, config.seed, step);
        ++step;

        MergedPair merged = merge_tensors(j, mps.sites[j], mps.sites[j + 1]);
        // In this gauge Z equals the squared norm of the merged pair, and the
        // objective is scale-invariant; normalising to Z = 1 keeps the step
        // size meaningful for any chain length without changing the model.
        double norm2 = 0.0;
        for (const double v : merged.a) norm2 += v * v;
        if (!(norm2 > 0.0) || !std::isfinite(norm2))
            throw NumericalError("sweep_epoch: merged pair norm is zero or non-finite");
        const double inv_norm = 1.0 / std::sqrt(norm2);
        for (double& v : merged.a) v *= inv_norm;

        const MergedPair grad = nll_gradient(merged, env);
        const MergedPair updated = apply_update(merged, grad, config.learning_rate);
        SplitResult split = split_pair(updated, config.trunc_cutoff, config.d_max, direction);
        mps.sites[j] = std::move(split.left);
        mps.sites[j + 1] = std::move(split.right);
    };

    for (std::size_t j = M - 1; j-- > 0;) {
        update_pair(j, SplitDirection::left);
        right_stack[j + 1] = advance_right_vectors(right_stack[j + 2], mps.sites[j + 1], data, j + 1);
    }
    for (std::size_t j = 0; j + 1 < M; ++j) {
        update_pair(j, SplitDirection::right);
        left_stack[j + 1] = advance_left_vectors(left_stack[j], mps.sites[j], data, j);
    }

    const double nll = negative_log_likelihood(mps, data, config.n_threads);
    return {std::move(mps), nll};
}

std::pair<Mps, TrainReport> train(const SymbolPaths& data, const DiscretizationMap& disc,
                                  const TrainConfig& config) {
    config.validate();
    if (data.n_paths == 0) throw ContractError("train: empty dataset");
    const auto t0 = std::chrono::steady_clock::now();

    Mps mps = init_mps(data.n_steps, data.m, disc, config.d_max, config.seed);
    TrainReport report;
    report.seed = config.seed;
    report.rng_algorithm = kRngAlgorithm;
    report.epoch_nll.push_back(negative_log_likelihood(mps, data, config.n_threads));

    for (std::size_t e = 0; e < config.epochs; ++e) {
        auto [next, nll] = sweep_epoch(std::move(mps), data, config, e);
        mps = std::move(next);
        if (!std::isfinite(nll))
            throw NumericalError("train: non-finite NLL at epoch " + std::to_string(e + 1));
        report.epoch_nll.push_back(nll);
    }

    report.final_bond_dims = mps.bond_dims();
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return {std::move(mps), std::move(report)};
}

} // namespace mpsfin
