#include "doctest.h"

#include <cmath>

#include "mpsfin/errors.hpp"
#include "mpsfin/mps.hpp"
#include "mpsfin/rng.hpp"
#include "mpsfin/train.hpp"
#include "oracles.hpp"

using namespace mpsfin;

namespace {

const DiscretizationMap kDisc22{0.0, 1.0, 2};

SymbolPaths repeated_config(const std::vector<std::uint32_t>& config, std::size_t copies,
                            unsigned m) {
    SymbolPaths d;
    d.n_paths = copies;
    d.n_steps = config.size();
    d.m = m;
    for (std::size_t i = 0; i < copies; ++i)
        d.symbols.insert(d.symbols.end(), config.begin(), config.end());
    return d;
}

double model_probability(const Mps& mps, const std::vector<std::uint32_t>& config) {
    const double amp = evaluate(mps, config);
    return amp * amp / partition_function(mps);
}

} // namespace

TEST_CASE("init_mps: strictly positive, near uniform, deterministic") {
    const DiscretizationMap disc{0.0, 1.0, 2};
    const Mps a = init_mps(3, 2, disc, 8, 99);
    for (const auto& x : oracle::enumerate_configs(3, 4)) CHECK(evaluate(a, x) > 0.0);

    const Mps b = init_mps(3, 2, disc, 8, 99);
    for (std::size_t j = 0; j < 3; ++j) CHECK(a.sites[j].a == b.sites[j].a);

    const Mps c = init_mps(3, 2, disc, 8, 100);
    CHECK(a.sites[0].a != c.sites[0].a);

    // interior bonds are min(2, d_max)
    CHECK(a.bond_dims() == std::vector<std::size_t>{1, 2, 2, 1});
    CHECK(init_mps(3, 2, disc, 1, 5).bond_dims() == std::vector<std::size_t>{1, 1, 1, 1});

    // near-uniform start: NLL within 1 nat of the uniform M*m*ln2
    RngStream rng(40, rng_domain::kTest, 40);
    const SymbolPaths data = oracle::random_symbols(30, 3, 2, rng);
    CHECK(oracle::enum_nll(a, data) <= 3 * 2 * std::log(2.0) + 1.0);
}

TEST_CASE("merge_pair contracts the shared bond") {
    RngStream rng(41, rng_domain::kTest, 41);
    const Mps mps = oracle::random_mps(3, 2, 3, rng);
    const MergedPair merged = merge_pair(mps, 1);
    CHECK(merged.dim_left == 3);
    CHECK(merged.phys == 4);
    CHECK(merged.dim_right == 1);

    // nested-loop contraction oracle
    const SiteTensor& a = mps.sites[1];
    const SiteTensor& b = mps.sites[2];
    for (std::size_t l = 0; l < merged.dim_left; ++l)
        for (std::size_t p = 0; p < 4; ++p)
            for (std::size_t q = 0; q < 4; ++q)
                for (std::size_t r = 0; r < merged.dim_right; ++r) {
                    double acc = 0.0;
                    for (std::size_t k = 0; k < a.right; ++k)
                        acc += a.at(l, p, k) * b.at(k, q, r);
                    CHECK(merged.at(l, p, q, r) == doctest::Approx(acc).epsilon(1e-13));
                }

    // evaluating through the merged tensor equals evaluating the pair
    for (const auto& x : oracle::enumerate_configs(3, 4))
        CHECK(oracle::brute_evaluate_merged(mps, 1, merged, x) ==
              doctest::Approx(oracle::brute_evaluate(mps, x)).epsilon(1e-12));

    // bond-1 pair: plain outer product
    const Mps thin = oracle::random_mps(2, 1, 1, rng);
    const MergedPair outer = merge_pair(thin, 0);
    for (std::size_t p = 0; p < 2; ++p)
        for (std::size_t q = 0; q < 2; ++q)
            CHECK(outer.at(0, p, q, 0) ==
                  doctest::Approx(thin.sites[0].at(0, p, 0) * thin.sites[1].at(0, q, 0))
                      .epsilon(1e-14));
}

TEST_CASE("gradient matches central finite differences") {
    RngStream rng(42, rng_domain::kTest, 42);
    for (int trial = 0; trial < 3; ++trial) {
        const Mps mps = oracle::random_mps(3, 2, 2, rng, true);
        const SymbolPaths data = oracle::random_symbols(20, 3, 2, rng);
        for (std::size_t j = 0; j < 2; ++j) {
            const MergedPair merged = merge_pair(mps, j);
            const PairEnvironment env = make_pair_environment(mps, j, data);
            const MergedPair grad = nll_gradient(merged, env);

            const double h = 1e-5;
            for (std::size_t idx = 0; idx < merged.a.size(); ++idx) {
                MergedPair up = merged, dn = merged;
                up.a[idx] += h;
                dn.a[idx] -= h;
                const double fd = (oracle::enum_nll_merged(mps, j, up, data) -
                                   oracle::enum_nll_merged(mps, j, dn, data)) /
                                  (2.0 * h);
                const double tol = std::max(1e-9, 1e-6 * std::fabs(fd));
                CHECK(std::fabs(grad.a[idx] - fd) <= tol);
            }
        }
    }
}

TEST_CASE("gradient vanishes when the model already matches the data") {
    // uniform model over 4 outcomes, dataset containing each exactly once
    Mps flat;
    flat.disc = DiscretizationMap{0.0, 1.0, 1};
    for (int j = 0; j < 2; ++j) {
        SiteTensor t(1, 2, 1);
        t.a = {1.0, 1.0};
        flat.sites.push_back(std::move(t));
    }
    SymbolPaths all;
    all.n_paths = 4;
    all.n_steps = 2;
    all.m = 1;
    all.symbols = {0, 0, 0, 1, 1, 0, 1, 1};

    const MergedPair merged = merge_pair(flat, 0);
    const MergedPair grad = nll_gradient(merged, make_pair_environment(flat, 0, all));
    for (const double g : grad.a) CHECK(std::fabs(g) < 1e-8);
}

TEST_CASE("objective is invariant under rescaling the model") {
    RngStream rng(43, rng_domain::kTest, 43);
    const Mps mps = oracle::random_mps(3, 2, 2, rng, true);
    const SymbolPaths data = oracle::random_symbols(15, 3, 2, rng);
    Mps scaled = mps;
    for (auto& site : scaled.sites)
        for (double& v : site.a) v *= 3.7;
    CHECK(negative_log_likelihood(scaled, data) ==
          doctest::Approx(negative_log_likelihood(mps, data)).epsilon(1e-9));
}

TEST_CASE("zero-amplitude sample fails with the row index") {
    Mps hot;
    hot.disc = DiscretizationMap{0.0, 1.0, 1};
    for (int j = 0; j < 2; ++j) {
        SiteTensor t(1, 2, 1);
        t.at(0, 0, 0) = 1.0;
        hot.sites.push_back(std::move(t));
    }
    SymbolPaths data;
    data.n_paths = 2;
    data.n_steps = 2;
    data.m = 1;
    data.symbols = {0, 0, 1, 1};
    const MergedPair merged = merge_pair(hot, 0);
    CHECK_THROWS_AS(nll_gradient(merged, make_pair_environment(hot, 0, data)), NumericalError);
}

TEST_CASE("apply_update") {
    MergedPair merged(0, 1, 1, 1);
    merged.a = {2.0};
    MergedPair grad(0, 1, 1, 1);
    grad.a = {0.5};

    CHECK(apply_update(merged, grad, 0.1).a[0] == doctest::Approx(1.95).epsilon(1e-15));
    CHECK(apply_update(merged, grad, 0.0).a[0] == 2.0);
    MergedPair zero(0, 1, 1, 1);
    CHECK(apply_update(merged, zero, 0.7).a[0] == 2.0);

    grad.a = {std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(apply_update(merged, grad, 0.1), NumericalError);
}

TEST_CASE("split_pair: exactness, truncation bound, directions") {
    RngStream rng(44, rng_domain::kTest, 44);

    // bond-1 pair: rank 1 and exact reconstruction
    const Mps thin = oracle::random_mps(2, 2, 1, rng);
    const MergedPair outer = merge_pair(thin, 0);
    const SplitResult rank1 = split_pair(outer, 1e-10, 16, SplitDirection::symmetric);
    CHECK(rank1.bond_dim == 1);

    const Mps mps = oracle::random_mps(4, 2, 3, rng);
    const MergedPair merged = merge_pair(mps, 1); // (3, 4, 4, 3): full rank 12x12

    auto reconstruction_error = [&](const SplitResult& split) {
        double err = 0.0;
        for (std::size_t l = 0; l < merged.dim_left; ++l)
            for (std::size_t p = 0; p < merged.phys; ++p)
                for (std::size_t q = 0; q < merged.phys; ++q)
                    for (std::size_t r = 0; r < merged.dim_right; ++r) {
                        double acc = 0.0;
                        for (std::size_t k = 0; k < split.bond_dim; ++k)
                            acc += split.left.at(l, p, k) * split.right.at(k, q, r);
                        const double d = acc - merged.at(l, p, q, r);
                        err += d * d;
                    }
        return std::sqrt(err);
    };

    for (const auto dir : {SplitDirection::symmetric, SplitDirection::left, SplitDirection::right}) {
        const SplitResult exact = split_pair(merged, 0.0, 100, dir);
        CHECK(reconstruction_error(exact) < 1e-10);
    }

    // truncated split: error equals the discarded weight
    const SvdResult spectrum = svd(Matrix(merged.dim_left * merged.phys,
                                          merged.phys * merged.dim_right, merged.a));
    const SplitResult truncated = split_pair(merged, 0.0, 2, SplitDirection::symmetric);
    CHECK(truncated.bond_dim == 2);
    double tail = 0.0;
    for (std::size_t k = 2; k < spectrum.singular_values.size(); ++k)
        tail += spectrum.singular_values[k] * spectrum.singular_values[k];
    CHECK(reconstruction_error(truncated) == doctest::Approx(std::sqrt(tail)).epsilon(1e-8));

    // directional splits leave the off-centre factor orthogonal
    const SplitResult left_dir = split_pair(merged, 0.0, 100, SplitDirection::left);
    const SiteTensor& rt = left_dir.right;
    for (std::size_t i = 0; i < rt.left; ++i)
        for (std::size_t j = 0; j < rt.left; ++j) {
            double acc = 0.0;
            for (std::size_t p = 0; p < rt.phys; ++p)
                for (std::size_t r = 0; r < rt.right; ++r) acc += rt.at(i, p, r) * rt.at(j, p, r);
            CHECK(std::fabs(acc - (i == j ? 1.0 : 0.0)) < 1e-12);
        }
    const SplitResult right_dir = split_pair(merged, 0.0, 100, SplitDirection::right);
    const SiteTensor& lt = right_dir.left;
    for (std::size_t i = 0; i < lt.right; ++i)
        for (std::size_t j = 0; j < lt.right; ++j) {
            double acc = 0.0;
            for (std::size_t l = 0; l < lt.left; ++l)
                for (std::size_t p = 0; p < lt.phys; ++p) acc += lt.at(l, p, i) * lt.at(l, p, j);
            CHECK(std::fabs(acc - (i == j ? 1.0 : 0.0)) < 1e-12);
        }
}

TEST_CASE("split of a merge preserves the model when nothing is truncated") {
    RngStream rng(45, rng_domain::kTest, 45);
    Mps mps = oracle::random_mps(3, 2, 2, rng);
    const auto configs = oracle::enumerate_configs(3, 4);
    std::vector<double> before;
    for (const auto& x : configs) before.push_back(evaluate(mps, x));

    for (std::size_t j = 0; j < 2; ++j) {
        const SplitResult split =
            split_pair(merge_pair(mps, j), 0.0, std::size_t(1) << 30, SplitDirection::symmetric);
        mps.sites[j] = split.left;
        mps.sites[j + 1] = split.right;
    }
    for (std::size_t i = 0; i < configs.size(); ++i)
        CHECK(evaluate(mps, configs[i]) == doctest::Approx(before[i]).epsilon(1e-9));
}

TEST_CASE("environments in the sweep gauge have identity Grams") {
    RngStream rng(46, rng_domain::kTest, 46);
    Mps mps = oracle::random_mps(4, 2, 3, rng);
    const SymbolPaths data = oracle::random_symbols(5, 4, 2, rng);
    // centre on pair (1, 2)
    left_normalize_site(mps, 0);
    right_normalize_site(mps, 3);
    const PairEnvironment env = make_pair_environment(mps, 1, data);
    for (std::size_t i = 0; i < env.left_gram.rows; ++i)
        for (std::size_t j = 0; j < env.left_gram.cols; ++j)
            CHECK(std::fabs(env.left_gram(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);
    for (std::size_t i = 0; i < env.right_gram.rows; ++i)
        for (std::size_t j = 0; j < env.right_gram.cols; ++j)
            CHECK(std::fabs(env.right_gram(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);
}

TEST_CASE("sweep with a zero learning rate changes only the gauge") {
    RngStream rng(47, rng_domain::kTest, 47);
    const Mps mps = oracle::random_mps(3, 2, 2, rng, true);
    const SymbolPaths data = oracle::random_symbols(12, 3, 2, rng);
    const double before = negative_log_likelihood(mps, data);

    TrainConfig cfg;
    cfg.learning_rate = 0.0;
    cfg.d_max = 16;
    const auto [after_mps, after_nll] = sweep_epoch(mps, data, cfg);
    CHECK(after_nll == doctest::Approx(before).epsilon(1e-9));
    CHECK(negative_log_likelihood(after_mps, data) == doctest::Approx(before).epsilon(1e-9));
}

TEST_CASE("epoch NLL is non-increasing at a small learning rate") {
    RngStream rng(48, rng_domain::kTest, 48);
    const SymbolPaths data = oracle::random_symbols(40, 3, 2, rng);
    TrainConfig cfg;
    cfg.d_max = 6;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 5;
    cfg.seed = 7;
    const auto [mps, report] = train(data, kDisc22, cfg);
    REQUIRE(report.epoch_nll.size() == 6);
    for (std::size_t e = 0; e + 1 < report.epoch_nll.size(); ++e)
        CHECK(report.epoch_nll[e + 1] <= report.epoch_nll[e] + 1e-6);
}

TEST_CASE("bond dimensions never exceed the cap") {
    RngStream rng(49, rng_domain::kTest, 49);
    const SymbolPaths data = oracle::random_symbols(30, 4, 2, rng);
    TrainConfig cfg;
    cfg.d_max = 3;
    cfg.learning_rate = 0.05;
    cfg.epochs = 3;
    const auto [mps, report] = train(data, kDisc22, cfg);
    for (const std::size_t d : report.final_bond_dims) CHECK(d <= 3);
    for (const std::size_t d : mps.bond_dims()) CHECK(d <= 3);
}

TEST_CASE("training concentrates on a point mass") {
    const std::vector<std::uint32_t> config{2, 0, 3};
    const SymbolPaths data = repeated_config(config, 25, 2);
    TrainConfig cfg;
    cfg.d_max = 8;
    cfg.learning_rate = 0.05;
    cfg.epochs = 30;
    cfg.seed = 3;
    const auto [mps, report] = train(data, kDisc22, cfg);
    CHECK(model_probability(mps, config) >= 0.99);
    CHECK(report.epoch_nll.back() < 0.05);
}

TEST_CASE("training approaches a uniform target in total variation") {
    SymbolPaths data;
    data.n_paths = 64;
    data.n_steps = 2;
    data.m = 1;
    for (std::size_t i = 0; i < 64; ++i) {
        data.symbols.push_back(static_cast<std::uint32_t>(i & 1));
        data.symbols.push_back(static_cast<std::uint32_t>((i >> 1) & 1));
    }
    TrainConfig cfg;
    cfg.d_max = 4;
    cfg.learning_rate = 0.05;
    cfg.epochs = 20;
    cfg.seed = 11;
    const auto [mps, report] = train(data, DiscretizationMap{0.0, 1.0, 1}, cfg);
    const double z = partition_function(mps);
    double tv = 0.0;
    for (const auto& x : oracle::enumerate_configs(2, 2)) {
        const double amp = evaluate(mps, x);
        tv += 0.5 * std::fabs(amp * amp / z - 0.25);
    }
    CHECK(tv < 0.05);
}

TEST_CASE("train is deterministic and epochs=0 returns the initialization") {
    RngStream rng(50, rng_domain::kTest, 50);
    const SymbolPaths data = oracle::random_symbols(20, 3, 2, rng);
    TrainConfig cfg;
    cfg.d_max = 4;
    cfg.epochs = 0;
    cfg.seed = 123;
    const auto [mps, report] = train(data, kDisc22, cfg);
    const Mps reference = init_mps(3, 2, kDisc22, 4, 123);
    REQUIRE(mps.n_sites() == reference.n_sites());
    for (std::size_t j = 0; j < mps.n_sites(); ++j) CHECK(mps.sites[j].a == reference.sites[j].a);
    CHECK(report.epoch_nll.size() == 1);

    cfg.epochs = 4;
    cfg.learning_rate = 0.02;
    const auto [m1, r1] = train(data, kDisc22, cfg);
    const auto [m2, r2] = train(data, kDisc22, cfg);
    CHECK(r1.epoch_nll == r2.epoch_nll);
    for (std::size_t j = 0; j < m1.n_sites(); ++j) CHECK(m1.sites[j].a == m2.sites[j].a);
    CHECK(r1.final_bond_dims == r2.final_bond_dims);
    CHECK(r1.seed == 123);
    CHECK(r1.rng_algorithm == kRngAlgorithm);
}

TEST_CASE("mini-batch training stays deterministic and finite") {
    RngStream rng(51, rng_domain::kTest, 51);
    const SymbolPaths data = oracle::random_symbols(60, 3, 2, rng);
    TrainConfig cfg;
    cfg.d_max = 4;
    cfg.epochs = 3;
    cfg.learning_rate = 0.02;
    cfg.batch = 16;
    cfg.seed = 77;
    const auto [m1, r1] = train(data, kDisc22, cfg);
    const auto [m2, r2] = train(data, kDisc22, cfg);
    CHECK(r1.epoch_nll == r2.epoch_nll);
    for (const double nll : r1.epoch_nll) CHECK(std::isfinite(nll));
    for (std::size_t j = 0; j < m1.n_sites(); ++j) CHECK(m1.sites[j].a == m2.sites[j].a);
}
