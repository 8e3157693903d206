#include "doctest.h"

#include <cmath>
#include <map>

#include "mpsfin/errors.hpp"
#include "mpsfin/sample.hpp"
#include "oracles.hpp"

using namespace mpsfin;

namespace {

std::uint64_t pack(std::span<const std::uint32_t> x, unsigned m) {
    std::uint64_t key = 0;
    for (std::size_t j = 0; j < x.size(); ++j)
        key |= static_cast<std::uint64_t>(x[j]) << (j * m);
    return key;
}

Mps point_mass(const std::vector<std::uint32_t>& config, unsigned m) {
    Mps mps;
    mps.disc = DiscretizationMap{100.0, 110.0, m};
    for (const std::uint32_t s : config) {
        SiteTensor t(1, std::size_t(1) << m, 1);
        t.at(0, s, 0) = 1.0;
        mps.sites.push_back(std::move(t));
    }
    return mps;
}

} // namespace

TEST_CASE("a point-mass model always returns its configuration") {
    const std::vector<std::uint32_t> config{3, 1, 0, 2};
    const Mps mps = point_mass(config, 2);
    RngStream rng(60, rng_domain::kTest, 60);
    const MpsSampler sampler(mps);
    for (int i = 0; i < 50; ++i) CHECK(sampler.sample(rng) == config);

    const SampleBatch batch = sample_paths(mps, 1, 4242);
    CHECK(std::vector<std::uint32_t>(batch.symbols.row(0).begin(), batch.symbols.row(0).end()) ==
          config);
}

TEST_CASE("uniform model: outcome frequencies within 3 sigma of 1/4") {
    Mps flat;
    flat.disc = DiscretizationMap{0.0, 1.0, 1};
    for (int j = 0; j < 2; ++j) {
        SiteTensor t(1, 2, 1);
        t.a = {1.0, 1.0};
        flat.sites.push_back(std::move(t));
    }
    const std::size_t n = 100000;
    const SampleBatch batch = sample_paths(flat, n, 99);
    std::map<std::uint64_t, std::size_t> counts;
    for (std::size_t i = 0; i < n; ++i) ++counts[pack(batch.symbols.row(i), 1)];
    const double sigma = std::sqrt(0.25 * 0.75 / static_cast<double>(n));
    for (std::uint64_t key = 0; key < 4; ++key) {
        const double freq = static_cast<double>(counts[key]) / static_cast<double>(n);
        CHECK(std::fabs(freq - 0.25) < 3.0 * sigma);
    }
}

TEST_CASE("chi-square test against the enumerated Born distribution") {
    RngStream mk(61, rng_domain::kTest, 61);
    const Mps mps = oracle::random_mps(3, 2, 2, mk);
    const double z = oracle::enum_partition_function(mps);
    const auto configs = oracle::enumerate_configs(3, 4);

    const std::size_t n = 100000;
    const SampleBatch batch = sample_paths(mps, n, 2024);
    std::map<std::uint64_t, std::size_t> counts;
    for (std::size_t i = 0; i < n; ++i) ++counts[pack(batch.symbols.row(i), 2)];

    double stat = 0.0;
    std::size_t dof = 0;
    for (const auto& x : configs) {
        const double amp = oracle::brute_evaluate(mps, x);
        const double expected = amp * amp / z * static_cast<double>(n);
        const double observed = static_cast<double>(counts[pack(x, 2)]);
        if (expected < 1e-9) {
            CHECK(observed == 0.0);
            continue;
        }
        stat += (observed - expected) * (observed - expected) / expected;
        ++dof;
    }
    REQUIRE(dof > 1);
    CHECK(oracle::chi_square_pvalue(stat, dof - 1) > 1e-3);
}

TEST_CASE("sampler conditionals multiply to the Born probability") {
    RngStream mk(62, rng_domain::kTest, 62);
    const Mps mps = oracle::random_mps(4, 2, 3, mk);
    const double z = partition_function(mps);
    const MpsSampler sampler(mps);
    RngStream rng(63, rng_domain::kTest, 63);
    for (int i = 0; i < 25; ++i) {
        double logp = 0.0;
        const auto path = sampler.sample(rng, &logp);
        const double amp = evaluate(mps, path);
        CHECK(logp == doctest::Approx(std::log(amp * amp / z)).epsilon(1e-9));
    }
}

TEST_CASE("sample batches are reproducible and thread-count independent") {
    RngStream mk(64, rng_domain::kTest, 64);
    const Mps mps = oracle::random_mps(5, 2, 3, mk, true);
    const SampleBatch a = sample_paths(mps, 3000, 7, 1, 0.004);
    const SampleBatch b = sample_paths(mps, 3000, 7, 1, 0.004);
    const SampleBatch c = sample_paths(mps, 3000, 7, 3, 0.004);
    CHECK(a.symbols.symbols == b.symbols.symbols);
    CHECK(a.symbols.symbols == c.symbols.symbols);
    const SampleBatch d = sample_paths(mps, 3000, 8, 1, 0.004);
    CHECK(a.symbols.symbols != d.symbols.symbols);
}

TEST_CASE("decoded samples stay inside the quantizer range") {
    RngStream mk(65, rng_domain::kTest, 65);
    Mps mps = oracle::random_mps(3, 3, 2, mk, true);
    mps.disc = DiscretizationMap{88.0, 117.0, 3};
    const SampleBatch batch = sample_paths(mps, 500, 5, 1, 1.0 / 250.0);
    CHECK(batch.decoded.dt == 1.0 / 250.0);
    CHECK(batch.decoded.first_time_index == 1);
    for (const double v : batch.decoded.values) {
        CHECK(v >= 88.0);
        CHECK(v <= 117.0);
    }
}

TEST_CASE("empirical distribution converges to the model in total variation") {
    RngStream mk(66, rng_domain::kTest, 66);
    const Mps mps = oracle::random_mps(3, 2, 2, mk);
    const double z = oracle::enum_partition_function(mps);
    const std::size_t n = 200000;
    const SampleBatch batch = sample_paths(mps, n, 31);
    std::map<std::uint64_t, std::size_t> counts;
    for (std::size_t i = 0; i < n; ++i) ++counts[pack(batch.symbols.row(i), 2)];
    double tv = 0.0;
    for (const auto& x : oracle::enumerate_configs(3, 4)) {
        const double amp = oracle::brute_evaluate(mps, x);
        const double freq = static_cast<double>(counts[pack(x, 2)]) / static_cast<double>(n);
        tv += 0.5 * std::fabs(amp * amp / z - freq);
    }
    CHECK(tv < 0.02);
}

TEST_CASE("an identically zero model cannot be sampled") {
    Mps dead;
    dead.disc = DiscretizationMap{0.0, 1.0, 1};
    dead.sites.emplace_back(1, 2, 1);
    dead.sites.emplace_back(1, 2, 1);
    CHECK_THROWS_AS(MpsSampler{dead}, NumericalError);
    RngStream rng(67, rng_domain::kTest, 67);
    CHECK_THROWS_AS(sample_one(dead, rng), NumericalError);
}
