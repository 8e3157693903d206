#include "doctest.h"

#include <cmath>

#include "mpsfin/errors.hpp"
#include "mpsfin/matrix.hpp"
#include "mpsfin/rng.hpp"
#include "oracles.hpp"

using namespace mpsfin;

namespace {

Matrix reconstruct(const SvdResult& s) {
    Matrix us = s.u;
    for (std::size_t i = 0; i < us.rows; ++i)
        for (std::size_t j = 0; j < us.cols; ++j) us(i, j) *= s.singular_values[j];
    return matmul(us, s.vt);
}

double frob(const Matrix& a) {
    double sum = 0.0;
    for (const double v : a.data) sum += v * v;
    return std::sqrt(sum);
}

} // namespace

TEST_CASE("svd of the identity") {
    Matrix eye(2, 2);
    eye(0, 0) = eye(1, 1) = 1.0;
    const SvdResult s = svd(eye);
    CHECK(s.singular_values[0] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(s.singular_values[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("svd of a rank-1 outer product has norm-product spectrum") {
    // |u| = 2, |v| = 3
    const std::vector<double> u{1.2, 1.6};
    const std::vector<double> v{3.0, 0.0, 0.0};
    Matrix a(2, 3);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 3; ++j) a(i, j) = u[i] * v[j];
    const SvdResult s = svd(a);
    CHECK(s.singular_values[0] == doctest::Approx(6.0).epsilon(1e-13));
    CHECK(s.singular_values[1] == doctest::Approx(0.0).epsilon(1e-13));
}

TEST_CASE("svd agrees with the Jacobi oracle and reconstructs") {
    RngStream rng(11, rng_domain::kTest, 10);
    const Matrix a = oracle::random_matrix(8, 5, rng);
    const SvdResult s = svd(a);
    const auto ref = oracle::jacobi_svd(a);
    for (std::size_t i = 0; i < 5; ++i)
        CHECK(s.singular_values[i] == doctest::Approx(ref.singular_values[i]).epsilon(1e-10));
    CHECK(frobenius_distance(reconstruct(s), a) < 1e-10);
}

TEST_CASE("svd invariants on random shapes") {
    RngStream rng(12, rng_domain::kTest, 11);
    for (const auto [r, c] : {std::pair<std::size_t, std::size_t>{6, 9},
                              {9, 6},
                              {1, 7},
                              {7, 1},
                              {12, 12}}) {
        const Matrix a = oracle::random_matrix(r, c, rng);
        const SvdResult s = svd(a);
        const std::size_t k = std::min(r, c);

        for (std::size_t i = 0; i + 1 < k; ++i)
            CHECK(s.singular_values[i] >= s.singular_values[i + 1]);
        CHECK(s.singular_values.back() >= 0.0);

        // columns of u orthonormal, rows of vt orthonormal
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j) {
                double uu = 0.0, vv = 0.0;
                for (std::size_t l = 0; l < r; ++l) uu += s.u(l, i) * s.u(l, j);
                for (std::size_t l = 0; l < c; ++l) vv += s.vt(i, l) * s.vt(j, l);
                CHECK(std::fabs(uu - (i == j ? 1.0 : 0.0)) < 1e-10);
                CHECK(std::fabs(vv - (i == j ? 1.0 : 0.0)) < 1e-10);
            }

        const double rel = frobenius_distance(reconstruct(s), a) / frob(a);
        CHECK(rel < 1e-8);

        // sign convention: peak entry of each left singular vector positive
        for (std::size_t j = 0; j < k; ++j) {
            double best = 0.0;
            for (std::size_t i = 0; i < r; ++i)
                if (std::fabs(s.u(i, j)) > std::fabs(best)) best = s.u(i, j);
            CHECK(best >= 0.0);
        }
    }
}

TEST_CASE("svd is deterministic") {
    RngStream rng(13, rng_domain::kTest, 12);
    const Matrix a = oracle::random_matrix(7, 7, rng);
    const SvdResult s1 = svd(a), s2 = svd(a);
    CHECK(s1.u.data == s2.u.data);
    CHECK(s1.vt.data == s2.vt.data);
    CHECK(s1.singular_values == s2.singular_values);
}

TEST_CASE("orthogonal transformations leave singular values unchanged") {
    RngStream rng(14, rng_domain::kTest, 13);
    const Matrix a = oracle::random_matrix(6, 6, rng);
    const auto [q, r] = qr_thin(oracle::random_matrix(6, 6, rng));
    const SvdResult plain = svd(a);
    const SvdResult rotated = svd(matmul(transpose(q), a));
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(rotated.singular_values[i] ==
              doctest::Approx(plain.singular_values[i]).epsilon(1e-8));
}

TEST_CASE("discarded-weight identity for rank-r reconstructions") {
    RngStream rng(15, rng_domain::kTest, 14);
    for (int trial = 0; trial < 10; ++trial) {
        const Matrix a = oracle::random_matrix(9, 7, rng);
        const SvdResult s = svd(a);
        for (std::size_t rank : {std::size_t(1), std::size_t(3), std::size_t(6)}) {
            Matrix us = s.u;
            for (std::size_t i = 0; i < us.rows; ++i)
                for (std::size_t j = 0; j < us.cols; ++j)
                    us(i, j) *= j < rank ? s.singular_values[j] : 0.0;
            const double err = frobenius_distance(matmul(us, s.vt), a);
            double tail = 0.0;
            for (std::size_t j = rank; j < s.singular_values.size(); ++j)
                tail += s.singular_values[j] * s.singular_values[j];
            CHECK(err == doctest::Approx(std::sqrt(tail)).epsilon(1e-8));
        }
    }
}

TEST_CASE("svd rejects non-finite input") {
    Matrix a(2, 2);
    a(0, 0) = std::nan("");
    CHECK_THROWS_AS(svd(a), ContractError);
}

TEST_CASE("truncate_rank") {
    CHECK(truncate_rank(std::vector<double>{4.0, 2.0, 1e-14}, 1e-10, 10) == 2);
    CHECK(truncate_rank(std::vector<double>{1.0, 1.0, 1.0, 1.0}, 1e-10, 2) == 2);
    // 0.4 / 5 = 0.08 < 0.1, so only the top value survives
    CHECK(truncate_rank(std::vector<double>{5.0, 0.4, 0.3}, 0.1, 10) == 1);
    CHECK(truncate_rank(std::vector<double>{0.0, 0.0}, 1e-10, 4) == 1);
    CHECK(truncate_rank(std::vector<double>{}, 1e-10, 4) == 1);
    CHECK(truncate_rank(std::vector<double>{3.0, 2.0, 1.0}, 0.0, 100) == 3);
}

TEST_CASE("qr and lq factorizations") {
    RngStream rng(16, rng_domain::kTest, 15);
    for (const auto [r, c] :
         {std::pair<std::size_t, std::size_t>{8, 5}, {5, 8}, {4, 4}, {1, 6}, {6, 1}}) {
        const Matrix a = oracle::random_matrix(r, c, rng);
        const std::size_t k = std::min(r, c);

        const auto [q, rr] = qr_thin(a);
        CHECK(q.rows == r);
        CHECK(q.cols == k);
        CHECK(frobenius_distance(matmul(q, rr), a) < 1e-12);
        const Matrix qtq = matmul(transpose(q), q);
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
                CHECK(std::fabs(qtq(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);

        const auto [l, q2] = lq_thin(a);
        CHECK(frobenius_distance(matmul(l, q2), a) < 1e-12);
        const Matrix qqt = matmul(q2, transpose(q2));
        for (std::size_t i = 0; i < k; ++i)
            for (std::size_t j = 0; j < k; ++j)
                CHECK(std::fabs(qqt(i, j) - (i == j ? 1.0 : 0.0)) < 1e-12);
    }
}

TEST_CASE("matmul matches a hand loop") {
    RngStream rng(17, rng_domain::kTest, 16);
    const Matrix a = oracle::random_matrix(4, 6, rng);
    const Matrix b = oracle::random_matrix(6, 3, rng);
    const Matrix c = matmul(a, b);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) {
            double acc = 0.0;
            for (std::size_t k = 0; k < 6; ++k) acc += a(i, k) * b(k, j);
            CHECK(c(i, j) == doctest::Approx(acc).epsilon(1e-13));
        }
    CHECK_THROWS_AS(matmul(a, a), ContractError);
}
