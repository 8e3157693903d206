#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mpsfin {

// Dense real matrix, row-major. The minimal kernel the tensor code needs:
// multiplication, transposition and a truncated SVD. All arithmetic is in
// 64-bit floating point.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data; // rows * cols entries, row-major

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}
    Matrix(std::size_t r, std::size_t c, std::vector<double> d);

    double& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    bool all_finite() const;
};

// c = a * b  (dgemm-backed).
Matrix matmul(const Matrix& a, const Matrix& b);

Matrix transpose(const Matrix& a);

// Frobenius norm of the difference; matrices must have equal shape.
double frobenius_distance(const Matrix& a, const Matrix& b);

// Thin singular value decomposition a = u * diag(s) * vt with
// k = min(rows, cols):
//   - u is rows x k with orthonormal columns,
//   - singular_values descending and non-negative,
//   - vt is k x cols with orthonormal rows.
// Signs are fixed so that the largest-magnitude entry of each column of u is
// positive (first such entry on ties), making the decomposition
// deterministic.
struct SvdResult {
    Matrix u;
    std::vector<double> singular_values;
    Matrix vt;
};

// Throws ContractError on non-finite input and NumericalError (with the
// backend's iteration diagnostic) if the iterative decomposition fails to
// converge.
SvdResult svd(const Matrix& a);

// Number of singular values kept under a relative cutoff and a hard cap:
// min(d_max, #{i : s_i / s_1 >= cutoff}), never less than 1. An all-zero
// spectrum keeps rank 1.
std::size_t truncate_rank(std::span<const double> singular_values, double cutoff,
                          std::size_t d_max);

// Raw dgemm wrapper used by the contraction code:
// c (m x n) = alpha * op(a) * op(b) + beta * c, row-major buffers.
void gemm(bool transpose_a, bool transpose_b, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc);

// Thin QR: a = q * r with q (rows x k) column-orthonormal, r (k x cols) upper
// triangular, k = min(rows, cols). Used to shift MPS orthogonality centers.
std::pair<Matrix, Matrix> qr_thin(const Matrix& a);

// Thin LQ: a = l * q with l (rows x k) lower triangular and q (k x cols)
// row-orthonormal.
std::pair<Matrix, Matrix> lq_thin(const Matrix& a);

} // namespace mpsfin
