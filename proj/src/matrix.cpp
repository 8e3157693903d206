#include "mpsfin/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mpsfin/errors.hpp"

extern "C" {
void dgemm_(const char* transa, const char* transb, const int* m, const int* n, const int* k,
            const double* alpha, const double* a, const int* lda, const double* b, const int* ldb,
            const double* beta, double* c, const int* ldc);
void dgesdd_(const char* jobz, const int* m, const int* n, double* a, const int* lda, double* s,
             double* u, const int* ldu, double* vt, const int* ldvt, double* work,
             const int* lwork, int* iwork, int* info);
void dgeqrf_(const int* m, const int* n, double* a, const int* lda, double* tau, double* work,
             const int* lwork, int* info);
void dorgqr_(const int* m, const int* n, const int* k, double* a, const int* lda,
             const double* tau, double* work, const int* lwork, int* info);
void dgelqf_(const int* m, const int* n, double* a, const int* lda, double* tau, double* work,
             const int* lwork, int* info);
void dorglq_(const int* m, const int* n, const int* k, double* a, const int* lda,
             const double* tau, double* work, const int* lwork, int* info);
// Present when the BLAS in use is OpenBLAS; keeps LAPACK single-threaded so
// repeated runs are bit-identical.
void openblas_set_num_threads(int) __attribute__((weak));
}

namespace mpsfin {

namespace {

struct BlasThreadPin {
    BlasThreadPin() {
        if (openblas_set_num_threads) openblas_set_num_threads(1);
    }
};
const BlasThreadPin blas_thread_pin;

} // namespace

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> d) : rows(r), cols(c), data(std::move(d)) {
    if (data.size() != rows * cols)
        throw ContractError("Matrix: data length does not equal rows * cols");
}

bool Matrix::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double x) { return std::isfinite(x); });
}

void gemm(bool transpose_a, bool transpose_b, std::size_t m, std::size_t n, std::size_t k,
          double alpha, const double* a, std::size_t lda, const double* b, std::size_t ldb,
          double beta, double* c, std::size_t ldc) {
    if (m == 0 || n == 0) return;
    // Row-major C = op(A) op(B) is column-major C^T = op(B)^T op(A)^T.
    const int im = static_cast<int>(n), in = static_cast<int>(m), ik = static_cast<int>(k);
    const int ilda = static_cast<int>(lda), ildb = static_cast<int>(ldb), ildc = static_cast<int>(ldc);
    const char* ta = transpose_b ? "T" : "N";
    const char* tb = transpose_a ? "T" : "N";
    dgemm_(ta, tb, &im, &in, &ik, &alpha, b, &ildb, a, &ilda, &beta, c, &ildc);
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw ContractError("matmul: inner dimensions disagree");
    Matrix c(a.rows, b.cols);
    gemm(false, false, a.rows, b.cols, a.cols, 1.0, a.data.data(), a.cols, b.data.data(), b.cols,
         0.0, c.data.data(), c.cols);
    return c;
}

Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) t(j, i) = a(i, j);
    return t;
}

double frobenius_distance(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw ContractError("frobenius_distance: shape mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

SvdResult svd(const Matrix& a) {
    if (a.rows == 0 || a.cols == 0) throw ContractError("svd: empty matrix");
    if (!a.all_finite()) throw ContractError("svd: input has non-finite entries");

    const std::size_t r = a.rows, c = a.cols, k = std::min(r, c);
    // Our row-major buffer is, viewed column-major, A^T (c x r). From
    // A^T = V S U^T the two factor buffers come back already laid out as the
    // row-major U and V^T we want.
    const int m = static_cast<int>(c), n = static_cast<int>(r), ldk = static_cast<int>(k);
    std::vector<double> work_a = a.data;
    SvdResult out;
    out.singular_values.resize(k);
    out.u = Matrix(r, k);
    out.vt = Matrix(k, c);
    std::vector<int> iwork(8 * k);
    int info = 0;
    int lwork = -1;
    double work_query = 0.0;
    dgesdd_("S", &m, &n, work_a.data(), &m, out.singular_values.data(), out.vt.data.data(), &m,
            out.u.data.data(), &ldk, &work_query, &lwork, iwork.data(), &info);
    if (info != 0) throw NumericalError("svd: workspace query failed (info=" + std::to_string(info) + ")");
    lwork = static_cast<int>(work_query);
    std::vector<double> work(static_cast<std::size_t>(lwork));
    dgesdd_("S", &m, &n, work_a.data(), &m, out.singular_values.data(), out.vt.data.data(), &m,
            out.u.data.data(), &ldk, work.data(), &lwork, iwork.data(), &info);
    if (info < 0)
        throw ContractError("svd: invalid argument " + std::to_string(-info) + " to dgesdd");
    if (info > 0)
        throw NumericalError("svd: decomposition did not converge after " + std::to_string(info) +
                             " superdiagonal updates");

    // Deterministic sign convention: the largest-magnitude entry of each left
    // singular vector is made positive.
    for (std::size_t j = 0; j < k; ++j) {
        std::size_t arg = 0;
        double best = -1.0;
        for (std::size_t i = 0; i < r; ++i) {
            const double v = std::fabs(out.u(i, j));
            if (v > best) {
                best = v;
                arg = i;
            }
        }
        if (out.u(arg, j) < 0.0) {
            for (std::size_t i = 0; i < r; ++i) out.u(i, j) = -out.u(i, j);
            for (std::size_t i = 0; i < c; ++i) out.vt(j, i) = -out.vt(j, i);
        }
    }
    return out;
}

std::pair<Matrix, Matrix> qr_thin(const Matrix& a) {
    if (a.rows == 0 || a.cols == 0) throw ContractError("qr_thin: empty matrix");
    // Row-major a is, column-major, a^T; QR of a is the transpose of an LQ
    // factorisation of that buffer.
    const int m = static_cast<int>(a.cols), n = static_cast<int>(a.rows);
    const std::size_t k = std::min(a.rows, a.cols);
    std::vector<double> buf = a.data;
    std::vector<double> tau(k);
    int info = 0, lwork = -1;
    double query = 0.0;
    dgelqf_(&m, &n, buf.data(), &m, tau.data(), &query, &lwork, &info);
    lwork = static_cast<int>(query);
    std::vector<double> work(static_cast<std::size_t>(lwork));
    dgelqf_(&m, &n, buf.data(), &m, tau.data(), work.data(), &lwork, &info);
    if (info != 0) throw NumericalError("qr_thin: dgelqf failed (info=" + std::to_string(info) + ")");

    Matrix r(k, a.cols);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i; j < a.cols; ++j) r(i, j) = buf[j + i * a.cols];

    const int km = static_cast<int>(k);
    lwork = -1;
    dorglq_(&km, &n, &km, buf.data(), &m, tau.data(), &query, &lwork, &info);
    lwork = static_cast<int>(query);
    work.resize(static_cast<std::size_t>(lwork));
    dorglq_(&km, &n, &km, buf.data(), &m, tau.data(), work.data(), &lwork, &info);
    if (info != 0) throw NumericalError("qr_thin: dorglq failed (info=" + std::to_string(info) + ")");

    Matrix q(a.rows, k);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j < k; ++j) q(i, j) = buf[j + i * a.cols];
    return {std::move(q), std::move(r)};
}

std::pair<Matrix, Matrix> lq_thin(const Matrix& a) {
    if (a.rows == 0 || a.cols == 0) throw ContractError("lq_thin: empty matrix");
    const int m = static_cast<int>(a.cols), n = static_cast<int>(a.rows);
    const std::size_t k = std::min(a.rows, a.cols);
    std::vector<double> buf = a.data;
    std::vector<double> tau(k);
    int info = 0, lwork = -1;
    double query = 0.0;
    dgeqrf_(&m, &n, buf.data(), &m, tau.data(), &query, &lwork, &info);
    lwork = static_cast<int>(query);
    std::vector<double> work(static_cast<std::size_t>(lwork));
    dgeqrf_(&m, &n, buf.data(), &m, tau.data(), work.data(), &lwork, &info);
    if (info != 0) throw NumericalError("lq_thin: dgeqrf failed (info=" + std::to_string(info) + ")");

    Matrix l(a.rows, k);
    for (std::size_t i = 0; i < a.rows; ++i)
        for (std::size_t j = 0; j <= std::min(i, k - 1); ++j) l(i, j) = buf[j + i * a.cols];

    const int km = static_cast<int>(k);
    lwork = -1;
    dorgqr_(&m, &km, &km, buf.data(), &m, tau.data(), &query, &lwork, &info);
    lwork = static_cast<int>(query);
    work.resize(static_cast<std::size_t>(lwork));
    dorgqr_(&m, &km, &km, buf.data(), &m, tau.data(), work.data(), &lwork, &info);
    if (info != 0) throw NumericalError("lq_thin: dorgqr failed (info=" + std::to_string(info) + ")");

    Matrix q(k, a.cols);
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < a.cols; ++j) q(i, j) = buf[i * a.cols + j];
    return {std::move(l), std::move(q)};
}

std::size_t truncate_rank(std::span<const double> singular_values, double cutoff,
                          std::size_t d_max) {
    if (d_max == 0) throw ContractError("truncate_rank: d_max must be positive");
    const double top = singular_values.empty() ? 0.0 : singular_values.front();
    if (top <= 0.0) return 1; // all-zero spectrum keeps rank 1
    std::size_t kept = 0;
    for (const double s : singular_values)
        if (s >= cutoff * top) ++kept;
    kept = std::max<std::size_t>(kept, 1);
    return std::min(kept, d_max);
}

} // namespace mpsfin
