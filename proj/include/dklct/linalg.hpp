#pragma once

// Dense row-major matrices, Householder QR with a nonnegative-diagonal sign
// convention, triangular solves and the reverse-mode rule for QR.

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dklct {

class LinalgError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class RankDeficientError : public LinalgError {
public:
    using LinalgError::LinalgError;
};

class SingularMatrixError : public LinalgError {
public:
    using LinalgError::LinalgError;
};

class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Matrix identity(std::size_t n);
    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept { return {data_.data() + i * cols_, cols_}; }

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }

    Matrix transposed() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
/// aᵀ·b without forming the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);
/// a·bᵀ without forming the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);

/// Largest absolute entry (0 for an empty matrix).
double max_abs(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

struct QrFactors {
    Matrix q; ///< p×q, orthonormal columns
    Matrix r; ///< q×q upper triangular, nonnegative diagonal
};

/// Relative threshold on |R_jj| below which a factorization is rejected.
inline constexpr double kRankTolerance = 1e-12;

/// Thin Householder QR of a tall matrix (rows >= cols).
///
/// Throws RankDeficientError when some |R_jj| < kRankTolerance·max|R_jj|, and
/// std::domain_error for non-finite input.
QrFactors qr_factorize(const Matrix& a);

/// Same factorization, R only. Skips accumulating Q.
Matrix qr_r_factor(const Matrix& a);

enum class Transpose { no, yes };

/// Solves R·x = b (or Rᵀ·x = b) for upper-triangular R.
std::vector<double> solve_triangular(const Matrix& r, std::span<const double> b,
                                     Transpose transposed = Transpose::no);

/// Returns X = B·R⁻¹ for upper-triangular R (each row of B solved independently).
Matrix solve_right_upper(const Matrix& r, const Matrix& b);

/// Adjoint of A ↦ R for A = QR: given ∂C/∂R (lower triangle ignored) returns ∂C/∂A.
Matrix qr_backward(const Matrix& dc_dr, const Matrix& q, const Matrix& r);

/// Lower Cholesky factor of a symmetric positive-definite matrix.
Matrix cholesky(const Matrix& a);

/// Solves (L·Lᵀ)·x = b given the lower Cholesky factor.
std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b);

} // namespace dklct
