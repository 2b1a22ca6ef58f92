#include "dklct/linalg.hpp"

#include "dklct/simd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dklct {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    Matrix m(r, c);
    std::size_t i = 0;
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("Matrix::from_rows: ragged rows");
        std::copy(row.begin(), row.end(), m.row(i++).begin());
    }
    return m;
}

Matrix Matrix::transposed() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto out = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            if (aik != 0.0) simd::axpy(aik, b.row(k), out);
        }
    }
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows()) throw DimensionError("matmul_tn: row counts differ");
    Matrix c(a.cols(), b.cols());
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const auto brow = b.row(k);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double aki = a(k, i);
            if (aki != 0.0) simd::axpy(aki, brow, c.row(i));
        }
    }
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw DimensionError("matmul_nt: column counts differ");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < b.rows(); ++j) c(i, j) = simd::dot(a.row(i), b.row(j));
    return c;
}

double max_abs(const Matrix& a) {
    double m = 0.0;
    for (double v : a.data()) m = std::max(m, std::abs(v));
    return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("max_abs_diff: shape mismatch");
    double m = 0.0;
    for (std::size_t k = 0; k < a.data().size(); ++k) m = std::max(m, std::abs(a.data()[k] - b.data()[k]));
    return m;
}

namespace {

struct Householder {
    Matrix work;                         // overwritten with R in the upper triangle
    std::vector<std::vector<double>> v;  // reflector k acts on rows k..p-1
    std::vector<double> tau;
    std::vector<double> sign;            // +-1 applied to row k of R / column k of Q
};

Householder householder(const Matrix& a) {
    const std::size_t p = a.rows();
    const std::size_t q = a.cols();
    if (p < q) throw DimensionError("qr_factorize: requires rows >= cols");
    for (double x : a.data())
        if (!std::isfinite(x)) throw std::domain_error("qr_factorize: non-finite entry");

    Householder h{a, {}, std::vector<double>(q, 0.0), std::vector<double>(q, 1.0)};
    h.v.resize(q);
    Matrix& w = h.work;
    std::vector<double> acc(q);

    for (std::size_t k = 0; k < q; ++k) {
        auto& v = h.v[k];
        v.resize(p - k);
        double norm2 = 0.0;
        for (std::size_t i = k; i < p; ++i) {
            v[i - k] = w(i, k);
            norm2 += v[i - k] * v[i - k];
        }
        const double norm = std::sqrt(norm2);
        if (norm == 0.0) {
            h.tau[k] = 0.0;
            continue;
        }
        const double alpha = v[0] > 0.0 ? -norm : norm;
        v[0] -= alpha;
        const double vtv = norm2 - w(k, k) * w(k, k) + v[0] * v[0];
        h.tau[k] = vtv > 0.0 ? 2.0 / vtv : 0.0;

        w(k, k) = alpha;
        for (std::size_t i = k + 1; i < p; ++i) w(i, k) = 0.0;
        const std::size_t tail = q - k - 1;
        if (tail == 0 || h.tau[k] == 0.0) continue;

        std::span<double> accs(acc.data(), tail);
        std::fill(accs.begin(), accs.end(), 0.0);
        // stacked operands leave long runs of exact zeros in v
        for (std::size_t i = k; i < p; ++i)
            if (v[i - k] != 0.0) simd::axpy(v[i - k], w.row(i).subspan(k + 1, tail), accs);
        for (std::size_t i = k; i < p; ++i)
            if (v[i - k] != 0.0) simd::axpy(-h.tau[k] * v[i - k], accs, w.row(i).subspan(k + 1, tail));
    }

    double dmax = 0.0;
    for (std::size_t k = 0; k < q; ++k) dmax = std::max(dmax, std::abs(w(k, k)));
    for (std::size_t k = 0; k < q; ++k) {
        if (!(std::abs(w(k, k)) >= kRankTolerance * dmax) || dmax == 0.0)
            throw RankDeficientError("qr_factorize: rank deficient at column " + std::to_string(k));
        if (w(k, k) < 0.0) h.sign[k] = -1.0;
    }
    return h;
}

Matrix extract_r(const Householder& h) {
    const std::size_t q = h.work.cols();
    Matrix r(q, q);
    for (std::size_t i = 0; i < q; ++i)
        for (std::size_t j = i; j < q; ++j) r(i, j) = h.sign[i] * h.work(i, j);
    return r;
}

void check_upper_square(const Matrix& r, const char* who) {
    if (r.rows() != r.cols()) throw DimensionError(std::string(who) + ": matrix must be square");
    for (std::size_t i = 0; i < r.rows(); ++i)
        if (r(i, i) == 0.0) throw SingularMatrixError(std::string(who) + ": zero diagonal entry");
}

} // namespace

Matrix qr_r_factor(const Matrix& a) { return extract_r(householder(a)); }

QrFactors qr_factorize(const Matrix& a) {
    const Householder h = householder(a);
    const std::size_t p = a.rows();
    const std::size_t q = a.cols();

    Matrix qm(p, q);
    for (std::size_t i = 0; i < q; ++i) qm(i, i) = 1.0;
    std::vector<double> acc(q);
    for (std::size_t kk = q; kk-- > 0;) {
        if (h.tau[kk] == 0.0) continue;
        const auto& v = h.v[kk];
        const std::size_t width = q - kk;
        std::span<double> accs(acc.data(), width);
        std::fill(accs.begin(), accs.end(), 0.0);
        for (std::size_t i = kk; i < p; ++i)
            if (v[i - kk] != 0.0) simd::axpy(v[i - kk], qm.row(i).subspan(kk, width), accs);
        for (std::size_t i = kk; i < p; ++i)
            if (v[i - kk] != 0.0) simd::axpy(-h.tau[kk] * v[i - kk], accs, qm.row(i).subspan(kk, width));
    }
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = 0; j < q; ++j) qm(i, j) *= h.sign[j];

    return {std::move(qm), extract_r(h)};
}

std::vector<double> solve_triangular(const Matrix& r, std::span<const double> b, Transpose transposed) {
    check_upper_square(r, "solve_triangular");
    const std::size_t n = r.rows();
    if (b.size() != n) throw DimensionError("solve_triangular: rhs length mismatch");
    std::vector<double> x(b.begin(), b.end());
    if (transposed == Transpose::no) {
        for (std::size_t i = n; i-- > 0;) {
            const double s = simd::dot(r.row(i).subspan(i + 1), std::span<const double>(x).subspan(i + 1));
            x[i] = (x[i] - s) / r(i, i);
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            x[i] /= r(i, i);
            simd::axpy(-x[i], r.row(i).subspan(i + 1), std::span<double>(x).subspan(i + 1));
        }
    }
    return x;
}

Matrix solve_right_upper(const Matrix& r, const Matrix& b) {
    check_upper_square(r, "solve_right_upper");
    const std::size_t n = r.rows();
    if (b.cols() != n) throw DimensionError("solve_right_upper: column count mismatch");
    Matrix x = b;
    for (std::size_t row = 0; row < x.rows(); ++row) {
        auto xr = x.row(row);
        for (std::size_t j = 0; j < n; ++j) {
            xr[j] /= r(j, j);
            if (xr[j] != 0.0) simd::axpy(-xr[j], r.row(j).subspan(j + 1), xr.subspan(j + 1));
        }
    }
    return x;
}

Matrix qr_backward(const Matrix& dc_dr, const Matrix& q, const Matrix& r) {
    const std::size_t n = r.rows();
    if (r.cols() != n || dc_dr.rows() != n || dc_dr.cols() != n || q.cols() != n)
        throw DimensionError("qr_backward: inconsistent shapes");
    double dmax = 0.0;
    for (std::size_t k = 0; k < n; ++k) dmax = std::max(dmax, std::abs(r(k, k)));
    for (std::size_t k = 0; k < n; ++k)
        if (!(std::abs(r(k, k)) >= kRankTolerance * dmax) || dmax == 0.0)
            throw RankDeficientError("qr_backward: R is rank deficient");

    Matrix rbar(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j) rbar(i, j) = dc_dr(i, j);

    // beta = R·R̄ᵀ − R̄·Rᵀ, antisymmetric; keep its strictly lower part.
    const Matrix y = matmul_nt(r, rbar);
    Matrix m = rbar;
    std::vector<double> gamma(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::fill(gamma.begin(), gamma.end(), 0.0);
        bool any = false;
        for (std::size_t j = 0; j < i; ++j) {
            gamma[j] = y(i, j) - y(j, i);
            any = any || gamma[j] != 0.0;
        }
        if (!any) continue;
        // row i of Γ·R⁻ᵀ solves R·zᵀ = γᵀ
        const auto z = solve_triangular(r, gamma, Transpose::no);
        simd::axpy(1.0, z, m.row(i));
    }
    return matmul(q, m);
}

Matrix cholesky(const Matrix& a) {
    if (a.rows() != a.cols()) throw DimensionError("cholesky: matrix must be square");
    const std::size_t n = a.rows();
    Matrix l(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j) - simd::dot(l.row(j).subspan(0, j), l.row(j).subspan(0, j));
        if (!(d > 0.0)) throw LinalgError("cholesky: matrix is not positive definite");
        d = std::sqrt(d);
        l(j, j) = d;
        for (std::size_t i = j + 1; i < n; ++i)
            l(i, j) = (a(i, j) - simd::dot(l.row(i).subspan(0, j), l.row(j).subspan(0, j))) / d;
    }
    return l;
}

std::vector<double> cholesky_solve(const Matrix& l, std::span<const double> b) {
    const std::size_t n = l.rows();
    if (b.size() != n) throw DimensionError("cholesky_solve: rhs length mismatch");
    std::vector<double> x(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = (x[i] - simd::dot(l.row(i).subspan(0, i), std::span<const double>(x).subspan(0, i))) / l(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        double s = x[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= l(k, i) * x[k];
        x[i] = s / l(i, i);
    }
    return x;
}

} // namespace dklct
