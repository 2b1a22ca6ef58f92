#pragma once

#include "dklct/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

namespace dklct::testing {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    Matrix m(rows, cols);
    for (double& v : m.data()) v = dist(rng);
    return m;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

/// Central differences of f at x, one coordinate at a time.
inline std::vector<double> central_differences(const std::function<double(std::span<const double>)>& f,
                                               std::span<const double> x, double step) {
    std::vector<double> xp(x.begin(), x.end());
    std::vector<double> grad(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double keep = xp[i];
        xp[i] = keep + step;
        const double fp = f(xp);
        xp[i] = keep - step;
        const double fm = f(xp);
        xp[i] = keep;
        grad[i] = (fp - fm) / (2.0 * step);
    }
    return grad;
}

/// Worst violation of |a-b| <= rel·max(|a|,|b|), with an absolute floor used
/// when both magnitudes are below `small`. Returns 0 when every entry passes.
inline double gradient_mismatch(std::span<const double> a, std::span<const double> b, double rel, double abs_tol,
                                double small) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double mag = std::max(std::abs(a[i]), std::abs(b[i]));
        const double err = std::abs(a[i] - b[i]);
        const double tol = mag < small ? abs_tol : rel * mag;
        if (err > tol) worst = std::max(worst, err / tol);
    }
    return worst;
}

} // namespace dklct::testing
