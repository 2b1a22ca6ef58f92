#include "dklct/gp.hpp"

#include "dklct/simd.hpp"

#include <stdexcept>

namespace dklct {

Prediction dense_baseline_predict(std::span<const LineMeasurement> lines, std::span<const double> y,
                                  const Matrix& stars, const KernelHyperparameters& hyp, std::size_t n_nodes) {
    const std::size_t n = lines.size();
    if (y.size() != n) throw DimensionError("dense_baseline_predict: observation count mismatch");
    const TwoPointKernel kernel = [&hyp](std::span<const double> a, std::span<const double> b) {
        return se_kernel(hyp, a, b);
    };

    Matrix cov(n, n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i; j < n; ++j)
            cov(i, j) = cov(j, i) = double_line_integral_oracle(kernel, lines[i], lines[j], n_nodes);
    const double sigma2 = hyp.sigma() * hyp.sigma();
    for (std::size_t i = 0; i < n; ++i) cov(i, i) += sigma2;

    Matrix chol;
    try {
        chol = cholesky(cov);
    } catch (const LinalgError&) {
        throw LinalgError("dense_baseline_predict: measurement covariance is ill-conditioned");
    }
    const auto alpha = cholesky_solve(chol, y);

    Prediction out;
    const std::size_t ns = stars.rows();
    out.mean.resize(ns);
    out.variance.resize(ns);
    out.prior_variance.assign(ns, hyp.sigma_f() * hyp.sigma_f());
    std::vector<double> cross(n);
    for (std::size_t s = 0; s < ns; ++s) {
        const auto star = stars.row(s);
        for (std::size_t i = 0; i < n; ++i)
            cross[i] = simpson_line_integral([&](std::span<const double> x) { return se_kernel(hyp, x, star); },
                                             lines[i], n_nodes);
        out.mean[s] = simd::dot(cross, alpha);
        const auto w = cholesky_solve(chol, cross);
        double var = out.prior_variance[s] - simd::dot(cross, w);
        if (var < 0.0) {
            var = 0.0;
            ++out.clamped_variances;
        }
        out.variance[s] = var;
    }
    return out;
}

} // namespace dklct
