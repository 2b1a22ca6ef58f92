// Cost algebra for the reduced-rank model and the reverse pass that carries
// ∂C/∂(Φ, Λ, σ, R) back to the log-hyperparameters and network weights.

#include "dklct/gp.hpp"

#include "dklct/simd.hpp"
#include "gp_detail.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>

namespace dklct::detail {

namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

std::vector<double> project(const Matrix& phi, std::span<const double> y) {
    std::vector<double> b(phi.cols(), 0.0);
    for (std::size_t i = 0; i < phi.rows(); ++i) simd::axpy(y[i], phi.row(i), b);
    return b;
}

} // namespace

CostTerms nlml_terms(const Matrix& phi, std::span<const double> lambda, double sigma, const Matrix& r,
                     std::span<const double> y, bool with_gradient) {
    const std::size_t n = phi.rows();
    const std::size_t m = phi.cols();
    const double sigma2 = sigma * sigma;
    const auto z = solve_triangular(r, project(phi, y), Transpose::yes);
    // yᵀy − zᵀz written as a sum of squares so it cannot go negative
    const auto w = solve_triangular(r, z, Transpose::no);
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - simd::dot(phi.row(i), w);
        quad += e * e;
    }
    for (std::size_t j = 0; j < m; ++j) quad += sigma2 * w[j] * w[j] / lambda[j];

    double logdet = 0.0;
    for (std::size_t j = 0; j < m; ++j) logdet += std::log(lambda[j]) + 2.0 * std::log(r(j, j));

    CostTerms out;
    out.value = 0.5 * (quad / sigma2 + (static_cast<double>(n) - static_cast<double>(m)) * std::log(sigma2) + logdet +
                       static_cast<double>(n) * kLog2Pi);
    if (!with_gradient) return out;

    std::vector<double> zbar(z);
    simd::scale(-1.0 / sigma2, zbar);
    const auto g = solve_triangular(r, zbar, Transpose::no);

    out.d_r = Matrix(m, m);
    for (std::size_t a = 0; a < m; ++a) {
        for (std::size_t b = a; b < m; ++b) out.d_r(a, b) = -z[a] * g[b];
        out.d_r(a, a) += 1.0 / r(a, a);
    }
    out.d_phi = Matrix(n, m);
    for (std::size_t i = 0; i < n; ++i) simd::axpy(y[i], g, out.d_phi.row(i));
    out.d_lambda.resize(m);
    for (std::size_t j = 0; j < m; ++j) out.d_lambda[j] = 0.5 / lambda[j];
    out.d_log_sigma = -quad / sigma2 + (static_cast<double>(n) - static_cast<double>(m));
    return out;
}

CostTerms loo_terms(const Matrix& phi, std::span<const double> /*lambda*/, double sigma, const Matrix& r,
                    std::span<const double> y, bool with_gradient) {
    const std::size_t n = phi.rows();
    const std::size_t m = phi.cols();
    const double inv_s2 = 1.0 / (sigma * sigma);

    // K⁻¹ = σ⁻²(I − P Pᵀ) with P = Φ R⁻¹.
    const Matrix p = solve_right_upper(r, phi);
    const auto z = project(p, y);
    std::vector<double> a(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
        a[i] = inv_s2 * (y[i] - simd::dot(p.row(i), z));
        d[i] = inv_s2 * (1.0 - simd::dot(p.row(i), p.row(i)));
        if (!(d[i] > 0.0)) throw LinalgError("loo_cv: non-positive diagonal of the inverse covariance");
    }

    CostTerms out;
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) value += -std::log(d[i]) + a[i] * a[i] / d[i] + kLog2Pi;
    out.value = 0.5 * value;
    if (!with_gradient) return out;

    std::vector<double> abar(n), dbar(n);
    for (std::size_t i = 0; i < n; ++i) {
        abar[i] = a[i] / d[i];
        dbar[i] = -0.5 / d[i] - 0.5 * a[i] * a[i] / (d[i] * d[i]);
    }
    const auto w = project(p, abar);

    Matrix pbar(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        auto row = pbar.row(i);
        simd::axpy(-inv_s2 * abar[i], z, row);
        simd::axpy(-inv_s2 * y[i], w, row);
        simd::axpy(-2.0 * inv_s2 * dbar[i], p.row(i), row);
    }

    // P = Φ R⁻¹  ⇒  Φ̄ = P̄ R⁻ᵀ,  R̄ = −Pᵀ Φ̄.
    Matrix gmat(n, m);
    for (std::size_t i = 0; i < n; ++i) {
        const auto gi = solve_triangular(r, pbar.row(i), Transpose::no);
        std::copy(gi.begin(), gi.end(), gmat.row(i).begin());
    }
    out.d_r = matmul_tn(p, gmat);
    simd::scale(-1.0, out.d_r.data());
    out.d_phi = std::move(gmat);
    out.d_lambda.assign(m, 0.0);
    double ds = 0.0;
    for (std::size_t i = 0; i < n; ++i) ds += abar[i] * a[i] + dbar[i] * d[i];
    out.d_log_sigma = -2.0 * ds;
    return out;
}

} // namespace dklct::detail

namespace dklct {

CostGradient LineGpProblem::cost_and_gradient(CostKind kind, const Warp& warp, const KernelHyperparameters& hyp) const {
    const std::size_t dim = hyp.dims();
    if (dim != warp_output_dim(warp)) throw DimensionError("cost_and_gradient: latent dimension mismatch");
    const std::size_t n = lines_.size();
    const auto latent = detail::latent_at_nodes(warp, sampling_.points(), true);
    const Matrix& u = latent.u;
    const std::size_t nodes = u.cols();

    std::vector<double> extent(dim, 0.0);
    std::vector<std::size_t> argmax(dim, 0);
    for (std::size_t k = 0; k < dim; ++k)
        for (std::size_t t = 0; t < nodes; ++t)
            if (std::abs(u(k, t)) > extent[k]) {
                extent[k] = std::abs(u(k, t));
                argmax[k] = t;
            }
    const DomainSelection domain = select_domain(hyp, m_tilde_, alpha_, extent);
    const BasisSpec spec{m_tilde_, domain.half_widths};
    const std::size_t m = spec.count();

    const Matrix phi = detail::build_phi(sampling_, u, spec, nullptr);
    const auto lambda = detail::spectral_diagonal(spec, hyp);
    const double sigma = hyp.sigma();
    const QrFactors qr = qr_factorize(detail::stacked_operand(phi, lambda, sigma));

    detail::CostTerms terms = kind == CostKind::nlml ? detail::nlml_terms(phi, lambda, sigma, qr.r, y_, true)
                                                     : detail::loo_terms(phi, lambda, sigma, qr.r, y_, true);
    const Matrix abar = qr_backward(terms.d_r, qr.q, qr.r);

    Matrix& phibar = terms.d_phi;
    for (std::size_t i = 0; i < n; ++i) simd::axpy(1.0, abar.row(i), phibar.row(i));
    double sigmabar = terms.d_log_sigma;
    std::vector<double>& lambdabar = terms.d_lambda;
    for (std::size_t j = 0; j < m; ++j) {
        const double diag_bar = abar(n + j, j);
        const double inv_sqrt = 1.0 / std::sqrt(lambda[j]);
        sigmabar += diag_bar * sigma * inv_sqrt;
        lambdabar[j] += diag_bar * (-0.5 * sigma * inv_sqrt / lambda[j]);
    }

    CostGradient out;
    out.value = terms.value;
    out.gradient.assign(dim + 2 + warp_param_count(warp), 0.0);
    auto& g = out.gradient;
    g[1 + dim] = sigmabar;

    // Λ_j = S(c_j): log-magnitude, explicit lengthscale, and half-width paths.
    std::vector<double> lbar(dim, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        const double t = lambdabar[j] * lambda[j];
        g[0] += 2.0 * t;
        const auto idx = index_tuple(spec, j);
        for (std::size_t k = 0; k < dim; ++k) {
            const double l = hyp.lengthscale(k);
            const double c = spec.frequency(k, idx[k]);
            const double lc2 = l * l * c * c;
            g[1 + k] += t * (1.0 - lc2);
            lbar[k] += t * lc2 / spec.half_widths[k];
        }
    }

    // Φ_ij = Σ_q w_q φ_j(u_iq): node cotangents and the half-width path.
    Matrix ubar(dim, nodes);
    detail::BasisEvaluator eval(spec);
    std::vector<double> ut(dim);
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = std::as_const(phibar).row(i);
        for (std::size_t t = sampling_.begin(i); t < sampling_.end(i); ++t) {
            for (std::size_t k = 0; k < dim; ++k) ut[k] = u(k, t);
            eval.evaluate(ut);
            const double wq = sampling_.weights()[t];
            for (std::size_t k = 0; k < dim; ++k) ubar(k, t) = wq * eval.derivative_dot(k, row);
        }
    }
    const double phi_dot = simd::dot(phibar.data(), phi.data());
    for (std::size_t k = 0; k < dim; ++k) {
        const double lk = spec.half_widths[k];
        lbar[k] += -0.5 * phi_dot / lk - simd::dot(u.row(k), std::as_const(ubar).row(k)) / lk;
    }

    for (std::size_t k = 0; k < dim; ++k) {
        if (domain.spectral_branch[k]) {
            g[1 + k] += lbar[k] * domain.half_widths[k];
        } else {
            const double s = u(k, argmax[k]) >= 0.0 ? 1.0 : -1.0;
            ubar(k, argmax[k]) += lbar[k] * kDomainMargin * s;
        }
    }

    if (const auto* net = std::get_if<WarpNetwork>(&warp))
        net->backward_batch(*latent.tape, std::move(ubar), std::span<double>(g).subspan(dim + 2));
    return out;
}

} // namespace dklct
