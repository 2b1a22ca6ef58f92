#pragma once

#include "dklct/gp.hpp"

#include <optional>

namespace dklct::detail {

struct LatentNodes {
    Matrix u; ///< D_u × nodes
    std::optional<WarpNetwork::Tape> tape;
};

LatentNodes latent_at_nodes(const Warp& warp, const Matrix& points, bool keep_tape);

/// Per-point evaluation of the tensor-product basis and its u-derivatives.
class BasisEvaluator {
public:
    explicit BasisEvaluator(const BasisSpec& spec);

    /// Returns false when u lies outside the box in some direction.
    bool evaluate(std::span<const double> u);
    /// φ_j(u) for all j (flat index, last direction fastest).
    std::span<const double> values();
    /// Σ_j coeff_j ∂φ_j/∂u_k.
    double derivative_dot(std::size_t k, std::span<const double> coeff);

private:
    std::span<const double> kron(std::size_t replace_dim);

    const BasisSpec& spec_;
    std::size_t m_tilde_;
    std::vector<std::vector<double>> f_;
    std::vector<std::vector<double>> df_;
    std::vector<double> buf_a_;
    std::vector<double> buf_b_;
};

Matrix build_phi(const LineSampling& sampling, const Matrix& u, const BasisSpec& spec, std::size_t* out_of_domain);
std::vector<double> spectral_diagonal(const BasisSpec& spec, const KernelHyperparameters& hyp);
/// [Φ; σ Λ^{-1/2}]
Matrix stacked_operand(const Matrix& phi, std::span<const double> lambda, double sigma);

/// Cost value and its partial derivatives with respect to the quantities it
/// reads directly (Φ, Λ, log σ, R); R's dependence on Φ, Λ and σ is folded in
/// by the caller through qr_backward.
struct CostTerms {
    double value = 0.0;
    Matrix d_phi;
    std::vector<double> d_lambda;
    double d_log_sigma = 0.0;
    Matrix d_r;
};

CostTerms nlml_terms(const Matrix& phi, std::span<const double> lambda, double sigma, const Matrix& r,
                     std::span<const double> y, bool with_gradient);
CostTerms loo_terms(const Matrix& phi, std::span<const double> lambda, double sigma, const Matrix& r,
                    std::span<const double> y, bool with_gradient);

} // namespace dklct::detail
