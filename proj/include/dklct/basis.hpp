#pragma once

// Laplace eigenbasis on the box [-L_1, L_1] x ... x [-L_D, L_D] with Dirichlet
// boundary, the squared-exponential spectral density, and the rule that
// sizes the box from the lengthscales and the latent extent.

#include <cstddef>
#include <span>
#include <vector>

namespace dklct {

inline constexpr double kDefaultCoverageAlpha = 5.0;
/// L_k is at least this multiple of max |u_k| over the training inputs.
inline constexpr double kDomainMargin = 1.25;

/// Squared-exponential hyperparameters, stored as logarithms.
struct KernelHyperparameters {
    double log_sigma_f = 0.0;
    std::vector<double> log_lengthscales;
    double log_sigma = 0.0;

    static KernelHyperparameters from_values(double sigma_f, std::vector<double> lengthscales, double sigma);

    double sigma_f() const;
    double lengthscale(std::size_t k) const;
    double sigma() const;
    std::size_t dims() const noexcept { return log_lengthscales.size(); }
    double min_lengthscale() const;
};

struct BasisSpec {
    std::size_t m_tilde = 1;
    std::vector<double> half_widths; ///< L_k per latent direction

    std::size_t dims() const noexcept { return half_widths.size(); }
    /// m = m_tilde^dims
    std::size_t count() const;
    /// c_kj = j_k·π / (2 L_k) for a single direction.
    double frequency(std::size_t k, std::size_t jk) const;
};

/// Index tuple (each entry in [1, m_tilde]) for flat basis index `flat`,
/// with the last direction varying fastest.
std::vector<std::size_t> index_tuple(const BasisSpec& spec, std::size_t flat);

/// φ_j(u) = ∏_k L_k^{-1/2} sin(c_kj (u_k + L_k)).
double eval_eigenfunction(const BasisSpec& spec, std::span<const std::size_t> j, std::span<const double> u);

/// λ_j = Σ_k c_kj².
double eigenvalue(const BasisSpec& spec, std::span<const std::size_t> j);

/// S(ω) = σ_f² (2π)^{D/2} ∏ l_k · exp(-½ Σ l_k² ω_k²).
double se_spectral_density(const KernelHyperparameters& hyp, std::span<const double> omega);

/// Squared-exponential covariance in latent coordinates.
double se_kernel(const KernelHyperparameters& hyp, std::span<const double> u, std::span<const double> v);

struct DomainSelection {
    std::vector<double> half_widths;
    /// true where L_k came from the spectral-coverage rule, false where the
    /// latent-extent margin dominated.
    std::vector<bool> spectral_branch;
};

/// L_k = max(m_tilde·π·l_k / (2α), kDomainMargin · u_extent_k).
DomainSelection select_domain(const KernelHyperparameters& hyp, std::size_t m_tilde, double alpha,
                              std::span<const double> u_extent);

} // namespace dklct
