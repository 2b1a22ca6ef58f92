#pragma once

// Reduced-rank Gaussian process with line-integral observations.
//
// The kernel k(u(x), u(x')) is replaced by Σ_j S(c_j) φ_j(u(x)) φ_j(u(x')),
// so each observation contributes one row of Φ, Φ_ij = ∫ φ_j(u(x0_i + s n̂_i)) ds,
// evaluated with composite Simpson. All solves go through the upper
// triangular R of the stacked matrix [Φ; σ Λ^{-1/2}], for which
// RᵀR = ΦᵀΦ + σ² Λ^{-1}.

#include "dklct/basis.hpp"
#include "dklct/linalg.hpp"
#include "dklct/quad.hpp"
#include "dklct/warp.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace dklct {

enum class CostKind { nlml, loo_cv };

struct ReducedRankSystem {
    BasisSpec spec;
    KernelHyperparameters hyp;
    Matrix phi;                 ///< N×m
    std::vector<double> lambda; ///< diagonal of Λ, S(c_j)
    Matrix r;                   ///< m×m upper triangular
    std::size_t out_of_domain = 0;
};

struct Prediction {
    std::vector<double> mean;
    std::vector<double> variance;       ///< marginal posterior variance of f
    std::vector<double> prior_variance; ///< Σ_j Λ_jj φ_j(u(x))²
    std::size_t clamped_variances = 0;
    std::size_t out_of_domain = 0;
};

/// Simpson nodes of every line, stacked. Node counts stay fixed for the
/// lifetime of the object so costs are deterministic functions of θ.
class LineSampling {
public:
    LineSampling(std::span<const LineMeasurement> lines, std::span<const std::size_t> node_counts);

    std::size_t line_count() const noexcept { return offsets_.size() - 1; }
    std::size_t node_count() const noexcept { return weights_.size(); }
    std::size_t input_dim() const noexcept { return points_.rows(); }
    /// input_dim × node_count, feature-major.
    const Matrix& points() const noexcept { return points_; }
    const std::vector<double>& weights() const noexcept { return weights_; }
    std::size_t begin(std::size_t line) const { return offsets_[line]; }
    std::size_t end(std::size_t line) const { return offsets_[line + 1]; }

private:
    Matrix points_;
    std::vector<double> weights_;
    std::vector<std::size_t> offsets_;
};

/// Node counts from the default rule, capped at max_nodes (odd).
std::vector<std::size_t> node_counts_for(std::span<const LineMeasurement> lines, double min_lengthscale,
                                         std::size_t max_nodes = 401, std::size_t floor_nodes = 31);

/// Latent points u(x) for rows of `points` (N×D_x) returned feature-major (D_u×N).
Matrix warp_points(const Warp& warp, const Matrix& points_rows);

/// Builds Φ, Λ and R for a given basis (its half-widths are used as-is).
ReducedRankSystem assemble_phi(std::span<const LineMeasurement> lines, const Warp& warp, const BasisSpec& spec,
                               const KernelHyperparameters& hyp, std::span<const std::size_t> node_counts);

/// Posterior mean and marginal variance at `stars` (one point per row).
Prediction predict(const ReducedRankSystem& sys, std::span<const double> y, const Matrix& stars, const Warp& warp);

/// Full posterior covariance at up to kMaxCovarianceStars points.
inline constexpr std::size_t kMaxCovarianceStars = 2000;
Matrix predict_covariance(const ReducedRankSystem& sys, const Matrix& stars, const Warp& warp);

/// Negative log marginal likelihood of y under N(0, ΦΛΦᵀ + σ²I).
double nlml(const ReducedRankSystem& sys, std::span<const double> y);

/// Negative leave-one-out log predictive probability.
double loo_cv(const ReducedRankSystem& sys, std::span<const double> y);

/// Exact GP predictions with brute-force double integrals (identity warp,
/// squared-exponential kernel in input space). For oracle tests only.
Prediction dense_baseline_predict(std::span<const LineMeasurement> lines, std::span<const double> y,
                                  const Matrix& stars, const KernelHyperparameters& hyp, std::size_t n_nodes);

/// θ = [log σ_f, log l_1..log l_D, log σ, network parameters].
std::vector<double> pack_parameters(const KernelHyperparameters& hyp, const Warp& warp);
void unpack_parameters(std::span<const double> theta, KernelHyperparameters& hyp, Warp& warp);

struct CostGradient {
    double value = 0.0;
    std::vector<double> gradient; ///< pack_parameters layout
};

/// Training data with a fixed sampling plan; evaluates costs for any θ.
class LineGpProblem {
public:
    LineGpProblem(std::vector<LineMeasurement> lines, std::vector<std::size_t> node_counts, std::size_t m_tilde,
                  double alpha = kDefaultCoverageAlpha);

    const std::vector<LineMeasurement>& lines() const noexcept { return lines_; }
    const std::vector<double>& y() const noexcept { return y_; }
    const std::vector<std::size_t>& node_counts() const noexcept { return node_counts_; }
    const LineSampling& sampling() const noexcept { return sampling_; }
    std::size_t m_tilde() const noexcept { return m_tilde_; }
    double alpha() const noexcept { return alpha_; }

    /// Basis whose half-widths come from select_domain at the current warp.
    BasisSpec basis_for(const Warp& warp, const KernelHyperparameters& hyp) const;
    ReducedRankSystem assemble(const Warp& warp, const KernelHyperparameters& hyp) const;

    double cost(CostKind kind, const Warp& warp, const KernelHyperparameters& hyp) const;
    CostGradient cost_and_gradient(CostKind kind, const Warp& warp, const KernelHyperparameters& hyp) const;

private:
    std::vector<LineMeasurement> lines_;
    std::vector<double> y_;
    std::vector<std::size_t> node_counts_;
    LineSampling sampling_;
    std::size_t m_tilde_;
    double alpha_;
};

} // namespace dklct
